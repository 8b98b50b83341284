#include "kfdp/service.hpp"

#include <algorithm>
#include <filesystem>
#include <vector>

#include "kfdp/error.hpp"

namespace kfdp {

struct Service::Session {
  std::string id;
  PreparedStats stats;

  // Guards everything below; bound evaluation itself runs unlocked.
  std::mutex mu;
  std::map<std::string, VKPlan> plans;
  std::shared_ptr<const SignPathPool> pool;
  std::map<std::string, std::shared_ptr<const KctCalibration>> kct;
  std::map<std::string, LocalTestSpec> specs;
  std::vector<json> audit;

  void log(json entry) {
    std::lock_guard lock(mu);
    entry["seq"] = audit.size() + 1;
    audit.push_back(std::move(entry));
  }

  VKPlan plan(const std::string& name) {
    std::lock_guard lock(mu);
    auto it = plans.find(name);
    if (it == plans.end()) throw Error(ErrorCode::invalid_input, "session has no plan named '" + name + "'");
    return it->second;
  }
};

namespace {

// Error-to-status mapping shared by every endpoint.
int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_session: return 404;
    case ErrorCode::plan_mismatch: return 409;
    default: return 400;
  }
}

json error_body(const std::string& code, const std::string& message) {
  return {{"error", code}, {"message", message}};
}

const json& require(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) {
    throw Error(ErrorCode::invalid_input, std::string("missing field '") + key + "'");
  }
  return body[key];
}

std::string query_param(const std::map<std::string, std::string>& query, const std::string& key) {
  auto it = query.find(key);
  if (it == query.end()) throw Error(ErrorCode::invalid_input, "missing query parameter '" + key + "'");
  return it->second;
}

std::vector<std::string> id_list(const json& ids) {
  if (!ids.is_array()) throw Error(ErrorCode::invalid_input, "ids must be an array");
  std::vector<std::string> out;
  for (const auto& id : ids) out.push_back(id.is_string() ? id.get<std::string>() : id.dump());
  return out;
}

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)) {}
Service::~Service() = default;

std::size_t Service::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::shared_ptr<Service::Session> Service::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::unknown_session, "unknown session '" + id + "'");
  return it->second;
}

Response Service::handle(const Request& request) {
  Response response;
  try {
    json body;
    if (request.method == "POST") {
      body = request.body.empty() ? json::object() : json::parse(request.body);
    }
    if (request.method == "GET" && request.path == "/health") {
      response.body = {{"status", "ok"}, {"sessions", session_count()}};
    } else if (request.method == "POST" && request.path == "/stats") {
      response.body = post_stats(body);
    } else if (request.method == "POST" && request.path == "/plans") {
      response.body = post_plans(body);
    } else if (request.method == "POST" && request.path == "/bound") {
      response.body = post_bound(body);
    } else if (request.method == "POST" && request.path == "/ct-bound") {
      response.body = post_ct_bound(body);
    } else if (request.method == "POST" && request.path == "/warmup") {
      response.body = post_warmup(body);
    } else if (request.method == "GET" && request.path == "/nested-curve") {
      response.body = get_nested_curve(request.query);
    } else if (request.method == "GET" && request.path == "/audit") {
      response.body = get_audit(request.query);
    } else {
      response.status = 404;
      response.body = error_body("NotFound", "no route for " + request.method + " " + request.path);
    }
  } catch (const Error& e) {
    response.status = status_for(e.code());
    response.body = error_body(error_code_name(e.code()), e.what());
  } catch (const json::exception& e) {
    response.status = 400;
    response.body = error_body("InvalidInput", e.what());
  } catch (const std::logic_error& e) {
    // std::stoi / std::stod on malformed query parameters
    response.status = 400;
    response.body = error_body("InvalidInput", e.what());
  }
  return response;
}

json Service::post_stats(const json& body) {
  RawStats raw;
  if (body.contains("file")) {
    const std::filesystem::path rel = body["file"].get<std::string>();
    for (const auto& part : rel) {
      if (part == "..") throw Error(ErrorCode::invalid_input, "file must stay inside the data directory");
    }
    if (rel.is_absolute()) throw Error(ErrorCode::invalid_input, "file must be relative to the data directory");
    raw = load_stats_file((std::filesystem::path(options_.data_dir) / rel).string());
  } else {
    raw = read_stats_json(require(body, "entries"));
  }
  TieBreak policy = TieBreak::stable_by_input_order;
  std::optional<std::uint64_t> seed;
  if (body.contains("tie_break")) {
    const auto name = body["tie_break"].get<std::string>();
    if (name == "seeded_random") {
      policy = TieBreak::seeded_random;
    } else if (name != "stable_by_input_order" && name != "stable") {
      throw Error(ErrorCode::invalid_input, "unknown tie_break '" + name + "'");
    }
  }
  if (body.contains("seed")) seed = body["seed"].get<std::uint64_t>();

  auto session = std::make_shared<Session>();
  session->stats = prepare(raw, policy, seed);
  {
    std::lock_guard lock(mu_);
    session->id = "s" + std::to_string(next_id_++);
    sessions_[session->id] = session;
  }
  const auto& st = session->stats;
  return {{"session", session->id},
          {"p", st.p()},
          {"positives", st.positive_count()},
          {"negatives", st.p() - st.positive_count()},
          {"dropped_zeros", st.dropped_zero_count()}};
}

json Service::post_plans(const json& body) {
  auto s = session(require(body, "session").get<std::string>());
  const auto name = require(body, "name").get<std::string>();
  VKPlan plan;
  if (body.contains("plan")) {
    plan = plan_from_json(body["plan"]);
  } else {
    const auto& cal = require(body, "calibrate");
    const auto family = cal.value("family", std::string("B"));
    const double alpha = cal.value("alpha", 0.05);
    if (family == "js" || family == "JS") {
      plan = js_plan(require(cal, "k").get<int>(), alpha, s->stats.p());
    } else {
      const int cap = cal.value("cap", s->stats.p());
      const double delta = cal.value("delta", options_.delta);
      const long nsim = cal.value("nsim", options_.nsim);
      const auto seed = cal.value("seed", options_.pool_seed);
      const SignPathPool pool(nsim, s->stats.p(), seed);
      plan = two_step_k(v_family({parse_vkind(family), cap, {}}), alpha, delta, s->stats.p(), pool);
      plan.family = family;
    }
  }
  if (plan.horizon_p != s->stats.p()) {
    throw Error(ErrorCode::plan_mismatch, "plan horizon p=" + std::to_string(plan.horizon_p) +
                                              " does not match the session statistics (p=" +
                                              std::to_string(s->stats.p()) + ")");
  }
  {
    std::lock_guard lock(s->mu);
    s->plans[name] = plan;
    // Tables built from an older plan with this name are stale.
    s->kct.erase(name);
    for (auto it = s->specs.begin(); it != s->specs.end();) {
      it = it->first.rfind(name + "/", 0) == 0 ? s->specs.erase(it) : std::next(it);
    }
  }
  s->log({{"endpoint", "/plans"}, {"name", name}});
  return {{"name", name}, {"plan", plan_to_json(plan)}};
}

json Service::post_bound(const json& body) {
  auto s = session(require(body, "session").get<std::string>());
  const auto method = require(body, "method").get<std::string>();
  const IndexSet R = s->stats.resolve(id_list(require(body, "ids")));
  const double alpha = body.value("alpha", 0.05);

  json out;
  if (method == "kr") {
    out = report_to_json(kr_bound(s->stats, alpha, R), s->stats, nullptr);
    out["certificate"]["alpha"] = alpha;
  } else if (method == "js") {
    const auto plan = js_plan(require(body, "k").get<int>(), alpha, s->stats.p());
    auto report = KjiEvaluator(s->stats, plan)(R);
    report.method = BoundMethod::js;
    out = report_to_json(report, s->stats, &plan);
  } else if (method == "kji") {
    const auto& spec = require(body, "plan");
    const VKPlan plan = spec.is_string() ? s->plan(spec.get<std::string>()) : plan_from_json(spec);
    out = report_to_json(kji_bound(s->stats, plan, R), s->stats, &plan);
  } else {
    throw Error(ErrorCode::invalid_input, "unknown method '" + method + "' (expected js, kji or kr)");
  }
  s->log({{"endpoint", "/bound"}, {"method", method}, {"size", R.size()}, {"fdp_upper", out["fdp_upper"]}});
  return out;
}

namespace {

std::string spec_key(const std::string& plan, WeightFamily family) {
  return plan + "/" + weight_family_name(family);
}

}  // namespace

json Service::post_ct_bound(const json& body) {
  auto s = session(require(body, "session").get<std::string>());
  const auto plan_name = require(body, "plan").get<std::string>();
  const auto family = parse_weight_family(body.value("family", std::string("indicator")));
  const IndexSet R = s->stats.resolve(id_list(require(body, "ids")));
  const VKPlan plan = s->plan(plan_name);
  if (plan.horizon_p != s->stats.p()) throw Error(ErrorCode::plan_mismatch, "plan horizon does not match the session");

  // Table construction is serialized per session; queries are not.
  std::shared_ptr<const KctCalibration> calibration;
  std::optional<LocalTestSpec> spec;
  {
    std::lock_guard lock(s->mu);
    if (!s->pool) s->pool = std::make_shared<SignPathPool>(options_.nsim, s->stats.p(), options_.pool_seed);
    auto& cal = s->kct[plan_name];
    if (!cal) {
      const double delta = plan.delta > 0.0 ? plan.delta : options_.delta;
      cal = std::make_shared<KctCalibration>(plan.v, plan.alpha, delta, s->stats.p(), s->pool);
    }
    calibration = cal;
    auto it = s->specs.find(spec_key(plan_name, family));
    if (it == s->specs.end()) it = s->specs.emplace(spec_key(plan_name, family), calibration->spec(family)).first;
    spec = it->second;
  }

  const ShortcutEvaluator evaluator(s->stats, *spec);
  const CTOutcome outcome = evaluator(R);
  json out = ct_outcome_to_json(outcome, s->stats, family == WeightFamily::rank ? "KCT-rank" : "KCT");

  double min_certificate = 1.0;
  for (int size = 1; size <= s->stats.p(); ++size) {
    const auto& rule = spec->rule(size);
    if (rule.certificate) min_certificate = std::min(min_certificate, *rule.certificate);
  }
  out["certificate"] = {{"base_plan", plan_to_json(calibration->base_plan())["certificate"]},
                        {"min_size_certificate", min_certificate},
                        {"nsim", options_.nsim},
                        {"seed", options_.pool_seed}};

  if (body.value("oracle", false)) {
    const CTOutcome exact = brute_force_ct(R, s->stats, *spec);
    out["oracle"] = {{"t_bound", exact.t_bound}, {"agrees", exact.t_bound == outcome.t_bound}};
    if (exact.t_bound != outcome.t_bound) {
      throw Error(ErrorCode::invalid_input, "shortcut and brute-force closed testing disagree");
    }
  }
  s->log({{"endpoint", "/ct-bound"}, {"plan", plan_name}, {"size", R.size()}, {"t_bound", outcome.t_bound}});
  return out;
}

json Service::post_warmup(const json& body) {
  auto b = body;
  b["ids"] = json::array();
  json out = post_ct_bound(b);
  return {{"session", body["session"]}, {"plan", body["plan"]}, {"sizes", session(body["session"])->stats.p()},
          {"certificate", out["certificate"]}};
}

json Service::get_nested_curve(const std::map<std::string, std::string>& query) {
  auto s = session(query_param(query, "session"));
  const auto method = query_param(query, "method");
  const double alpha = query.contains("alpha") ? std::stod(query.at("alpha")) : 0.05;
  const auto& st = s->stats;

  std::function<Fraction(const IndexSet&)> bound;
  if (method == "kr") {
    auto eval = std::make_shared<KrEvaluator>(st, alpha);
    bound = [eval](const IndexSet& R) { return (*eval)(R).fdp_upper; };
  } else if (method == "kji" || method == "js") {
    const VKPlan plan = method == "js" ? js_plan(std::stoi(query_param(query, "k")), alpha, st.p())
                                       : s->plan(query_param(query, "plan"));
    auto eval = std::make_shared<KjiEvaluator>(st, plan);
    bound = [eval](const IndexSet& R) { return (*eval)(R).fdp_upper; };
  } else if (method == "kct" || method == "kct-rank") {
    json b{{"session", s->id}, {"plan", query_param(query, "plan")}, {"ids", json::array()},
           {"family", method == "kct" ? "indicator" : "rank"}};
    post_ct_bound(b);
    std::lock_guard lock(s->mu);
    auto spec = s->specs.at(spec_key(b["plan"], method == "kct" ? WeightFamily::indicator : WeightFamily::rank));
    auto eval = std::make_shared<ShortcutEvaluator>(st, spec);
    bound = [eval](const IndexSet& R) { return (*eval)(R).fdp_upper; };
  } else {
    throw Error(ErrorCode::invalid_input, "unknown method '" + method + "'");
  }

  json points = json::array();
  for (int i = 1; i <= st.p(); ++i) {
    const IndexSet R = nested_set(st, i);
    const Fraction b = bound(R);
    points.push_back({{"i", i},
                      {"size", R.size()},
                      {"fdp_hat", fdp_hat(st, i)},
                      {"bound", b.value()},
                      {"bound_num", b.num},
                      {"true_discoveries_lower", static_cast<std::int64_t>(R.size()) - b.num}});
  }
  s->log({{"endpoint", "/nested-curve"}, {"method", method}});
  return {{"method", method}, {"points", points}};
}

json Service::get_audit(const std::map<std::string, std::string>& query) {
  auto s = session(query_param(query, "session"));
  std::lock_guard lock(s->mu);
  return {{"session", s->id}, {"entries", s->audit}};
}

}  // namespace kfdp
