#include "kfdp/io.hpp"

#include <fstream>
#include <sstream>

#include "kfdp/error.hpp"

namespace kfdp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& context) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_input, "cannot parse number '" + text + "' (" + context + ")");
  }
  if (used != text.size()) throw Error(ErrorCode::invalid_input, "trailing characters in '" + text + "'");
  return value;
}

std::ifstream open_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_input, "cannot open '" + path + "'");
  return in;
}

}  // namespace

RawStats read_stats_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::invalid_input, "empty CSV input");
  if (trim(line) != "id,w") throw Error(ErrorCode::invalid_input, "CSV header must be 'id,w'");
  std::vector<StatEntry> entries;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(ErrorCode::invalid_input, "line " + std::to_string(lineno) + ": expected 'id,w'");
    }
    entries.push_back({trim(line.substr(0, comma)), parse_double(trim(line.substr(comma + 1)),
                                                                 "line " + std::to_string(lineno))});
  }
  return RawStats(std::move(entries));
}

RawStats read_stats_json(const json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::invalid_input, "stats JSON must be an array of {id, w}");
  std::vector<StatEntry> entries;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("id") || !item.contains("w") || !item["w"].is_number()) {
      throw Error(ErrorCode::invalid_input, "each stats entry needs an id and a numeric w");
    }
    const auto& id = item["id"];
    entries.push_back({id.is_string() ? id.get<std::string>() : id.dump(), item["w"].get<double>()});
  }
  return RawStats(std::move(entries));
}

RawStats load_stats_file(const std::string& path) {
  auto in = open_file(path);
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    try {
      return read_stats_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_input, std::string("malformed JSON: ") + e.what());
    }
  }
  return read_stats_csv(in);
}

std::vector<std::vector<std::string>> read_id_sets(std::istream& in) {
  std::vector<std::vector<std::string>> sets;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> ids;
    if (line != "-") {
      for (auto& ch : line) {
        if (ch == ',') ch = ' ';
      }
      std::istringstream tokens(line);
      std::string id;
      while (tokens >> id) ids.push_back(id);
    }
    sets.push_back(std::move(ids));
  }
  return sets;
}

std::vector<std::vector<std::string>> load_id_sets(const std::string& path) {
  auto in = open_file(path);
  return read_id_sets(in);
}

IndexSet parse_positions(const std::string& text) {
  std::vector<int> members;
  std::istringstream parts(text);
  std::string part;
  auto to_int = [](const std::string& s) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_input, "cannot parse position '" + s + "'");
    }
    if (used != s.size() || value < 1) throw Error(ErrorCode::invalid_input, "bad position '" + s + "'");
    return value;
  };
  while (std::getline(parts, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      members.push_back(to_int(part));
    } else {
      const int lo = to_int(trim(part.substr(0, colon)));
      const int hi = to_int(trim(part.substr(colon + 1)));
      if (hi < lo) throw Error(ErrorCode::invalid_input, "empty range '" + part + "'");
      for (int i = lo; i <= hi; ++i) members.push_back(i);
    }
  }
  return IndexSet(std::move(members));
}

json plan_to_json(const VKPlan& plan) {
  json out{{"alpha", plan.alpha}, {"p", plan.horizon_p}, {"v", plan.v}, {"k", plan.k}, {"family", plan.family}};
  if (plan.certificate) {
    out["certificate"] = {{"prob", plan.certificate->probability},
                          {"nsim", plan.certificate->nsim},
                          {"seed", plan.certificate->seed}};
  } else if (plan.exact_probability) {
    out["certificate"] = {{"prob", *plan.exact_probability}, {"exact", true}};
  } else {
    out["certificate"] = nullptr;
  }
  if (plan.delta > 0.0) out["delta"] = plan.delta;
  out["clamp_bound"] = plan.clamp_bound;
  return out;
}

VKPlan plan_from_json(const json& doc) {
  VKPlan plan;
  try {
    plan.alpha = doc.at("alpha").get<double>();
    plan.horizon_p = doc.at("p").get<int>();
    plan.v = doc.at("v").get<std::vector<int>>();
    plan.k = doc.at("k").get<std::vector<int>>();
    if (doc.contains("family") && doc["family"].is_string()) plan.family = doc["family"].get<std::string>();
    if (doc.contains("delta")) plan.delta = doc["delta"].get<double>();
    if (doc.contains("clamp_bound")) plan.clamp_bound = doc["clamp_bound"].get<bool>();
    if (doc.contains("certificate") && doc["certificate"].is_object()) {
      const auto& cert = doc["certificate"];
      if (cert.value("exact", false)) {
        plan.exact_probability = cert.at("prob").get<double>();
      } else {
        plan.certificate = McCertificate{cert.at("prob").get<double>(), cert.at("nsim").get<long>(),
                                         cert.at("seed").get<std::uint64_t>()};
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_input, std::string("malformed plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

VKPlan load_plan_file(const std::string& path) {
  auto in = open_file(path);
  try {
    return plan_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::invalid_input, std::string("malformed plan JSON: ") + e.what());
  }
}

json set_to_json(const IndexSet& set, const PreparedStats& stats) {
  return {{"ids", stats.ids_of(set)}, {"positions", set.members()}};
}

json fraction_to_json(const Fraction& f) { return {{"num", f.num}, {"den", f.den}, {"value", f.value()}}; }

json report_to_json(const BoundReport& report, const PreparedStats& stats, const VKPlan* plan) {
  json out{{"method", method_name(report.method)},
           {"query", set_to_json(report.query, stats)},
           {"fdp_upper", fraction_to_json(report.fdp_upper)},
           {"true_discoveries_lower", report.true_discoveries_lower}};
  if (report.witness == 0) {
    out["witness"] = nullptr;
  } else if (plan) {
    out["witness"] = {{"index", report.witness}, {"v", plan->v[report.witness - 1]}, {"k", plan->k[report.witness - 1]}};
  } else {
    out["witness"] = {{"index", report.witness}};
  }
  // Bounds without a plan (KR) hold exactly at level alpha.
  out["certificate"] = plan ? plan_to_json(*plan)["certificate"] : json{{"exact", true}};
  return out;
}

json ct_outcome_to_json(const CTOutcome& outcome, const PreparedStats& stats, const std::string& label) {
  const auto size = static_cast<int>(outcome.query.size());
  json out{{"method", label},
           {"query", set_to_json(outcome.query, stats)},
           {"t_bound", outcome.t_bound},
           {"fdp_upper", fraction_to_json(outcome.fdp_upper)},
           {"true_discoveries_lower", size - outcome.t_bound}};
  if (outcome.witness_t > 0) {
    out["witness"] = {{"t", outcome.witness_t}, {"r", outcome.witness_r}};
  } else {
    out["witness"] = nullptr;
  }
  return out;
}

}  // namespace kfdp
