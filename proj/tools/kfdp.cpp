// kfdp: command-line front end for calibration, bounds, closed testing,
// simulation and the query service.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "kfdp/bounds.hpp"
#include "kfdp/closed_testing.hpp"
#include "kfdp/error.hpp"
#include "kfdp/io.hpp"
#include "kfdp/selftest.hpp"
#include "kfdp/service.hpp"
#include "kfdp/simulation.hpp"

using namespace kfdp;

namespace {

// Exit codes: 1 for errors, 2 for a plan/stats horizon mismatch, 3 when the
// brute-force cross-check disagrees with the shortcut.
constexpr int exit_error = 1;
constexpr int exit_plan_mismatch = 2;
constexpr int exit_oracle_mismatch = 3;
constexpr int exit_usage = 64;

struct StatsOptions {
  std::string path;
  std::string tie_break = "stable";
  std::uint64_t tie_seed = 0;
  bool has_tie_seed = false;
};

PreparedStats load_prepared(const StatsOptions& o) {
  const RawStats raw = load_stats_file(o.path);
  if (o.tie_break == "seeded_random") {
    return prepare(raw, TieBreak::seeded_random,
                   o.has_tie_seed ? std::optional<std::uint64_t>(o.tie_seed) : std::nullopt);
  }
  return prepare(raw, TieBreak::stable_by_input_order);
}

void add_stats_options(CLI::App* cmd, StatsOptions& o) {
  cmd->add_option("--stats", o.path, "W vector: CSV with header id,w or JSON [{id, w}]")->required();
  cmd->add_option("--tie-break", o.tie_break, "stable or seeded_random")
      ->check(CLI::IsMember({"stable", "seeded_random"}));
  cmd->add_option_function<std::uint64_t>(
      "--tie-seed", [&o](std::uint64_t s) { o.tie_seed = s, o.has_tie_seed = true; }, "seed for seeded_random ties");
}

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error(ErrorCode::invalid_input, "cannot write '" + path + "'");
  return file;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char ch : text + ",") {
    if (ch == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (ch != ' ') {
      item += ch;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous FDP bounds for knockoff statistics"};
  app.require_subcommand(1);

  // calibrate
  std::string cal_family = "B", cal_out;
  double cal_alpha = 0.05, cal_delta = 0.01;
  int cal_p = 0, cal_cap = 0, cal_k = 0;
  long cal_nsim = 100000;
  std::uint64_t cal_seed = 7;
  bool cal_trace = false;
  auto* calibrate = app.add_subcommand("calibrate", "compute a (v, k) plan");
  calibrate->add_option("--family", cal_family, "A, B, C, D or js")
      ->check(CLI::IsMember({"A", "B", "C", "D", "a", "b", "c", "d", "js", "JS"}));
  calibrate->add_option("--alpha", cal_alpha)->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--p", cal_p, "number of statistics (plan horizon)")->required()->check(CLI::PositiveNumber);
  calibrate->add_option("--cap", cal_cap, "exclusive upper bound on v_i (default min(150, p))");
  calibrate->add_option("--delta", cal_delta, "step-1 decrement of c(alpha)");
  calibrate->add_option("--nsim", cal_nsim, "Monte-Carlo paths")->check(CLI::PositiveNumber);
  calibrate->add_option("--seed", cal_seed);
  calibrate->add_option("--k", cal_k, "k for the js family");
  calibrate->add_option("--out", cal_out, "output file (default stdout)");
  calibrate->add_flag("--trace", cal_trace, "print raw/step1/step2 probabilities to stderr");

  // bound
  StatsOptions bound_stats;
  std::string bound_method = "kji", bound_plan, bound_set;
  double bound_alpha = 0.05;
  int bound_k = 0;
  auto* bound = app.add_subcommand("bound", "FDP bounds (JS, KJI, KR) for sets of ids");
  bound->add_option("--method", bound_method)->check(CLI::IsMember({"js", "kji", "kr"}));
  bound->add_option("--plan", bound_plan, "plan JSON (kji)");
  add_stats_options(bound, bound_stats);
  bound->add_option("--set", bound_set, "file with one set of ids per line")->required();
  bound->add_option("--alpha", bound_alpha)->check(CLI::Range(0.0, 1.0));
  bound->add_option("--k", bound_k, "k for js");

  // ct-bound
  StatsOptions ct_stats;
  std::string ct_family = "indicator", ct_vfamily = "B", ct_set;
  double ct_alpha = 0.05, ct_delta = 0.01;
  int ct_cap = 0;
  long ct_nsim = 100000;
  std::uint64_t ct_seed = 7;
  bool ct_oracle = false;
  auto* ct = app.add_subcommand("ct-bound", "closed-testing (KCT) bounds for sets of ids");
  ct->add_option("--family", ct_family, "indicator or rank")->check(CLI::IsMember({"indicator", "rank"}));
  ct->add_option("--v-family", ct_vfamily)->check(CLI::IsMember({"A", "B", "C", "D", "a", "b", "c", "d"}));
  ct->add_option("--cap", ct_cap, "exclusive upper bound on v_i (default p)");
  ct->add_option("--alpha", ct_alpha)->check(CLI::Range(0.0, 1.0));
  ct->add_option("--delta", ct_delta);
  ct->add_option("--nsim", ct_nsim)->check(CLI::PositiveNumber);
  ct->add_option("--seed", ct_seed);
  add_stats_options(ct, ct_stats);
  ct->add_option("--set", ct_set, "file with one set of ids per line")->required();
  ct->add_flag("--oracle", ct_oracle, "cross-check against brute force (p <= 14)");

  // simulate
  std::string sim_scenario = "direct", sim_nulls = "10:20", sim_methods = "kji-b,kct-b,kr", sim_out,
              sim_experiment = "comparison";
  int sim_p = 50, sim_cap = 0, sim_random = 100;
  long sim_reps = 200, sim_nsim = 100000;
  std::uint64_t sim_seed = 7, sim_pool_seed = 7;
  double sim_alpha = 0.05, sim_delta = 0.01;
  auto* simulate = app.add_subcommand("simulate", "direct-W experiments");
  simulate->add_option("--scenario", sim_scenario, "direct or global-null")
      ->check(CLI::IsMember({"direct", "global-null"}));
  simulate->add_option("--p", sim_p)->check(CLI::PositiveNumber);
  simulate->add_option("--nulls", sim_nulls, "null positions, e.g. 10:20 (direct scenario)");
  simulate->add_option("--methods", sim_methods, "comma list: js-<k>, kr, kji-{a..d}, kct-{a..d}, kct-rank-{a..d}");
  simulate->add_option("--reps", sim_reps)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed, "replication seed");
  simulate->add_option("--pool-seed", sim_pool_seed, "Monte-Carlo pool seed");
  simulate->add_option("--nsim", sim_nsim)->check(CLI::PositiveNumber);
  simulate->add_option("--alpha", sim_alpha)->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--delta", sim_delta);
  simulate->add_option("--cap", sim_cap, "exclusive upper bound on v_i (default p)");
  simulate->add_option("--experiment", sim_experiment, "comparison or coverage")
      ->check(CLI::IsMember({"comparison", "coverage"}));
  simulate->add_option("--random-subsets", sim_random, "random queries per replication (coverage)");
  simulate->add_option("--out", sim_out, "CSV output (default stdout)");

  // serve
  std::string serve_host = "127.0.0.1", serve_dir;
  int serve_port = 8080;
  long serve_nsim = 100000;
  std::uint64_t serve_seed = 7;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP/JSON query service");
  serve_cmd->add_option("--host", serve_host);
  serve_cmd->add_option("--port", serve_port)->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--data-dir", serve_dir, "directory for file uploads")->envname(data_dir_env);
  serve_cmd->add_option("--nsim", serve_nsim)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--seed", serve_seed);

  // selftest
  int self_p = 10, self_draws = 5;
  std::uint64_t self_seed = 1;
  auto* selftest = app.add_subcommand("selftest", "small-p oracle equality suite");
  selftest->add_option("--p", self_p)->check(CLI::Range(2, 12));
  selftest->add_option("--draws", self_draws)->check(CLI::PositiveNumber);
  selftest->add_option("--seed", self_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version report success; every other parse failure is a usage error.
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  try {
    if (*calibrate) {
      VKPlan plan;
      if (cal_family == "js" || cal_family == "JS") {
        if (cal_k < 1) throw Error(ErrorCode::invalid_input, "--k is required for the js family");
        plan = js_plan(cal_k, cal_alpha, cal_p);
      } else {
        const SignPathPool pool(cal_nsim, cal_p, cal_seed);
        const auto v = v_family({parse_vkind(cal_family), cal_cap > 0 ? cal_cap : std::max(2, std::min(150, cal_p)), {}});
        const auto trace = two_step_trace(v, cal_alpha, cal_delta, cal_p, pool);
        plan = two_step_k(v, cal_alpha, cal_delta, cal_p, pool);
        plan.family = vkind_name(parse_vkind(cal_family));
        if (cal_trace) {
          std::cerr << "m=" << v.size() << " raw=" << trace.prob_raw << " step1=" << trace.prob_step1
                    << " (N=" << trace.step1_n << ") step2=" << trace.prob_step2
                    << (trace.clamp_bound ? " clamp" : "") << "\n";
        }
      }
      std::ofstream file;
      output(cal_out, file) << plan_to_json(plan).dump(2) << "\n";
      return 0;
    }

    if (*bound) {
      const PreparedStats stats = load_prepared(bound_stats);
      std::optional<VKPlan> plan;
      if (bound_method == "kji") {
        if (bound_plan.empty()) throw Error(ErrorCode::invalid_input, "--plan is required for kji");
        plan = load_plan_file(bound_plan);
      } else if (bound_method == "js") {
        if (bound_k < 1) throw Error(ErrorCode::invalid_input, "--k is required for js");
        plan = js_plan(bound_k, bound_alpha, stats.p());
      }
      std::unique_ptr<KjiEvaluator> kji;
      std::unique_ptr<KrEvaluator> kr;
      if (plan) {
        kji = std::make_unique<KjiEvaluator>(stats, *plan);
      } else {
        kr = std::make_unique<KrEvaluator>(stats, bound_alpha);
      }
      for (const auto& ids : load_id_sets(bound_set)) {
        const IndexSet R = stats.resolve(ids);
        BoundReport report = kji ? (*kji)(R) : (*kr)(R);
        if (bound_method == "js") report.method = BoundMethod::js;
        std::cout << report_to_json(report, stats, plan ? &*plan : nullptr).dump() << "\n";
      }
      return 0;
    }

    if (*ct) {
      const PreparedStats stats = load_prepared(ct_stats);
      const int cap = ct_cap > 0 ? ct_cap : stats.p();
      auto pool = std::make_shared<SignPathPool>(ct_nsim, stats.p(), ct_seed);
      const KctCalibration calibration(v_family({parse_vkind(ct_vfamily), std::max(cap, 2), {}}), ct_alpha,
                                       ct_delta, stats.p(), pool);
      const auto family = parse_weight_family(ct_family);
      const auto spec = calibration.spec(family);
      const ShortcutEvaluator evaluator(stats, spec);
      std::unique_ptr<BruteForceClosedTesting> oracle;
      if (ct_oracle) {
        if (stats.p() <= BruteForceClosedTesting::max_p) {
          oracle = std::make_unique<BruteForceClosedTesting>(stats, spec);
        } else {
          std::cerr << "warning: p=" << stats.p() << " exceeds the brute-force limit; --oracle skipped\n";
        }
      }
      bool mismatch = false;
      for (const auto& ids : load_id_sets(ct_set)) {
        const IndexSet R = stats.resolve(ids);
        const CTOutcome outcome = evaluator(R);
        json out = ct_outcome_to_json(outcome, stats, family == WeightFamily::rank ? "KCT-rank" : "KCT");
        out["certificate"] = plan_to_json(calibration.base_plan())["certificate"];
        if (oracle) {
          const int exact = (*oracle)(R).t_bound;
          out["oracle"] = {{"t_bound", exact}, {"agrees", exact == outcome.t_bound}};
          mismatch = mismatch || exact != outcome.t_bound;
        }
        std::cout << out.dump() << "\n";
      }
      if (mismatch) {
        std::cerr << "error: shortcut and brute-force closed testing disagree\n";
        return exit_oracle_mismatch;
      }
      return 0;
    }

    if (*simulate) {
      const IndexSet nulls = sim_scenario == "global-null" ? parse_positions("1:" + std::to_string(sim_p))
                                                           : parse_positions(sim_nulls);
      MethodOptions options;
      options.alpha = sim_alpha;
      options.delta = sim_delta;
      options.nsim = sim_nsim;
      options.pool_seed = sim_pool_seed;
      options.v_cap = sim_cap;
      const auto methods = make_methods(split_list(sim_methods), sim_p, options);
      const auto generator = direct_w_generator(sim_p, nulls);
      std::ofstream file;
      auto& out = output(sim_out, file);
      if (sim_experiment == "coverage") {
        write_csv(out, coverage_experiment(generator, methods, sim_reps, sim_alpha, nested_plus_random(sim_random),
                                           sim_seed));
      } else {
        write_csv(out, comparison_experiment(generator, methods, sim_reps, sim_seed));
      }
      return 0;
    }

    if (*serve_cmd) {
      ServiceOptions options;
      options.data_dir = serve_dir.empty() ? "." : serve_dir;
      options.nsim = serve_nsim;
      options.pool_seed = serve_seed;
      Service service(options);
      std::cerr << "listening on " << serve_host << ":" << serve_port << "\n";
      serve(service, serve_host, serve_port);
      return 0;
    }

    if (*selftest) {
      const auto report = run_selftest(self_p, self_draws, self_seed, &std::cout);
      return report.ok() ? 0 : exit_error;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::plan_mismatch ? exit_plan_mismatch : exit_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_error;
  }
  return 0;
}
