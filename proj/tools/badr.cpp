// badr: fit, compare, scan and check from one JSON config.
//
//   badr fit|compare|scan|check --config <path> [--out <dir>] [--seed <int>]
//
// Exit codes: 0 success, 1 numeric failure, 2 usage or config error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "badr/check.hpp"
#include "badr/config.hpp"
#include "badr/eval.hpp"

namespace fs = std::filesystem;
using namespace badr;

namespace {

constexpr int kOk = 0;
constexpr int kNumeric = 1;
constexpr int kUsage = 2;

unsigned worker_count() {
  const char* env = std::getenv("BADR_THREADS");
  if (!env || !*env) return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw Error("BADR_THREADS must be a positive integer, got '" + std::string(env) + "'");
  return static_cast<unsigned>(v);
}

struct Solved {
  Vector lambda;
  Vector w;
  Trajectory trajectory;
  nlohmann::json info;
};

// Runs the configured solver; single-loop results are refit at the final lambda.
Solved solve(const Config& c, const Problem& p) {
  Solved out;
  const auto& s = c.solver;
  out.info["name"] = s.name;
  if (s.name == "badr-gd" || s.name == "badr-sgd") {
    const BadrConfig cfg = badr_config(c, p);
    auto run_out = run(p, cfg);
    const auto refit = fit_weights(p, run_out.state.lambda);
    out.lambda = refit.lambda;
    out.w = refit.w;
    out.trajectory = std::move(run_out.trajectory);
    out.info["tau"] = cfg.tau;
    out.info["rho_dual"] = cfg.rho_dual;
    out.info["gamma"] = cfg.gamma;
    out.info["iters"] = cfg.iters;
    if (cfg.variant == BadrVariant::sgd) {
      out.info["batch"] = cfg.batch;
      out.info["clip_threshold"] = cfg.clip_threshold;
      out.info["seed"] = cfg.seed;
    }
    out.info["iterate_fairness"] = metric_value(p.metric, run_out.state.w, p.ds());
  } else {
    TwoLoopConfig cfg;
    cfg.max_iter = s.max_iter;
    cfg.gap_tol = s.gap_tol;
    cfg.f_tol = s.f_tol;
    cfg.lower_tol = s.lower_tol;
    auto res = s.name == "frank-wolfe" ? frank_wolfe(p, cfg) : projected_gradient(p, cfg);
    out.lambda = res.lambda;
    out.w = res.w;
    out.trajectory = std::move(res.trajectory);
    out.info["iterations"] = res.iterations;
    out.info["converged"] = res.converged;
  }
  out.info["fairness"] = metric_value(p.metric, out.w, p.ds());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

template <typename Writer>
void write_stream(const fs::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_text(path, os.str());
}

fs::path prepare_out(const Config& c) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_weights(const fs::path& path, const Problem& p, const Vector& lambda, const Vector& w) {
  write_stream(path, [&](std::ostream& os) {
    os << "kind,index,name,value\n";
    const auto& ds = p.ds();
    for (Eigen::Index a = 0; a < lambda.size(); ++a)
      os << "lambda," << a << ',' << (static_cast<std::size_t>(a) < ds.group_names.size() ? ds.group_names[a] : "")
         << ',' << fmt(lambda[a]) << '\n';
    for (Eigen::Index j = 0; j < w.size(); ++j)
      os << "w," << j << ',' << (static_cast<std::size_t>(j) < ds.feature_names.size() ? ds.feature_names[j] : "")
         << ',' << fmt(w[j]) << '\n';
  });
}

nlohmann::json problem_info(const Problem& train, const Problem& test) {
  std::vector<Index> sizes;
  for (Index a = 0; a < train.num_groups(); ++a) sizes.push_back(train.ds().group_size(a));
  return {{"groups", train.num_groups()},   {"group_names", train.ds().group_names},
          {"train_group_sizes", sizes},      {"n_train", train.ds().n()},
          {"n_test", test.ds().n()},         {"dim", train.dim()},
          {"smoothness", train.smoothness}};
}

int cmd_fit(const Config& c) {
  auto [train, test] = build_problems(c);
  const fs::path dir = prepare_out(c);
  const Index S = train.num_groups();
  Solved solved;
  try {
    solved = solve(c, train);
  } catch (const SolverFailure& e) {
    write_stream(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, e.partial(), S); });
    throw;
  }
  const auto rep = report(train, {{c.solver.name, solved.lambda, solved.w, ""}}, test, c.eval.slack);
  nlohmann::json j{{"command", "fit"}, {"problem", problem_info(train, test)}, {"solver", solved.info}, {"report", rep}};
  write_text(dir / "report.json", j.dump(2) + "\n");
  write_stream(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, solved.trajectory, S); });
  write_weights(dir / "weights.csv", train, solved.lambda, solved.w);
  std::printf("%s: train fairness %s, test fairness %s, lambda [", c.solver.name.c_str(),
              fmt(rep.rows[0].train_fairness).c_str(), fmt(rep.rows[0].test_fairness).c_str());
  for (Eigen::Index a = 0; a < solved.lambda.size(); ++a) std::printf("%s%s", a ? " " : "", fmt(solved.lambda[a]).c_str());
  std::printf("]\nwrote %s\n", dir.string().c_str());
  return kOk;
}

int cmd_compare(const Config& c) {
  auto [train, test] = build_problems(c);
  const fs::path dir = prepare_out(c);
  const std::vector<std::string> names{c.solver.name, "uniform", "balanced", "one-group", "minimax"};
  std::vector<StrategyResult> results(names.size());
  std::vector<nlohmann::json> infos(names.size(), nlohmann::json::object());
  parallel_for(names.size(), worker_count(), [&](Index k) {
    StrategyResult& r = results[k];
    r.name = names[k];
    try {
      WeightedFit fit;
      if (k == 0) {
        auto solved = solve(c, train);
        fit = {solved.lambda, solved.w};
        infos[k] = solved.info;
      } else if (names[k] == "uniform") {
        fit = uniform_fit(train);
      } else if (names[k] == "balanced") {
        fit = balanced_fit(train);
      } else if (names[k] == "one-group") {
        fit = one_group_fit(train);
      } else {
        fit = minimax_fit(train, MinimaxConfig{c.solver.minimax_iters, c.solver.minimax_step});
      }
      r.lambda = fit.lambda;
      r.w = fit.w;
    } catch (const NumericError& e) {
      // A numeric failure of one strategy is reported in its row; config errors propagate.
      r.error = e.what();
    }
  });
  const auto rep = report(train, results, test, c.eval.slack);
  nlohmann::json j{{"command", "compare"}, {"problem", problem_info(train, test)}, {"solver", infos[0]}, {"report", rep}};
  write_text(dir / "report.json", j.dump(2) + "\n");
  const Index S = train.num_groups();
  write_stream(dir / "compare.csv", [&](std::ostream& os) {
    os << "strategy";
    for (Index a = 0; a < S; ++a) os << ",lambda_" << a;
    os << ",train_fairness,test_fairness,train_" << rep.score << ",test_" << rep.score << ",dominated,error\n";
    for (const auto& row : rep.rows) {
      os << row.name;
      for (Index a = 0; a < S; ++a) os << ',' << (row.error.empty() ? fmt(row.lambda[a]) : "");
      if (row.error.empty())
        os << ',' << fmt(row.train_fairness) << ',' << fmt(row.test_fairness) << ',' << fmt(row.train_score) << ','
           << fmt(row.test_score) << ',' << (row.dominated ? "true" : "false") << ",\n";
      else
        os << ",,,,,,\"" << row.error << "\"\n";
    }
  });
  std::printf("%-20s %16s %16s %12s %s\n", "strategy", "train_fairness", "test_fairness", ("test_" + rep.score).c_str(),
              "dominated");
  for (const auto& row : rep.rows) {
    if (!row.error.empty()) {
      std::printf("%-20s failed: %s\n", row.name.c_str(), row.error.c_str());
      continue;
    }
    std::printf("%-20s %16.8g %16.8g %12.6g %s\n", row.name.c_str(), row.train_fairness, row.test_fairness,
                row.test_score, row.dominated ? "yes" : "no");
  }
  std::printf("wrote %s\n", dir.string().c_str());
  return kOk;
}

int cmd_scan(const Config& c) {
  auto [train, test] = build_problems(c);
  const Index S = train.num_groups();
  if (S > 3 && !c.eval.scan_sample)
    throw Error("config: eval.scan_sample: dense scans support 2 or 3 groups; set scan_sample to true for " +
                std::to_string(S) + " groups");
  const fs::path dir = prepare_out(c);
  // Cold starts keep every row independent of the worker count.
  const auto rows = pareto_scan(train, c.eval.scan_resolution, false, kScanTol, worker_count());
  write_stream(dir / "scan.csv", [&](std::ostream& os) { write_scan_csv(os, rows, S); });
  Index failed = 0;
  for (const auto& r : rows) failed += r.losses ? 0 : 1;
  std::printf("%zu grid points (%zu failed), min fairness %s\nwrote %s\n", rows.size(), failed,
              fmt(scan_min_fairness(rows)).c_str(), (dir / "scan.csv").string().c_str());
  return kOk;
}

int cmd_check(std::optional<std::uint64_t> seed) {
  CheckOptions opt;
  if (seed) opt.seed = *seed;
  if (const char* env = std::getenv("BADR_CHECK_CORRUPT"); env && *env) opt.corrupt = parse_metric(env);
  const auto rows = run_checks(opt);
  std::printf("%-28s %8s %12s %10s  %s\n", "check", "cases", "worst_error", "tolerance", "status");
  const CheckRow* worst_failure = nullptr;
  for (const auto& r : rows) {
    std::printf("%-28s %8zu %12.3e %10.0e  %s\n", r.name.c_str(), r.cases, r.worst, r.tol, r.passed() ? "PASS" : "FAIL");
    if (!r.passed() && (!worst_failure || r.worst / r.tol > worst_failure->worst / worst_failure->tol))
      worst_failure = &r;
  }
  if (!worst_failure) {
    std::printf("all %zu checks passed\n", rows.size());
    return kOk;
  }
  std::fprintf(stderr, "check failed:");
  for (const auto& r : rows)
    if (!r.passed()) std::fprintf(stderr, " %s", r.name.c_str());
  std::fprintf(stderr, "\nworst: %s with relative error %.3e (tolerance %.0e)\n", worst_failure->name.c_str(),
               worst_failure->worst, worst_failure->tol);
  return kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair learning by bilevel adaptive rescalarization"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "JSON config file");
    if (config_required) opt->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "seed for the solver and the train/test split");
  };
  auto* fit = app.add_subcommand("fit", "run one solver and write report.json, trajectory.csv, weights.csv");
  auto* compare = app.add_subcommand("compare", "run the solver and the four baselines");
  auto* scan = app.add_subcommand("scan", "solve the lower level on a simplex grid and write scan.csv");
  auto* check = app.add_subcommand("check", "run the finite-difference and oracle checks");
  add_common(fit, true);
  add_common(compare, true);
  add_common(scan, true);
  add_common(check, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (check->parsed()) {
      if (!config_path.empty()) load_config(config_path);
      return cmd_check(seed);
    }
    Config c = load_config(config_path);
    if (!out_dir.empty()) c.out_dir = out_dir;
    if (seed) c.solver.seed = c.eval.split_seed = *seed;
    if (fit->parsed()) return cmd_fit(c);
    if (compare->parsed()) return cmd_compare(c);
    return cmd_scan(c);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
}
