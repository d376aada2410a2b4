#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "badr/bilevel.hpp"
#include "badr/problem.hpp"

namespace badr {

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "csv"
  std::string path;                  // csv only; relative to the config file
  std::string target;
  std::vector<std::string> sensitive;
  Task task = Task::classification;
  std::vector<Index> n_per_group{140, 60};
  Index dim = 5;
  double shift = 1.0;
  std::uint64_t seed = 7;
  bool standardize = true;
};

struct SolverConfig {
  std::string name = "badr-gd";
  // Empty means "auto" (see default_stepsizes).
  std::optional<double> tau;
  std::optional<double> rho_dual;
  std::optional<double> gamma;
  double clip_threshold = 1.0;
  Index iters = 2000;
  Index batch = 32;
  std::uint64_t seed = 0;
  Index record_every = 10;
  Index max_iter = 500;
  double gap_tol = 1e-6;
  double f_tol = 1e-5;
  double lower_tol = 1e-10;
  Index minimax_iters = 2000;
  double minimax_step = 0.5;
};

struct EvalConfig {
  std::optional<double> train_frac = 0.7;  // empty: evaluate on the training data
  std::uint64_t split_seed = 0;
  Index scan_resolution = 101;
  bool scan_sample = false;  // allow Halton scans for more than three groups
  double slack = 1e-6;
};

struct Config {
  DataConfig data;
  LossModel model;
  FairnessMetric metric;
  SolverConfig solver;
  EvalConfig eval;
  std::string out_dir = "badr_out";
  std::filesystem::path base_dir;  // directory of the config file
};

inline const std::vector<std::string>& solver_names() {
  static const std::vector<std::string> names{"badr-gd", "badr-sgd", "frank-wolfe", "projected-gradient"};
  return names;
}

namespace detail {

// Typed access to one config section; every error names the offending field.
class Section {
 public:
  Section(const nlohmann::json& root, const std::string& name) : name_(name) {
    if (root.contains(name)) {
      node_ = root.at(name);
      if (!node_.is_object()) fail(name, "must be an object");
    } else {
      node_ = nlohmann::json::object();
    }
  }

  void allow(std::set<std::string> keys) const {
    for (const auto& [key, value] : node_.items())
      if (!keys.count(key)) fail(path(key), "unknown field");
  }

  bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number()) fail(path(key), "expected a number");
    return v.get<double>();
  }

  std::optional<double> number_or_auto(const std::string& key, std::optional<double> fallback) const {
    if (!node_.contains(key)) return fallback;
    const auto& v = node_.at(key);
    if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
    if (!v.is_number()) fail(path(key), "expected a number or \"auto\"");
    return v.get<double>();
  }

  std::optional<double> number_or_null(const std::string& key, std::optional<double> fallback) const {
    if (!node_.contains(key)) return fallback;
    if (node_.at(key).is_null()) return std::nullopt;
    return number(key, 0.0);
  }

  Index count(const std::string& key, Index fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(path(key), "expected a non-negative integer");
    return v.get<Index>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(path(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!node_.at(key).is_boolean()) fail(path(key), "expected true or false");
    return node_.at(key).get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!node_.at(key).is_string()) fail(path(key), "expected a string");
    return node_.at(key).get<std::string>();
  }

  std::vector<std::string> texts(const std::string& key) const {
    if (!has(key)) return {};
    const auto& v = node_.at(key);
    if (!v.is_array()) fail(path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail(path(key), "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::vector<Index> counts(const std::string& key, std::vector<Index> fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_array() || v.empty()) fail(path(key), "expected a non-empty array of integers");
    std::vector<Index> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 0) fail(path(key), "expected a non-empty array of integers");
      out.push_back(e.get<Index>());
    }
    return out;
  }

  // Runs `parse` on a string field, prefixing any error with the field path.
  template <typename F>
  auto parsed(const std::string& key, const std::string& fallback, F&& parse) const {
    const std::string value = text(key, fallback);
    try {
      return parse(value);
    } catch (const Error& e) {
      fail(path(key), e.what());
    }
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw Error("config: " + field + ": " + what);
  }

 private:
  std::string name_;
  nlohmann::json node_;
};

}  // namespace detail

inline Config parse_config(const nlohmann::json& root, const std::filesystem::path& base_dir = {}) {
  if (!root.is_object()) throw Error("config: top level must be a JSON object");
  for (const auto& [key, value] : root.items())
    if (key != "data" && key != "model" && key != "metric" && key != "solver" && key != "eval" && key != "output")
      throw Error("config: " + key + ": unknown section (valid: data, model, metric, solver, eval, output)");
  Config c;
  c.base_dir = base_dir;

  const detail::Section data(root, "data");
  data.allow({"source", "path", "target", "sensitive", "task", "n_per_group", "dim", "shift", "seed", "standardize"});
  c.data.source = data.text("source", c.data.source);
  if (c.data.source != "synthetic" && c.data.source != "csv")
    detail::Section::fail("data.source", "expected \"synthetic\" or \"csv\"");
  c.data.path = data.text("path", "");
  c.data.target = data.text("target", "");
  c.data.sensitive = data.texts("sensitive");
  c.data.task = data.parsed("task", to_string(c.data.task), parse_task);
  c.data.n_per_group = data.counts("n_per_group", c.data.n_per_group);
  c.data.dim = data.count("dim", c.data.dim);
  c.data.shift = data.number("shift", c.data.shift);
  c.data.seed = data.seed("seed", c.data.seed);
  c.data.standardize = data.flag("standardize", c.data.standardize);
  if (c.data.source == "csv") {
    if (c.data.path.empty()) detail::Section::fail("data.path", "required for csv data");
    if (c.data.target.empty()) detail::Section::fail("data.target", "required for csv data");
    if (c.data.sensitive.empty()) detail::Section::fail("data.sensitive", "required for csv data");
  } else {
    if (c.data.dim < 1) detail::Section::fail("data.dim", "must be >= 1");
    for (Index na : c.data.n_per_group)
      if (na < 2) detail::Section::fail("data.n_per_group", "every group needs at least 2 rows");
  }

  const detail::Section model(root, "model");
  model.allow({"loss", "reg"});
  const LossKind default_loss = c.data.task == Task::classification ? LossKind::logistic : LossKind::ridge;
  c.model.kind = model.parsed("loss", to_string(default_loss), parse_loss);
  c.model.reg = model.number("reg", c.model.reg);
  if (!(c.model.reg >= 0.0)) detail::Section::fail("model.reg", "must be >= 0");

  const detail::Section metric(root, "metric");
  metric.allow({"name", "smooth", "if_pair_cap", "if_seed"});
  c.metric.kind = metric.parsed("name", "if", parse_metric);
  c.metric.smooth = metric.number("smooth", c.metric.smooth);
  if (!(c.metric.smooth > 0.0)) detail::Section::fail("metric.smooth", "must be > 0");
  c.metric.if_pair_cap = metric.count("if_pair_cap", c.metric.if_pair_cap);
  c.metric.if_seed = metric.seed("if_seed", c.metric.if_seed);

  const detail::Section solver(root, "solver");
  solver.allow({"name", "tau", "rho_dual", "gamma", "clip_threshold", "iters", "batch", "seed", "record_every",
                "max_iter", "gap_tol", "f_tol", "lower_tol", "minimax_iters", "minimax_step"});
  auto& s = c.solver;
  s.name = solver.text("name", s.name);
  if (std::find(solver_names().begin(), solver_names().end(), s.name) == solver_names().end())
    detail::Section::fail("solver.name", "unknown solver '" + s.name +
                                             "' (valid: badr-gd, badr-sgd, frank-wolfe, projected-gradient)");
  s.tau = solver.number_or_auto("tau", s.tau);
  s.rho_dual = solver.number_or_auto("rho_dual", s.rho_dual);
  s.gamma = solver.number_or_auto("gamma", s.gamma);
  s.clip_threshold = solver.number("clip_threshold", s.clip_threshold);
  s.iters = solver.count("iters", s.iters);
  s.batch = solver.count("batch", s.batch);
  s.seed = solver.seed("seed", s.seed);
  s.record_every = solver.count("record_every", s.record_every);
  s.max_iter = solver.count("max_iter", s.max_iter);
  s.gap_tol = solver.number("gap_tol", s.gap_tol);
  s.f_tol = solver.number("f_tol", s.f_tol);
  s.lower_tol = solver.number("lower_tol", s.lower_tol);
  s.minimax_iters = solver.count("minimax_iters", s.minimax_iters);
  s.minimax_step = solver.number("minimax_step", s.minimax_step);
  if (s.iters < 1) detail::Section::fail("solver.iters", "must be >= 1");
  if (s.max_iter < 1) detail::Section::fail("solver.max_iter", "must be >= 1");
  if (s.record_every < 1) detail::Section::fail("solver.record_every", "must be >= 1");
  for (const auto& [key, value] : {std::pair{"tau", s.tau}, {"rho_dual", s.rho_dual}})
    if (value && !(*value > 0.0)) detail::Section::fail(std::string("solver.") + key, "must be > 0");
  if (s.gamma && !(*s.gamma >= 0.0)) detail::Section::fail("solver.gamma", "must be >= 0");
  if (!(s.clip_threshold > 0.0)) detail::Section::fail("solver.clip_threshold", "must be > 0");
  if (!(s.lower_tol > 0.0)) detail::Section::fail("solver.lower_tol", "must be > 0");

  const detail::Section eval(root, "eval");
  eval.allow({"train_frac", "split_seed", "scan_resolution", "scan_sample", "slack"});
  c.eval.train_frac = eval.number_or_null("train_frac", c.eval.train_frac);
  if (c.eval.train_frac && !(*c.eval.train_frac > 0.0 && *c.eval.train_frac < 1.0))
    detail::Section::fail("eval.train_frac", "must lie in (0, 1) or be null");
  c.eval.split_seed = eval.seed("split_seed", c.eval.split_seed);
  c.eval.scan_resolution = eval.count("scan_resolution", c.eval.scan_resolution);
  c.eval.scan_sample = eval.flag("scan_sample", c.eval.scan_sample);
  c.eval.slack = eval.number("slack", c.eval.slack);
  if (c.eval.scan_resolution < 2) detail::Section::fail("eval.scan_resolution", "must be >= 2");

  const detail::Section output(root, "output");
  output.allow({"dir"});
  c.out_dir = output.text("dir", c.out_dir);
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path.string() + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config: invalid JSON in '" + path.string() + "': " + e.what());
  }
  return parse_config(root, path.parent_path());
}

inline Dataset load_dataset(const Config& c) {
  Dataset ds;
  if (c.data.source == "csv") {
    std::filesystem::path p(c.data.path);
    if (p.is_relative()) p = c.base_dir / p;
    ds = load_csv(p.string(), c.data.target, c.data.sensitive, c.data.task);
  } else {
    ds = synth_biased(c.data.n_per_group, c.data.dim, c.data.shift, c.data.seed, c.data.task);
  }
  return c.data.standardize ? standardize(ds) : ds;
}

// Train and test problems; without a split both are the full data.
inline std::pair<Problem, Problem> build_problems(const Config& c) {
  Dataset ds = load_dataset(c);
  if (!c.eval.train_frac) {
    Problem p = make_problem(std::move(ds), c.model, c.metric);
    return {p, p};
  }
  auto [train, test] = train_test_split(ds, *c.eval.train_frac, c.eval.split_seed);
  Problem p = make_problem(std::move(train), c.model, c.metric);
  return {p, with_data(p, std::move(test))};
}

// Solver settings with every "auto" resolved.
inline BadrConfig badr_config(const Config& c, const Problem& p) {
  BadrConfig cfg;
  const auto& s = c.solver;
  if ((!s.tau || !s.rho_dual || !s.gamma) && !(p.model.reg > 0.0))
    throw Error("automatic stepsizes need strong convexity: set model.reg > 0 or give solver.tau, rho_dual and gamma");
  cfg.tau = s.tau.value_or(1.0 / p.smoothness);
  cfg.rho_dual = s.rho_dual.value_or(1.0 / p.smoothness);
  cfg.gamma = s.gamma ? *s.gamma : default_stepsizes(p).gamma;
  cfg.clip_threshold = s.clip_threshold;
  cfg.iters = s.iters;
  cfg.batch = s.batch;
  cfg.seed = s.seed;
  cfg.record_every = s.record_every;
  cfg.variant = s.name == "badr-sgd" ? BadrVariant::sgd : BadrVariant::gd;
  return cfg;
}

}  // namespace badr
