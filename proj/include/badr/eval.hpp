#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "badr/baselines.hpp"
#include "badr/parallel.hpp"

namespace badr {

// Fraction of rows with sign(<w,x>) == y, where sign(0) = +1.
inline double accuracy(const Vector& w, const Dataset& ds) {
  if (ds.task != Task::classification) throw Error("accuracy needs a classification task");
  detail::check_dims(w, ds);
  Index correct = 0;
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    const double label = ds.X.row(i).dot(w) >= 0.0 ? 1.0 : -1.0;
    if (label == ds.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.n());
}

inline double rmse(const Vector& w, const Dataset& ds) {
  if (ds.task != Task::regression) throw Error("rmse needs a regression task");
  detail::check_dims(w, ds);
  return std::sqrt((ds.y - ds.X * w).squaredNorm() / static_cast<double>(ds.n()));
}

inline Vector group_losses(const Problem& p, const Vector& w) {
  Vector out(static_cast<Eigen::Index>(p.num_groups()));
  for (Index a = 0; a < p.num_groups(); ++a) out[static_cast<Eigen::Index>(a)] = group_loss(p.model, w, p.ds(), a);
  return out;
}

// True for point i when some j is no worse than i + slack in every coordinate
// and better than i - slack in at least one.
inline std::vector<bool> dominance_flags(const std::vector<Vector>& points, double slack = 1e-6) {
  for (const auto& pt : points)
    if (pt.size() != points.front().size()) throw Error("dominance_flags: points have different lengths");
  std::vector<bool> flags(points.size(), false);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < points.size() && !flags[i]; ++j) {
      if (i == j) continue;
      bool no_worse = true;
      bool better = false;
      for (Eigen::Index a = 0; a < points[i].size(); ++a) {
        if (points[j][a] > points[i][a] + slack) no_worse = false;
        if (points[j][a] < points[i][a] - slack) better = true;
      }
      flags[i] = no_worse && better;
    }
  return flags;
}

// Does any point of `candidates` dominate `point`?
inline bool dominated_by_any(const Vector& point, const std::vector<Vector>& candidates, double slack = 1e-6) {
  std::vector<Vector> pts{point};
  for (const auto& c : candidates) {
    pts.resize(1);
    pts.push_back(c);
    if (dominance_flags(pts, slack)[0]) return true;
  }
  return false;
}

// Points of the simplex visited by a scan: the uniform grid for S = 2 and the
// barycentric triangle grid for S = 3 (both with `resolution` points per edge),
// otherwise `resolution` Halton points mapped onto the simplex.
inline std::vector<Vector> simplex_grid(Index S, Index resolution) {
  if (resolution < 2 && S > 1) throw Error("scan resolution must be >= 2");
  std::vector<Vector> out;
  const double steps = static_cast<double>(resolution - 1);
  if (S == 1) {
    out.push_back(Vector::Ones(1));
  } else if (S == 2) {
    for (Index k = 0; k < resolution; ++k) {
      Vector l(2);
      l[0] = static_cast<double>(k) / steps;
      l[1] = 1.0 - l[0];
      out.push_back(l);
    }
  } else if (S == 3) {
    for (Index i = 0; i < resolution; ++i)
      for (Index j = 0; i + j < resolution; ++j) {
        Vector l(3);
        l[0] = static_cast<double>(i) / steps;
        l[1] = static_cast<double>(j) / steps;
        l[2] = static_cast<double>(resolution - 1 - i - j) / steps;
        out.push_back(l);
      }
  } else {
    static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61,
                                 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151};
    if (S > std::size(primes)) throw Error("Halton scan supports at most 36 groups");
    for (Index k = 1; k <= resolution; ++k) {
      Vector l(static_cast<Eigen::Index>(S));
      for (Index a = 0; a < S; ++a) {
        double f = 1.0, h = 0.0;
        for (Index m = k; m > 0; m /= static_cast<Index>(primes[a])) {
          f /= primes[a];
          h += f * static_cast<double>(m % static_cast<Index>(primes[a]));
        }
        l[static_cast<Eigen::Index>(a)] = -std::log(h);  // exponential spacings -> uniform on the simplex
      }
      out.push_back(l / l.sum());
    }
  }
  return out;
}

struct ScanRow {
  Vector lambda;
  std::optional<Vector> losses;  // empty when the lower-level solve failed
  double fairness = std::nan("");
};

inline constexpr double kScanTol = 1e-8;

// Solves the lower level at every grid point and records group losses and the
// metric. Scans warm-start along grid order unless warm_start is false, in
// which case every point is solved from zero, rows are order-independent and
// up to `threads` workers share the grid.
inline std::vector<ScanRow> pareto_scan(const Problem& p, Index resolution, bool warm_start = true,
                                        double tol = kScanTol, unsigned threads = 1) {
  const auto grid = simplex_grid(p.num_groups(), resolution);
  std::vector<ScanRow> rows(grid.size());
  std::optional<Vector> warm;
  auto solve = [&](Index k) {
    ScanRow row{grid[k], std::nullopt, std::nan("")};
    try {
      const auto sol = solve_lower(p, grid[k], tol, 100000, warm_start ? warm : std::nullopt);
      row.losses = group_losses(p, sol.w);
      row.fairness = metric_value(p.metric, sol.w, p.ds());
      if (warm_start) warm = sol.w;
    } catch (const NumericError&) {
    }
    rows[k] = std::move(row);
  };
  if (warm_start)
    for (Index k = 0; k < grid.size(); ++k) solve(k);
  else
    parallel_for(grid.size(), threads, solve);
  return rows;
}

inline std::vector<Vector> scan_losses(const std::vector<ScanRow>& rows) {
  std::vector<Vector> out;
  for (const auto& r : rows)
    if (r.losses) out.push_back(*r.losses);
  return out;
}

inline double scan_min_fairness(const std::vector<ScanRow>& rows) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rows)
    if (r.losses) best = std::min(best, r.fairness);
  return best;
}

struct StrategyResult {
  std::string name;
  Vector lambda;
  Vector w;
  std::string error;  // non-empty when the strategy failed
};

struct StrategyRow {
  std::string name;
  std::vector<double> lambda;
  double train_fairness = 0.0;
  double test_fairness = 0.0;
  double train_score = 0.0;
  double test_score = 0.0;
  std::vector<double> group_losses;
  std::vector<double> test_group_losses;
  bool dominated = false;
  std::string error;
};

struct EvalReport {
  std::string task;
  std::string loss;
  std::string metric;
  std::string score;  // "accuracy" or "rmse"
  std::vector<StrategyRow> rows;
};

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double score(const Vector& w, const Dataset& ds) {
  return ds.task == Task::classification ? accuracy(w, ds) : rmse(w, ds);
}

// Scores every strategy on train and test and flags the ones dominated (on
// train group losses) within the set of successful strategies.
inline EvalReport report(const Problem& train, const std::vector<StrategyResult>& results, const Problem& test,
                         double slack = 1e-6) {
  EvalReport out;
  out.task = to_string(train.ds().task);
  out.loss = to_string(train.model.kind);
  out.metric = to_string(train.metric.kind);
  out.score = train.ds().task == Task::classification ? "accuracy" : "rmse";
  std::vector<Vector> losses;
  std::vector<std::size_t> ok_rows;
  for (const auto& r : results) {
    StrategyRow row;
    row.name = r.name;
    row.error = r.error;
    if (r.error.empty()) {
      row.lambda = to_std(r.lambda);
      row.train_fairness = metric_value(train.metric, r.w, train.ds());
      row.test_fairness = metric_value(test.metric, r.w, test.ds());
      row.train_score = score(r.w, train.ds());
      row.test_score = score(r.w, test.ds());
      const Vector gl = group_losses(train, r.w);
      row.group_losses = to_std(gl);
      row.test_group_losses = to_std(group_losses(test, r.w));
      losses.push_back(gl);
      ok_rows.push_back(out.rows.size());
    }
    out.rows.push_back(std::move(row));
  }
  const auto flags = dominance_flags(losses, slack);
  for (std::size_t k = 0; k < ok_rows.size(); ++k) out.rows[ok_rows[k]].dominated = flags[k];
  return out;
}

inline void to_json(nlohmann::json& j, const StrategyRow& r) {
  j = nlohmann::json{{"name", r.name},
                     {"lambda", r.lambda},
                     {"train_fairness", r.train_fairness},
                     {"test_fairness", r.test_fairness},
                     {"train_score", r.train_score},
                     {"test_score", r.test_score},
                     {"group_losses", r.group_losses},
                     {"test_group_losses", r.test_group_losses},
                     {"dominated", r.dominated},
                     {"error", r.error}};
}

inline void from_json(const nlohmann::json& j, StrategyRow& r) {
  j.at("name").get_to(r.name);
  j.at("lambda").get_to(r.lambda);
  j.at("train_fairness").get_to(r.train_fairness);
  j.at("test_fairness").get_to(r.test_fairness);
  j.at("train_score").get_to(r.train_score);
  j.at("test_score").get_to(r.test_score);
  j.at("group_losses").get_to(r.group_losses);
  j.at("test_group_losses").get_to(r.test_group_losses);
  j.at("dominated").get_to(r.dominated);
  j.at("error").get_to(r.error);
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"task", r.task}, {"loss", r.loss}, {"metric", r.metric}, {"score", r.score}, {"strategies", r.rows}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  j.at("task").get_to(r.task);
  j.at("loss").get_to(r.loss);
  j.at("metric").get_to(r.metric);
  j.at("score").get_to(r.score);
  j.at("strategies").get_to(r.rows);
}

// Shortest decimal text that reads back to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// Columns: lambda_0..lambda_{S-1}, F_0..F_{S-1}, fairness. Failed rows leave the
// loss and fairness cells empty.
inline void write_scan_csv(std::ostream& os, const std::vector<ScanRow>& rows, Index S) {
  for (Index a = 0; a < S; ++a) os << "lambda_" << a << ',';
  for (Index a = 0; a < S; ++a) os << "F_" << a << ',';
  os << "fairness\n";
  for (const auto& r : rows) {
    for (Eigen::Index a = 0; a < r.lambda.size(); ++a) os << fmt(r.lambda[a]) << ',';
    for (Index a = 0; a < S; ++a) os << (r.losses ? fmt((*r.losses)[static_cast<Eigen::Index>(a)]) : "") << ',';
    os << (r.losses ? fmt(r.fairness) : "") << '\n';
  }
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, Index S) {
  os << "t,fairness,grad_norm,stationarity,dual_norm";
  for (Index a = 0; a < S; ++a) os << ",F_" << a;
  for (Index a = 0; a < S; ++a) os << ",lambda_" << a;
  os << '\n';
  for (const auto& pt : traj) {
    os << pt.t << ',' << fmt(pt.fairness) << ',' << fmt(pt.grad_norm) << ',' << fmt(pt.stationarity) << ','
       << fmt(pt.dual_norm);
    for (Eigen::Index a = 0; a < pt.group_losses.size(); ++a) os << ',' << fmt(pt.group_losses[a]);
    for (Eigen::Index a = 0; a < pt.lambda.size(); ++a) os << ',' << fmt(pt.lambda[a]);
    os << '\n';
  }
}

}  // namespace badr
