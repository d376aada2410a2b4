#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "badr/core.hpp"
#include "badr/random.hpp"

namespace badr {

enum class Task { classification, regression };

inline std::string to_string(Task t) {
  return t == Task::classification ? "classification" : "regression";
}

inline Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw Error("unknown task '" + s + "' (expected classification|regression)");
}

// Tabular data with one sensitive-group label per row.
//
// Invariants: group_index partitions {0..n-1}; every group is non-empty;
// classification targets are exactly +-1.
struct Dataset {
  Matrix X;
  Vector y;
  std::vector<int> groups;
  GroupRows group_index;
  Task task = Task::classification;
  // Human-readable name of each group (the crossed sensitive values).
  std::vector<std::string> group_names;
  std::vector<std::string> feature_names;

  Index n() const { return static_cast<Index>(X.rows()); }
  Index d() const { return static_cast<Index>(X.cols()); }
  Index num_groups() const { return group_index.size(); }
  Index group_size(Index a) const { return group_index.at(a).size(); }
};

// Rebuilds group_index from the label vector; labels must cover 0..S-1.
inline GroupRows index_groups(const std::vector<int>& groups, Index num_groups) {
  GroupRows idx(num_groups);
  for (Index i = 0; i < groups.size(); ++i) {
    const int g = groups[i];
    if (g < 0 || static_cast<Index>(g) >= num_groups)
      throw Error("group label " + std::to_string(g) + " out of range at row " + std::to_string(i));
    idx[static_cast<Index>(g)].push_back(i);
  }
  return idx;
}

// Throws if the Dataset invariants do not hold.
inline void validate(const Dataset& ds) {
  const Index n = ds.n();
  if (static_cast<Index>(ds.y.size()) != n || ds.groups.size() != n)
    throw Error("dataset: X, y and groups have inconsistent lengths");
  std::vector<int> seen(n, 0);
  for (Index a = 0; a < ds.num_groups(); ++a) {
    if (ds.group_index[a].empty()) throw Error("dataset: group " + std::to_string(a) + " is empty");
    for (Index i : ds.group_index[a]) {
      if (i >= n || seen[i]++ || ds.groups[i] != static_cast<int>(a))
        throw Error("dataset: group_index is not a partition of the rows");
    }
  }
  if (std::count(seen.begin(), seen.end(), 1) != static_cast<std::ptrdiff_t>(n))
    throw Error("dataset: group_index does not cover every row");
  if (ds.task == Task::classification) {
    for (Index i = 0; i < n; ++i)
      if (ds.y[static_cast<Eigen::Index>(i)] != 1.0 && ds.y[static_cast<Eigen::Index>(i)] != -1.0)
        throw Error("dataset: classification target at row " + std::to_string(i) + " is not +-1");
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& cell, Index row, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (cell.empty() || used != cell.size() || !std::isfinite(v))
    throw Error("parse error at data row " + std::to_string(row) + ", column '" + column +
                "': '" + cell + "' is not a number");
  return v;
}

}  // namespace detail

// Reads a headered CSV. Sensitive columns are crossed into one group label;
// only observed value tuples become groups, numbered in lexicographic order.
inline Dataset load_csv(const std::string& path, const std::string& target_col,
                        const std::vector<std::string>& sensitive_cols, Task task) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error("dataset file '" + path + "' has no header row");
  const auto header = detail::split_csv_line(line);

  auto column_of = [&](const std::string& name) -> Index {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("column '" + name + "' not found in '" + path + "'");
    return static_cast<Index>(it - header.begin());
  };
  const Index target = column_of(target_col);
  std::vector<Index> sensitive;
  for (const auto& s : sensitive_cols) sensitive.push_back(column_of(s));
  if (sensitive.empty()) throw Error("at least one sensitive column is required");

  std::vector<Index> features;
  std::vector<std::string> feature_names;
  for (Index c = 0; c < header.size(); ++c) {
    if (c == target || std::find(sensitive.begin(), sensitive.end(), c) != sensitive.end()) continue;
    features.push_back(c);
    feature_names.push_back(header[c]);
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::vector<std::string>> keys;
  Index row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw Error("data row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                  " cells, header has " + std::to_string(header.size()));
    std::vector<double> x;
    x.reserve(features.size());
    for (Index c : features) x.push_back(detail::parse_number(cells[c], row, header[c]));
    rows.push_back(std::move(x));
    targets.push_back(detail::parse_number(cells[target], row, header[target]));
    std::vector<std::string> key;
    for (Index c : sensitive) key.push_back(cells[c]);
    keys.push_back(std::move(key));
    ++row;
  }
  if (rows.empty()) throw Error("dataset file '" + path + "' has no data rows");

  if (task == Task::classification) {
    const bool zero_one = std::all_of(targets.begin(), targets.end(),
                                      [](double v) { return v == 0.0 || v == 1.0; });
    const bool pm_one = std::all_of(targets.begin(), targets.end(),
                                    [](double v) { return v == -1.0 || v == 1.0; });
    if (!zero_one && !pm_one)
      throw Error("classification target '" + target_col + "' must take values in {0,1} or {-1,1}");
    if (zero_one)
      for (double& v : targets) v = v == 0.0 ? -1.0 : 1.0;
  }

  std::map<std::vector<std::string>, int> group_of;
  for (const auto& k : keys) group_of.emplace(k, 0);
  std::vector<std::string> names;
  int next = 0;
  for (auto& [k, id] : group_of) {
    id = next++;
    std::string name;
    for (Index j = 0; j < k.size(); ++j) name += (j ? "|" : "") + k[j];
    names.push_back(name);
  }

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.X.resize(n, static_cast<Eigen::Index>(features.size()));
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) ds.X(i, j) = rows[i][j];
    ds.y[i] = targets[i];
    ds.groups.push_back(group_of.at(keys[i]));
  }
  ds.group_index = index_groups(ds.groups, names.size());
  ds.group_names = std::move(names);
  ds.feature_names = std::move(feature_names);
  ds.task = task;
  validate(ds);
  return ds;
}

// Centers and scales every feature column (population variance) and appends an
// intercept column of ones. Zero-variance columns become all zeros.
inline Dataset standardize(const Dataset& ds) {
  Dataset out = ds;
  const auto n = ds.X.rows();
  const auto d = ds.X.cols();
  out.X.resize(n, d + 1);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = ds.X.col(j);
    const double mean = col.sum() / static_cast<double>(n);
    const double var = (col.array() - mean).square().sum() / static_cast<double>(n);
    const double scale = col.cwiseAbs().maxCoeff();
    if (var <= 1e-24 * scale * scale) {
      out.X.col(j).setZero();
    } else {
      out.X.col(j) = (col.array() - mean) / std::sqrt(var);
    }
  }
  out.X.col(d).setOnes();
  out.feature_names.push_back("intercept");
  return out;
}

// Rows of `ds` listed in `rows` (kept in the given order), with group ids preserved.
inline Dataset subset_rows(const Dataset& ds, const std::vector<Index>& rows) {
  Dataset out;
  out.task = ds.task;
  out.group_names = ds.group_names;
  out.feature_names = ds.feature_names;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.X.resize(m, ds.X.cols());
  out.y.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<Index>(i)]);
    out.X.row(i) = ds.X.row(r);
    out.y[i] = ds.y[r];
    out.groups.push_back(ds.groups[static_cast<Index>(r)]);
  }
  out.group_index = index_groups(out.groups, ds.num_groups());
  return out;
}

// Stratified, seeded split. Train size is floor(train_frac * n); per-group
// quotas are floor(train_frac * n_a) topped up by largest remainder, and every
// group keeps at least one row on each side.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double train_frac,
                                                    std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error("train_frac must lie in (0,1)");
  const Index n = ds.n();
  const Index S = ds.num_groups();
  const auto total = static_cast<Index>(std::floor(train_frac * static_cast<double>(n)));

  std::vector<Index> quota(S);
  std::vector<std::pair<double, Index>> remainder;
  Index assigned = 0;
  for (Index a = 0; a < S; ++a) {
    const Index na = ds.group_size(a);
    if (na < 2)
      throw Error("stratification error: group " + std::to_string(a) +
                  " has fewer than 2 rows and cannot appear in both splits");
    const double exact = train_frac * static_cast<double>(na);
    quota[a] = std::clamp<Index>(static_cast<Index>(std::floor(exact)), 1, na - 1);
    assigned += quota[a];
    remainder.emplace_back(exact - std::floor(exact), a);
  }
  if (assigned > total)
    throw Error("stratification error: a group would lose all train samples at train_frac=" +
                std::to_string(train_frac));
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  while (assigned < total) {
    bool progressed = false;
    for (const auto& [rem, a] : remainder) {
      if (assigned == total) break;
      if (quota[a] + 1 < ds.group_size(a)) {
        ++quota[a];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  Rng rng(seed);
  std::vector<Index> train, test;
  for (Index a = 0; a < S; ++a) {
    auto rows = ds.group_index[a];
    shuffle(rows, rng);
    train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[a]));
    test.insert(test.end(), rows.begin() + static_cast<std::ptrdiff_t>(quota[a]), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {subset_rows(ds, train), subset_rows(ds, test)};
}

// Gaussian features with group-specific labelling rules. Group a's features are
// shifted along a fixed direction and its true hyperplane is rotated by an angle
// proportional to `shift`, so the group losses conflict. shift=0 gives identically
// distributed groups.
inline Dataset synth_biased(const std::vector<Index>& n_per_group, Index d, double shift,
                            std::uint64_t seed, Task task = Task::classification) {
  if (d < 1) throw Error("synth_biased: d must be >= 1");
  if (n_per_group.empty()) throw Error("synth_biased: need at least one group");
  for (Index c : n_per_group)
    if (c < 2) throw Error("synth_biased: every group needs at least 2 samples");

  Rng rng(seed);
  auto normal = [](Rng& r) { return standard_normal(r); };
  auto unit = [&] {
    Vector v(static_cast<Eigen::Index>(d));
    for (auto& e : v) e = normal(rng);
    return Vector(v / v.norm());
  };
  const Vector base = unit();
  Vector ortho = unit();
  if (d > 1) {
    ortho -= ortho.dot(base) * base;
    if (ortho.norm() < 1e-8) ortho = Vector::Unit(static_cast<Eigen::Index>(d), 0) - base(0) * base;
    ortho.normalize();
  } else {
    ortho.setZero();
  }
  const Vector mean_dir = unit();

  Dataset ds;
  ds.task = task;
  Index n = 0;
  for (Index c : n_per_group) n += c;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.y.resize(static_cast<Eigen::Index>(n));
  Eigen::Index row = 0;
  for (Index a = 0; a < n_per_group.size(); ++a) {
    const double angle = shift * static_cast<double>(a) * std::numbers::pi / 4.0;
    const Vector normal_a = std::cos(angle) * base + std::sin(angle) * ortho;
    const double offset = 0.5 * shift * static_cast<double>(a);
    const Vector mu = 0.75 * shift * static_cast<double>(a) * mean_dir;
    for (Index k = 0; k < n_per_group[a]; ++k, ++row) {
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) ds.X(row, j) = mu[j] + normal(rng);
      const double score = 2.0 * ds.X.row(row).dot(normal_a) + offset + 0.5 * normal(rng);
      ds.y[row] = task == Task::classification ? (score >= 0.0 ? 1.0 : -1.0) : score;
      ds.groups.push_back(static_cast<int>(a));
    }
  }
  ds.group_index = index_groups(ds.groups, n_per_group.size());
  for (Index a = 0; a < n_per_group.size(); ++a) ds.group_names.push_back("g" + std::to_string(a));
  for (Index j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

}  // namespace badr
