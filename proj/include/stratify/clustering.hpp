#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stratify/core.hpp"
#include "stratify/random.hpp"

namespace stratify {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Tuning knobs of the stratification search.
struct HyperParams {
  int min_group = 200;     // C: minimum records per group
  int min_pole = 50;       // P: minimum records per label within a group
  int block = 50;          // b: records moved per perturbation
  int rounds = 5;          // N: perturbation rounds
  double delta = 0.05;     // reliability parameter of the error bound
  double lambda = 1.0;     // roughness penalty weight of the additive models
  std::uint64_t seed = 1;

  void validate() const {
    if (min_pole < 1) throw Error("P must be at least 1");
    if (min_group < 2 * min_pole) throw Error("C must be at least 2P");
    if (block < 1) throw Error("b must be at least 1");
    if (rounds < 0) throw Error("N must be non-negative");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0, 1)");
    if (!(lambda > 0.0)) throw Error("lambda must be positive");
  }
};

struct GroupCounts {
  int total = 0;
  int positive = 0;
  int negative = 0;

  friend bool operator==(const GroupCounts&, const GroupCounts&) = default;
};

/// Partition of the training records (by position in the training split) into m groups.
struct GroupAssignment {
  int m = 0;
  std::vector<int> group_of;
  std::vector<GroupCounts> counts;

  static GroupAssignment from_groups(std::vector<int> group_of, std::span<const Label> labels, int m) {
    if (group_of.size() != labels.size()) throw Error("assignment and label counts differ");
    GroupAssignment a{m, std::move(group_of), std::vector<GroupCounts>(static_cast<std::size_t>(m))};
    for (std::size_t i = 0; i < a.group_of.size(); ++i) {
      const int g = a.group_of[i];
      if (g < 0 || g >= m) throw Error("group index out of range");
      auto& c = a.counts[static_cast<std::size_t>(g)];
      ++c.total;
      ++(labels[i] == Label::Y ? c.positive : c.negative);
    }
    return a;
  }

  bool satisfies(int min_group, int min_pole) const {
    return std::all_of(counts.begin(), counts.end(), [&](const GroupCounts& c) {
      return c.total >= min_group && c.positive >= min_pole && c.negative >= min_pole;
    });
  }

  std::vector<std::size_t> members(int g) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < group_of.size(); ++i)
      if (group_of[i] == g) out.push_back(i);
    return out;
  }

  friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;
};

inline PointMatrix feature_matrix(const Dataset& ds) {
  PointMatrix x(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(ds.schema().size()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.schema().size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ds[i].values[j];
  return x;
}

struct KMeansResult {
  std::vector<int> labels;
  PointMatrix centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void assign_nearest(const PointMatrix& x, const PointMatrix& c, std::vector<int>& labels) {
  const Eigen::Index k = c.rows();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index g = 0; g < k; ++g) {
      const double d = (x.row(i) - c.row(g)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(g);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
}

inline void update_means(const PointMatrix& x, const std::vector<int>& labels, PointMatrix& c) {
  std::vector<int> n(static_cast<std::size_t>(c.rows()), 0);
  c.setZero();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int g = labels[static_cast<std::size_t>(i)];
    c.row(g) += x.row(i);
    ++n[static_cast<std::size_t>(g)];
  }
  for (Eigen::Index g = 0; g < c.rows(); ++g)
    if (n[static_cast<std::size_t>(g)] > 0) c.row(g) /= n[static_cast<std::size_t>(g)];
}

inline double inertia(const PointMatrix& x, const std::vector<int>& labels, const PointMatrix& c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s += (x.row(i) - c.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return s;
}

/// Moves the point farthest from its centroid into each empty cluster.
inline void repair_empty(const PointMatrix& x, std::vector<int>& labels, PointMatrix& c) {
  const auto k = static_cast<std::size_t>(c.rows());
  for (std::size_t g = 0; g < k; ++g) {
    std::vector<int> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    if (sizes[g] > 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int l = labels[static_cast<std::size_t>(i)];
      if (sizes[static_cast<std::size_t>(l)] < 2) continue;
      const double d = (x.row(i) - c.row(l)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < 0) continue;
    labels[static_cast<std::size_t>(far)] = static_cast<int>(g);
    c.row(static_cast<Eigen::Index>(g)) = x.row(far);
  }
}

inline PointMatrix plus_plus_init(const PointMatrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  PointMatrix c(k, x.cols());
  c.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (x.row(i) - c.row(0)).squaredNorm();
  for (int g = 1; g < k; ++g) {
    double total = 0.0;
    for (double d : d2) total += d;
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    c.row(g) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (x.row(i) - c.row(g)).squaredNorm());
  }
  return c;
}

}  // namespace detail

/// Lloyd's algorithm from a k-means++ seeding. Stops at an assignment fixpoint
/// or after `max_iter` iterations. Ties in the assignment go to the lowest
/// centroid index.
inline KMeansResult kmeans_once(const PointMatrix& points, int k, std::uint64_t seed, int max_iter = 300) {
  if (k < 1) throw Error("k must be at least 1");
  if (points.rows() < k) throw Error("k exceeds the number of points");
  Rng rng(seed);
  KMeansResult r;
  r.centroids = detail::plus_plus_init(points, k, rng);
  r.labels.assign(static_cast<std::size_t>(points.rows()), 0);
  detail::assign_nearest(points, r.centroids, r.labels);
  std::vector<int> next(r.labels.size());
  for (int iter = 0; iter < max_iter; ++iter) {
    detail::repair_empty(points, r.labels, r.centroids);
    detail::update_means(points, r.labels, r.centroids);
    r.inertia_history.push_back(detail::inertia(points, r.labels, r.centroids));
    r.iterations = iter + 1;
    detail::assign_nearest(points, r.centroids, next);
    if (next == r.labels) {
      r.converged = true;
      break;
    }
    r.labels.swap(next);
  }
  if (!r.converged) {
    detail::repair_empty(points, r.labels, r.centroids);
    detail::update_means(points, r.labels, r.centroids);
    r.inertia_history.push_back(detail::inertia(points, r.labels, r.centroids));
  }
  r.inertia = r.inertia_history.back();
  return r;
}

/// One step of the descending search for the number of groups.
struct KProbe {
  int k = 0;
  double inertia = 0.0;
  bool feasible = false;
};

inline constexpr int kRestarts = 10;

/// Largest k (scanning down from the cardinality bound) whose best-of-10
/// k-means clustering satisfies the group and pole minimums. Group indices
/// are renumbered by first appearance in training order.
inline GroupAssignment constrained_kmeans(const Dataset& train, const HyperParams& hp,
                                          std::vector<KProbe>* log = nullptr) {
  hp.validate();
  const int n = static_cast<int>(train.size());
  const int n_pos = static_cast<int>(train.count(Label::Y));
  const int n_neg = n - n_pos;
  if (n < hp.min_group)
    throw InfeasibleError("infeasible: " + std::to_string(n) + " training records < C = " + std::to_string(hp.min_group));
  if (n_pos < hp.min_pole)
    throw InfeasibleError("infeasible: " + std::to_string(n_pos) + " Y-labelled records < P = " + std::to_string(hp.min_pole));
  if (n_neg < hp.min_pole)
    throw InfeasibleError("infeasible: " + std::to_string(n_neg) + " N-labelled records < P = " + std::to_string(hp.min_pole));

  // No k above any of these bounds can satisfy the minimums by pigeonhole.
  const int k_max = std::min({n / hp.min_group, n_pos / hp.min_pole, n_neg / hp.min_pole});
  const PointMatrix x = feature_matrix(train);
  const auto labels = train.labels();
  const std::uint64_t base = derive_seed(hp.seed, streams::kKMeans);

  for (int k = k_max; k >= 1; --k) {
    std::optional<KMeansResult> best;
    for (int r = 0; r < kRestarts; ++r) {
      auto res = kmeans_once(x, k, derive_seed(base, (static_cast<std::uint64_t>(k) << 16) | static_cast<std::uint64_t>(r)));
      if (!best || res.inertia < best->inertia) best = std::move(res);
    }
    std::vector<int> remap(static_cast<std::size_t>(k), -1);
    int next = 0;
    std::vector<int> groups(best->labels.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      int& g = remap[static_cast<std::size_t>(best->labels[i])];
      if (g < 0) g = next++;
      groups[i] = g;
    }
    auto a = GroupAssignment::from_groups(std::move(groups), labels, next);
    const bool ok = next == k && a.satisfies(hp.min_group, hp.min_pole);
    if (log) log->push_back({k, best->inertia, ok});
    if (ok) return a;
  }
  // k = 1 always satisfies the checks above, so this is unreachable for valid input.
  throw InfeasibleError("infeasible: no clustering satisfies C and P");
}

}  // namespace stratify
