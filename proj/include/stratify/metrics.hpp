#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratify/core.hpp"
#include "stratify/error.hpp"
#include "stratify/random.hpp"

namespace stratify {

/// Mann-Whitney estimate of P(score_Y > score_N), ties counted as one half.
/// O(n log n): midranks over the pooled sample.
inline double auroc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw Error("auroc: scores and labels differ in length");
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l == Label::Y;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedAurocError("auroc is undefined without both labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;  // sum of 1-based midranks of positives
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == Label::Y) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr int kBootstrapResamples = 1000;

/// Stratified percentile bootstrap: positives and negatives are resampled
/// separately so every replicate keeps both classes. The interval is widened
/// if needed so that it contains the point estimate.
inline Interval auroc_ci(std::span<const double> scores, std::span<const Label> labels, double level,
                         std::uint64_t seed, int resamples = kBootstrapResamples) {
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
  const double point = auroc(scores, labels);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == Label::Y ? pos : neg).push_back(scores[i]);

  Rng rng(derive_seed(seed, streams::kBootstrap));
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> s(scores.size());
  std::vector<Label> l(scores.size());
  std::fill(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(pos.size()), Label::Y);
  std::fill(l.begin() + static_cast<std::ptrdiff_t>(pos.size()), l.end(), Label::N);
  for (int b = 0; b < resamples; ++b) {
    std::size_t at = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) s[at++] = pos[rng.below(pos.size())];
    for (std::size_t i = 0; i < neg.size(); ++i) s[at++] = neg[rng.below(neg.size())];
    stats.push_back(auroc(s, l));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  auto q = [&](double p) {
    const double h = (static_cast<double>(stats.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, stats.size() - 1);
    return stats[lo] + (h - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
  };
  return {std::min(q(alpha), point), std::max(q(1.0 - alpha), point)};
}

/// Mean per-record error: 1 - P for positives, P for negatives.
inline double empirical_error(std::span<const double> probs, std::span<const Label> labels) {
  if (probs.size() != labels.size()) throw Error("empirical_error: probabilities and labels differ in length");
  if (probs.empty()) throw Error("empirical_error: no records");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw Error("empirical_error: probability outside [0, 1]");
    s += labels[i] == Label::Y ? 1.0 - probs[i] : probs[i];
  }
  return s / static_cast<double>(probs.size());
}

/// Complexity term 2 sqrt(||w|| / omega).
inline double rademacher_bound(double weight_norm, std::int64_t omega) {
  if (omega < 1) throw Error("rademacher_bound: sample size must be positive");
  if (!(weight_norm >= 0.0)) throw Error("rademacher_bound: weight norm must be non-negative");
  return 2.0 * std::sqrt(weight_norm / static_cast<double>(omega));
}

/// Sample-size term sqrt(ln(1/delta) / (2 omega)).
inline double reliability_bound(double delta, std::int64_t omega) {
  if (!(delta > 0.0 && delta <= 1.0)) throw Error("reliability_bound: delta must lie in (0, 1]");
  if (omega < 1) throw Error("reliability_bound: sample size must be positive");
  return std::sqrt(std::log(1.0 / delta) / (2.0 * static_cast<double>(omega)));
}

struct ErrorBound {
  double raw = 0.0;    // L_emp + R_emp + U
  double value = 0.0;  // raw capped at 1
  bool saturated = false;
};

inline ErrorBound error_upper_bound(double l_emp, double r_emp, double u) {
  if (!(l_emp >= 0.0 && r_emp >= 0.0 && u >= 0.0)) throw Error("error_upper_bound: terms must be non-negative");
  const double raw = l_emp + r_emp + u;
  return {raw, std::min(raw, 1.0), raw > 1.0};
}

struct NetBenefitCurve {
  std::vector<double> thresholds;
  std::vector<double> net_benefit;
  std::vector<double> treat_all;
  std::vector<double> treat_none;
};

/// Decision-curve net benefit TP/n - FP/n * pt / (1 - pt), positive iff prob >= pt.
inline NetBenefitCurve net_benefit(std::span<const double> probs, std::span<const Label> labels,
                                   std::span<const double> thresholds) {
  if (probs.size() != labels.size()) throw Error("net_benefit: probabilities and labels differ in length");
  if (probs.empty()) throw Error("net_benefit: no records");
  for (double t : thresholds)
    if (!(t > 0.0 && t < 1.0)) throw Error("net_benefit: thresholds must lie strictly inside (0, 1)");
  const double n = static_cast<double>(probs.size());
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l == Label::Y;
  NetBenefitCurve c;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] < t) continue;
      ++(labels[i] == Label::Y ? tp : fp);
    }
    const double odds = t / (1.0 - t);
    c.thresholds.push_back(t);
    c.net_benefit.push_back(static_cast<double>(tp) / n - static_cast<double>(fp) / n * odds);
    c.treat_all.push_back(static_cast<double>(n_pos) / n - static_cast<double>(probs.size() - n_pos) / n * odds);
    c.treat_none.push_back(0.0);
  }
  return c;
}

/// One row of the evaluation table: a group, ALL (global additive) or ALL-logit.
struct MetricsReport {
  std::string tag;
  int group = -1;  // -1 for the global rows
  std::int64_t omega = 0;
  double weight_norm = 0.0;
  double empirical_error = 0.0;
  double rademacher = 0.0;
  double reliability = 0.0;
  ErrorBound bound;
  std::optional<double> auroc;
  Interval auroc_ci;
  std::int64_t misclassified = 0;  // at threshold 0.5
  int train_count = 0;             // training records behind the predictor
  bool empty = false;              // no records allocated
  bool degenerate = false;         // single-label records: AUROC undefined
};

}  // namespace stratify
