#pragma once

// Stratification engine. Training records are clustered into groups, one
// additive model is fitted per group, and validation records are routed to
// the group owning the nearest label-pole centroid. Random block moves
// between groups are kept only when they raise the summed per-group
// validation AUROC.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stratify/clustering.hpp"
#include "stratify/core.hpp"
#include "stratify/metrics.hpp"
#include "stratify/predictors.hpp"
#include "stratify/random.hpp"

namespace stratify {

/// Mean standardized feature vectors of the Y and N members of one group.
struct GroupPoles {
  std::vector<double> positive;
  std::vector<double> negative;

  friend bool operator==(const GroupPoles&, const GroupPoles&) = default;
};

using PoleCentroids = std::vector<GroupPoles>;

inline PoleCentroids compute_poles(const Dataset& train, const GroupAssignment& a) {
  if (a.group_of.size() != train.size()) throw Error("assignment does not cover the training set");
  const std::size_t d = train.schema().size();
  PoleCentroids poles(static_cast<std::size_t>(a.m), GroupPoles{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)});
  std::vector<std::size_t> n_pos(static_cast<std::size_t>(a.m), 0), n_neg(static_cast<std::size_t>(a.m), 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto g = static_cast<std::size_t>(a.group_of[i]);
    const bool pos = train[i].label == Label::Y;
    auto& c = pos ? poles[g].positive : poles[g].negative;
    for (std::size_t j = 0; j < d; ++j) c[j] += train[i].values[j];
    ++(pos ? n_pos[g] : n_neg[g]);
  }
  for (std::size_t g = 0; g < poles.size(); ++g) {
    if (n_pos[g] == 0 || n_neg[g] == 0) throw Error("group " + std::to_string(g) + " has an empty pole");
    for (std::size_t j = 0; j < d; ++j) {
      poles[g].positive[j] /= static_cast<double>(n_pos[g]);
      poles[g].negative[j] /= static_cast<double>(n_neg[g]);
    }
  }
  return poles;
}

/// Group owning the pole centroid nearest to `values` (Euclidean). Ties go to
/// the lower group index; within a group the Y pole is checked first.
inline int allocate(std::span<const double> values, const PoleCentroids& poles) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < poles.size(); ++g) {
    for (const auto* c : {&poles[g].positive, &poles[g].negative}) {
      if (c->size() != values.size()) throw SchemaError("record and pole centroid dimensions differ");
      double d = 0.0;
      for (std::size_t j = 0; j < values.size(); ++j) d += (values[j] - (*c)[j]) * (values[j] - (*c)[j]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(g);
      }
    }
  }
  if (best < 0) throw Error("no pole centroids to allocate against");
  return best;
}

inline Dataset group_data(const Dataset& train, const GroupAssignment& a, int g) {
  const auto rows = a.members(g);
  return train.subset(rows, Role::training);
}

inline PredictorModel fit_group(const Dataset& train, const GroupAssignment& a, int g, double lambda) {
  try {
    return fit_additive(group_data(train, a, g), lambda);
  } catch (const Error& e) {
    throw ObjectiveError("group " + std::to_string(g) + ": " + e.what(), g);
  }
}

/// Per-group validation AUROCs behind one objective value.
struct ObjectiveBreakdown {
  double total = 0.0;
  std::vector<double> group_auroc;
  std::vector<bool> degenerate;  // fewer than two labels allocated: scored 0.5
  std::vector<int> allocated;

  friend bool operator==(const ObjectiveBreakdown&, const ObjectiveBreakdown&) = default;
};

inline constexpr double kDegenerateAuroc = 0.5;

/// Sum of per-group AUROCs on the validation records routed to each group.
/// Scores are the model logits (rank-equivalent to the probabilities, but free
/// of ties introduced by probability clipping).
inline ObjectiveBreakdown score_validation(std::span<const PredictorModel> models, const PoleCentroids& poles,
                                           const Dataset& validation) {
  const std::size_t m = models.size();
  std::vector<std::vector<double>> scores(m);
  std::vector<std::vector<Label>> labels(m);
  for (const auto& r : validation.records()) {
    const auto g = static_cast<std::size_t>(allocate(r.values, poles));
    scores[g].push_back(predict_logit(models[g], r.values));
    labels[g].push_back(r.label);
  }
  ObjectiveBreakdown out;
  for (std::size_t g = 0; g < m; ++g) {
    out.allocated.push_back(static_cast<int>(scores[g].size()));
    double a = kDegenerateAuroc;
    bool degenerate = true;
    try {
      a = auroc(scores[g], labels[g]);
      degenerate = false;
    } catch (const UndefinedAurocError&) {
    }
    out.group_auroc.push_back(a);
    out.degenerate.push_back(degenerate);
    out.total += a;
  }
  return out;
}

inline ObjectiveBreakdown objective(const GroupAssignment& a, const Dataset& train, const Dataset& validation,
                                    double lambda) {
  std::vector<PredictorModel> models;
  for (int g = 0; g < a.m; ++g) models.push_back(fit_group(train, a, g, lambda));
  return score_validation(models, compute_poles(train, a), validation);
}

struct Perturbation {
  GroupAssignment candidate;
  int source = -1;
  int target = -1;
  bool feasible = false;
  std::vector<std::size_t> moved;  // training positions moved source -> target
};

/// Moves `block` uniformly chosen members of a random source group to a
/// distinct random target group. Candidates breaking C or P are returned
/// with feasible = false.
inline Perturbation perturb(const GroupAssignment& a, std::span<const Label> labels, int block, int min_group,
                            int min_pole, Rng& rng) {
  if (a.m < 2) throw Error("perturb needs at least two groups");
  if (block < 1) throw Error("block size must be positive");
  Perturbation p;
  p.source = static_cast<int>(rng.below(static_cast<std::uint64_t>(a.m)));
  p.target = static_cast<int>(rng.below(static_cast<std::uint64_t>(a.m - 1)));
  if (p.target >= p.source) ++p.target;
  p.candidate = a;
  if (block > a.counts[static_cast<std::size_t>(p.source)].total - min_group) return p;

  auto members = a.members(p.source);
  for (std::size_t i = 0; i < static_cast<std::size_t>(block); ++i) {
    const std::size_t j = i + rng.below(members.size() - i);
    std::swap(members[i], members[j]);
  }
  members.resize(static_cast<std::size_t>(block));
  std::sort(members.begin(), members.end());
  auto groups = a.group_of;
  for (auto i : members) groups[i] = p.target;
  p.candidate = GroupAssignment::from_groups(std::move(groups), labels, a.m);
  p.moved = std::move(members);
  p.feasible = p.candidate.satisfies(min_group, min_pole);
  return p;
}

enum class RoundOutcome { initial, accepted, rejected, infeasible, fit_failed };

inline const char* to_string(RoundOutcome o) {
  switch (o) {
    case RoundOutcome::initial: return "initial";
    case RoundOutcome::accepted: return "accepted";
    case RoundOutcome::rejected: return "rejected";
    case RoundOutcome::infeasible: return "infeasible";
    case RoundOutcome::fit_failed: return "fit_failed";
  }
  return "?";
}

struct TraceEntry {
  int round = 0;
  int source = -1;
  int target = -1;
  double objective = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
  RoundOutcome outcome = RoundOutcome::initial;

  bool accepted() const { return outcome == RoundOutcome::initial || outcome == RoundOutcome::accepted; }
};

/// Current groups together with everything derived from them.
struct ClimbState {
  GroupAssignment assignment;
  std::vector<PredictorModel> models;
  PoleCentroids poles;
  ObjectiveBreakdown score;

  friend bool operator==(const ClimbState&, const ClimbState&) = default;
};

/// Randomized hill climbing over group membership. Inputs must already be standardized.
class HillClimber {
 public:
  HillClimber(const Dataset& train, const Dataset& validation, const HyperParams& hp)
      : train_(train), validation_(validation), hp_(hp), labels_(train.labels()),
        rng_(derive_seed(hp.seed, streams::kPerturb)) {
    hp_.validate();
    state_.assignment = constrained_kmeans(train_, hp_);
    for (int g = 0; g < state_.assignment.m; ++g) state_.models.push_back(fit_group(train_, state_.assignment, g, hp_.lambda));
    state_.poles = compute_poles(train_, state_.assignment);
    state_.score = score_validation(state_.models, state_.poles, validation_);
    trace_.push_back({0, -1, -1, state_.score.total, RoundOutcome::initial});
  }

  const ClimbState& state() const { return state_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }

  /// One perturbation round. Accepts only a strictly larger objective.
  const TraceEntry& step() {
    const int round = static_cast<int>(trace_.size());
    if (state_.assignment.m < 2) {
      trace_.push_back({round, -1, -1, std::numeric_limits<double>::quiet_NaN(), RoundOutcome::infeasible});
      return trace_.back();
    }
    auto p = perturb(state_.assignment, labels_, hp_.block, hp_.min_group, hp_.min_pole, rng_);
    TraceEntry e{round, p.source, p.target, std::numeric_limits<double>::quiet_NaN(), RoundOutcome::infeasible};
    if (p.feasible) {
      ClimbState cand;
      cand.assignment = std::move(p.candidate);
      cand.models = state_.models;
      try {
        // Only the source and target groups changed; the others keep their fits.
        for (int g : {p.source, p.target})
          cand.models[static_cast<std::size_t>(g)] = fit_group(train_, cand.assignment, g, hp_.lambda);
        cand.poles = compute_poles(train_, cand.assignment);
        cand.score = score_validation(cand.models, cand.poles, validation_);
        e.objective = cand.score.total;
        if (cand.score.total > state_.score.total) {
          e.outcome = RoundOutcome::accepted;
          state_ = std::move(cand);
        } else {
          e.outcome = RoundOutcome::rejected;
        }
      } catch (const ObjectiveError&) {
        e.outcome = RoundOutcome::fit_failed;
      }
    }
    trace_.push_back(e);
    return trace_.back();
  }

 private:
  const Dataset& train_;
  const Dataset& validation_;
  HyperParams hp_;
  std::vector<Label> labels_;
  Rng rng_;
  ClimbState state_;
  std::vector<TraceEntry> trace_;
};

struct StratificationModel {
  FeatureSchema schema;
  StandardizationStats stats;
  HyperParams hp;
  std::vector<std::string> train_ids;  // training order; assignment.group_of aligns with it
  GroupAssignment assignment;
  PoleCentroids poles;
  std::vector<PredictorModel> group_models;
  PredictorModel global_additive;
  PredictorModel global_linear;
  std::vector<TraceEntry> trace;
  ObjectiveBreakdown validation_score;

  int m() const { return assignment.m; }
  double objective() const { return validation_score.total; }
};

/// Full search on raw (unstandardized) training and validation splits.
inline StratificationModel optimize(const Dataset& train_raw, const Dataset& validation_raw, const HyperParams& hp) {
  hp.validate();
  if (!(train_raw.schema() == validation_raw.schema())) throw SchemaError("training and validation schemas differ");
  StratificationModel model;
  model.schema = train_raw.schema();
  model.hp = hp;
  model.stats = compute_standardization(train_raw);
  const Dataset train = apply_standardization(train_raw, model.stats);
  const Dataset validation = apply_standardization(validation_raw, model.stats);
  for (const auto& r : train.records()) model.train_ids.push_back(r.id);

  HillClimber climber(train, validation, hp);
  for (int i = 0; i < hp.rounds; ++i) climber.step();

  const auto& s = climber.state();
  model.assignment = s.assignment;
  model.poles = s.poles;
  model.group_models = s.models;
  model.validation_score = s.score;
  model.trace = climber.trace();
  model.global_additive = fit_additive(train, hp.lambda);
  model.global_linear = fit_linear(train, kDefaultRidge);
  return model;
}

struct NamedCurve {
  std::string tag;
  NetBenefitCurve curve;
};

struct Evaluation {
  std::vector<MetricsReport> reports;  // groups in order, then ALL, then ALL-logit
  std::vector<NamedCurve> curves;
  std::vector<int> allocation;  // group of each test record

  std::int64_t group_misclassified() const {
    std::int64_t s = 0;
    for (const auto& r : reports)
      if (r.group >= 0) s += r.misclassified;
    return s;
  }
};

inline const std::vector<double>& synthetic_thresholds() {
  static const std::vector<double> t{0.01, 0.1, 0.2, 0.4, 0.5, 0.6, 0.8, 0.95};
  return t;
}

inline const std::vector<double>& clinical_thresholds() {
  static const std::vector<double> t{0.05, 0.2, 0.5, 0.8, 0.95};
  return t;
}

inline std::string group_tag(int g) { return "G" + std::to_string(g + 1); }

namespace detail {

inline MetricsReport score_rows(const std::string& tag, int group, const PredictorModel& model,
                                const std::vector<const PatientRecord*>& rows, double delta, double ci_level,
                                std::uint64_t seed, std::span<const double> thresholds, std::vector<NamedCurve>& curves) {
  MetricsReport rep;
  rep.tag = tag;
  rep.group = group;
  rep.omega = static_cast<std::int64_t>(rows.size());
  rep.weight_norm = model.weight_norm;
  if (rows.empty()) {
    rep.empty = true;
    rep.degenerate = true;
    return rep;
  }
  std::vector<double> probs, logits;
  std::vector<Label> labels;
  for (const auto* r : rows) {
    logits.push_back(predict_logit(model, r->values));
    probs.push_back(predict_prob(model, r->values));
    labels.push_back(r->label);
    if ((probs.back() >= 0.5) != (r->label == Label::Y)) ++rep.misclassified;
  }
  rep.empirical_error = empirical_error(probs, labels);
  rep.rademacher = rademacher_bound(model.weight_norm, rep.omega);
  rep.reliability = reliability_bound(delta, rep.omega);
  rep.bound = error_upper_bound(rep.empirical_error, rep.rademacher, rep.reliability);
  try {
    rep.auroc = auroc(logits, labels);
    rep.auroc_ci = auroc_ci(logits, labels, ci_level, seed);
  } catch (const UndefinedAurocError&) {
    rep.degenerate = true;
  }
  curves.push_back({tag, net_benefit(probs, labels, thresholds)});
  return rep;
}

}  // namespace detail

struct EvaluateOptions {
  double delta = 0.05;
  double ci_level = 0.95;
  std::uint64_t seed = 1;
  std::vector<double> thresholds = synthetic_thresholds();
};

/// Routes raw test records to groups and scores every predictor.
inline Evaluation evaluate(const StratificationModel& model, const Dataset& test_raw, const EvaluateOptions& opt = {}) {
  if (test_raw.schema().fingerprint() != model.schema.fingerprint())
    throw SchemaError("test data schema does not match the model");
  const Dataset test = apply_standardization(test_raw, model.stats);
  Evaluation ev;
  std::vector<std::vector<const PatientRecord*>> by_group(static_cast<std::size_t>(model.m()));
  std::vector<const PatientRecord*> all;
  for (const auto& r : test.records()) {
    const int g = allocate(r.values, model.poles);
    ev.allocation.push_back(g);
    by_group[static_cast<std::size_t>(g)].push_back(&r);
    all.push_back(&r);
  }
  for (int g = 0; g < model.m(); ++g) {
    auto rep = detail::score_rows(group_tag(g), g, model.group_models[static_cast<std::size_t>(g)],
                                  by_group[static_cast<std::size_t>(g)], opt.delta, opt.ci_level,
                                  derive_seed(opt.seed, static_cast<std::uint64_t>(g)), opt.thresholds, ev.curves);
    rep.train_count = model.assignment.counts[static_cast<std::size_t>(g)].total;
    ev.reports.push_back(std::move(rep));
  }
  const int n_train = static_cast<int>(model.train_ids.size());
  ev.reports.push_back(detail::score_rows("ALL", -1, model.global_additive, all, opt.delta, opt.ci_level,
                                          derive_seed(opt.seed, 1000), opt.thresholds, ev.curves));
  ev.reports.back().train_count = n_train;
  ev.reports.push_back(detail::score_rows("ALL-logit", -1, model.global_linear, all, opt.delta, opt.ci_level,
                                          derive_seed(opt.seed, 1001), opt.thresholds, ev.curves));
  ev.reports.back().train_count = n_train;
  return ev;
}

struct ProfileRow {
  int group = 0;
  Label pole = Label::Y;
  int count = 0;
  std::vector<double> means;  // original units; binary features give prevalence
};

/// Per-group, per-pole attribute means of the raw training records.
inline std::vector<ProfileRow> profile_groups(const StratificationModel& model, const Dataset& train_raw) {
  std::unordered_map<std::string, int> group_of;
  for (std::size_t i = 0; i < model.train_ids.size(); ++i) group_of.emplace(model.train_ids[i], model.assignment.group_of[i]);
  const std::size_t d = train_raw.schema().size();
  std::vector<ProfileRow> rows;
  for (int g = 0; g < model.m(); ++g)
    for (Label l : {Label::Y, Label::N}) rows.push_back({g, l, 0, std::vector<double>(d, 0.0)});
  for (const auto& r : train_raw.records()) {
    auto it = group_of.find(r.id);
    if (it == group_of.end()) throw Error("record '" + r.id + "' is not part of the model's training split");
    auto& row = rows[static_cast<std::size_t>(2 * it->second + (r.label == Label::Y ? 0 : 1))];
    ++row.count;
    for (std::size_t j = 0; j < d; ++j) row.means[j] += r.values[j];
  }
  for (auto& row : rows)
    if (row.count > 0)
      for (auto& v : row.means) v /= row.count;
  return rows;
}

}  // namespace stratify
