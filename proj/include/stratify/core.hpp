#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "stratify/error.hpp"
#include "stratify/random.hpp"

namespace stratify {

enum class FeatureKind { continuous, binary };

enum class Label : std::uint8_t { N = 0, Y = 1 };

inline bool is_positive(Label l) { return l == Label::Y; }

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;

  friend bool operator==(const Feature&, const Feature&) = default;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;

  FeatureSchema(std::vector<Feature> features, std::string label_name)
      : features_(std::move(features)), label_name_(std::move(label_name)) {
    if (features_.empty()) throw SchemaError("schema needs at least one feature");
    std::unordered_set<std::string> seen;
    for (const auto& f : features_) {
      if (f.name.empty()) throw SchemaError("feature name must not be empty");
      if (!seen.insert(f.name).second) throw SchemaError("duplicate feature name '" + f.name + "'");
    }
    if (seen.count(label_name_)) throw SchemaError("label '" + label_name_ + "' is also a feature name");
  }

  const std::vector<Feature>& features() const { return features_; }
  const std::string& label_name() const { return label_name_; }
  std::size_t size() const { return features_.size(); }
  const Feature& operator[](std::size_t i) const { return features_[i]; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < features_.size(); ++i)
      if (features_[i].name == name) return i;
    throw SchemaError("unknown feature '" + name + "'");
  }

  /// FNV-1a over names and kinds; used to detect model/data mismatches.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& f : features_) {
      mix(f.name);
      mix(f.kind == FeatureKind::binary ? ":b;" : ":c;");
    }
    mix("label=");
    mix(label_name_);
    return h;
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

 private:
  std::vector<Feature> features_;
  std::string label_name_;
};

struct PatientRecord {
  std::string id;
  std::vector<double> values;
  Label label = Label::N;

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

enum class Role { unsplit, training, validation, test };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::training: return "training";
    case Role::validation: return "validation";
    case Role::test: return "test";
    case Role::unsplit: break;
  }
  return "unsplit";
}

inline void validate_record(const FeatureSchema& schema, const PatientRecord& r) {
  if (r.values.size() != schema.size())
    throw SchemaError("record '" + r.id + "' has " + std::to_string(r.values.size()) + " values, schema has " +
                      std::to_string(schema.size()));
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const double v = r.values[j];
    if (!std::isfinite(v)) throw SchemaError("record '" + r.id + "': non-finite value for '" + schema[j].name + "'");
    if (schema[j].kind == FeatureKind::binary && v != 0.0 && v != 1.0)
      throw SchemaError("record '" + r.id + "': binary feature '" + schema[j].name + "' must be 0 or 1");
  }
}

/// Immutable collection of records conforming to one schema.
class Dataset {
 public:
  Dataset() = default;

  Dataset(FeatureSchema schema, std::vector<PatientRecord> records, Role role = Role::unsplit)
      : schema_(std::move(schema)), records_(std::move(records)), role_(role) {
    std::unordered_set<std::string> ids;
    ids.reserve(records_.size());
    for (const auto& r : records_) {
      validate_record(schema_, r);
      if (!ids.insert(r.id).second) throw SchemaError("duplicate record id '" + r.id + "'");
    }
  }

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<PatientRecord>& records() const { return records_; }
  const PatientRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  Role role() const { return role_; }

  std::vector<Label> labels() const {
    std::vector<Label> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.label);
    return out;
  }

  std::size_t count(Label l) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [l](const auto& r) { return r.label == l; }));
  }

  /// Records at the given positions, in the given order.
  Dataset subset(std::span<const std::size_t> rows, Role role) const {
    std::vector<PatientRecord> out;
    out.reserve(rows.size());
    for (auto i : rows) out.push_back(records_[i]);
    return Dataset(schema_, std::move(out), role);
  }

  Dataset with_role(Role role) const { return Dataset(schema_, records_, role); }

 private:
  FeatureSchema schema_;
  std::vector<PatientRecord> records_;
  Role role_ = Role::unsplit;
};

struct SplitFractions {
  double train = 0.5;
  double validation = 0.1;
  double test = 0.4;
};

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Seeded uniform split. Train and validation sizes are floored shares of the
/// normalized fractions; the remainder goes to test. Within each part the
/// original record order is kept.
inline DatasetSplit split_dataset(const Dataset& ds, SplitFractions f, std::uint64_t seed) {
  if (ds.empty()) throw Error("cannot split an empty dataset");
  if (ds.role() != Role::unsplit) throw Error("dataset is already split");
  if (!(f.train > 0) || !(f.validation > 0) || !(f.test > 0)) throw Error("split fractions must be positive");
  const double sum = f.train + f.validation + f.test;
  if (std::abs(sum - 1.0) > 1e-3) throw Error("split fractions must sum to 1");

  const std::size_t n = ds.size();
  const auto share = [&](double frac) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * (frac / sum) + 1e-9));
  };
  const std::size_t n_train = share(f.train);
  const std::size_t n_val = std::min(share(f.validation), n - n_train);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, streams::kSplit));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> va(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                              order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::vector<std::size_t> te(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  std::sort(te.begin(), te.end());
  return {ds.subset(tr, Role::training), ds.subset(va, Role::validation), ds.subset(te, Role::test)};
}

/// z-score parameters computed on the training split. Binary features are
/// stored with mean 0 and stddev 1 and flagged as pass-through.
struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> standardized;

  friend bool operator==(const StandardizationStats&, const StandardizationStats&) = default;
};

inline StandardizationStats compute_standardization(const Dataset& train) {
  if (train.empty()) throw Error("cannot standardize on an empty dataset");
  const auto& schema = train.schema();
  const std::size_t d = schema.size();
  const double n = static_cast<double>(train.size());
  StandardizationStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), std::vector<bool>(d, false)};
  for (std::size_t j = 0; j < d; ++j) {
    if (schema[j].kind == FeatureKind::binary) continue;
    double mean = 0.0;
    for (const auto& r : train.records()) mean += r.values[j];
    mean /= n;
    double ss = 0.0;
    for (const auto& r : train.records()) ss += (r.values[j] - mean) * (r.values[j] - mean);
    const double sd = train.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (!(sd > 0.0)) throw Error("feature '" + schema[j].name + "' has zero variance on the training split");
    s.mean[j] = mean;
    s.stddev[j] = sd;
    s.standardized[j] = true;
  }
  return s;
}

inline void check_stats_shape(const Dataset& ds, const StandardizationStats& stats) {
  const auto& schema = ds.schema();
  if (stats.mean.size() != schema.size() || stats.stddev.size() != schema.size() ||
      stats.standardized.size() != schema.size())
    throw SchemaError("standardization stats do not match the dataset schema");
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (stats.standardized[j] != (schema[j].kind == FeatureKind::continuous))
      throw SchemaError("standardization stats disagree on the kind of '" + schema[j].name + "'");
}

inline Dataset apply_standardization(const Dataset& ds, const StandardizationStats& stats) {
  check_stats_shape(ds, stats);
  std::vector<PatientRecord> out = ds.records();
  for (auto& r : out)
    for (std::size_t j = 0; j < r.values.size(); ++j)
      if (stats.standardized[j]) r.values[j] = (r.values[j] - stats.mean[j]) / stats.stddev[j];
  return Dataset(ds.schema(), std::move(out), ds.role());
}

inline double unstandardize(double z, const StandardizationStats& stats, std::size_t feature) {
  return stats.standardized[feature] ? z * stats.stddev[feature] + stats.mean[feature] : z;
}

inline Dataset invert_standardization(const Dataset& ds, const StandardizationStats& stats) {
  check_stats_shape(ds, stats);
  std::vector<PatientRecord> out = ds.records();
  for (auto& r : out)
    for (std::size_t j = 0; j < r.values.size(); ++j) r.values[j] = unstandardize(r.values[j], stats, j);
  return Dataset(ds.schema(), std::move(out), ds.role());
}

}  // namespace stratify
