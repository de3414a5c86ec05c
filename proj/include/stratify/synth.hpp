#pragma once

// Data generators: the two-regime XOR-like construction used to check group
// recovery, and a surrogate clinical cohort with the nine-attribute schema.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "stratify/core.hpp"
#include "stratify/random.hpp"

namespace stratify {

enum class Regime : std::uint8_t { A, B };

inline const char* to_string(Regime g) { return g == Regime::A ? "A" : "B"; }

struct SyntheticTruth {
  std::string id;
  Regime group = Regime::A;
  double x1 = 0.0;
  double x2 = 0.0;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<SyntheticTruth> truth;  // aligned with dataset records

  std::unordered_map<std::string, Regime> truth_by_id() const {
    std::unordered_map<std::string, Regime> out;
    for (const auto& t : truth) out.emplace(t.id, t.group);
    return out;
  }
};

inline FeatureSchema synthetic_schema() {
  return FeatureSchema({{"X3", FeatureKind::continuous}, {"X4", FeatureKind::continuous}}, "Y");
}

/// Observable record for latent (x1, x2) drawn from `group`.
/// Regime A labels Y iff x1 + x2 <= 0; regime B labels Y iff x1 + x2 > 0.
inline PatientRecord synthetic_record(std::string id, Regime group, double x1, double x2) {
  const double x3 = x1 + x2;
  const double x4 = x1 - x2;
  const bool y = group == Regime::A ? (x3 <= 0.0) : (x3 > 0.0);
  return {std::move(id), {x3, x4}, y ? Label::Y : Label::N};
}

inline std::string padded_id(char prefix, std::size_t i, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

/// n/2 records per regime, alternating A, B, A, B... Samples are drawn on
/// half-open intervals: regime A x1 in [-0.8, 0.2), x2 in [0, 1); regime B
/// swaps the two ranges.
inline SyntheticData generate_synthetic(std::size_t n, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw Error("synthetic population size must be even and at least 2");
  Rng rng(derive_seed(seed, streams::kSynth));
  std::vector<PatientRecord> records;
  std::vector<SyntheticTruth> truth;
  records.reserve(n);
  truth.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Regime g = i % 2 == 0 ? Regime::A : Regime::B;
    double x1 = 0.0, x2 = 0.0;
    if (g == Regime::A) {
      x1 = rng.uniform(-0.8, 0.2);
      x2 = rng.uniform(0.0, 1.0);
    } else {
      x1 = rng.uniform(0.0, 1.0);
      x2 = rng.uniform(-0.8, 0.2);
    }
    std::string id = padded_id('s', i, n);
    truth.push_back({id, g, x1, x2});
    records.push_back(synthetic_record(std::move(id), g, x1, x2));
  }
  return {Dataset(synthetic_schema(), std::move(records)), std::move(truth)};
}

inline FeatureSchema clinical_schema() {
  return FeatureSchema({{"sex", FeatureKind::binary},
                        {"age", FeatureKind::continuous},
                        {"crea_discharge", FeatureKind::continuous},
                        {"crea_max", FeatureKind::continuous},
                        {"gfr_low", FeatureKind::continuous},
                        {"crpb_max", FeatureKind::continuous},
                        {"hf5y", FeatureKind::binary},
                        {"dm5y", FeatureKind::binary},
                        {"cancer5y", FeatureKind::binary}},
                       "died_90d");
}

namespace detail {

inline double normal(Rng& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u = 1.0 - rng.uniform01();
  const double v = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

inline double clamp(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

}  // namespace detail

/// Surrogate post-discharge cohort over the clinical schema. Three latent
/// profiles with different attribute distributions and different risk
/// coefficients; overall 90-day mortality is roughly 12%. It exercises the
/// clinical defaults end to end and carries no clinical meaning.
inline Dataset generate_clinical_surrogate(std::size_t n, std::uint64_t seed) {
  struct Profile {
    double weight, age_mu, crea_mu, gfr_mu, crp_mu, p_hf, p_dm, p_ca;
    double b0, b_age, b_crea, b_gfr, b_crp, b_sex, b_hf, b_dm, b_ca;
  };
  static constexpr Profile kProfiles[] = {
      {0.55, 58, 1.1, 0.85, 25, 0.08, 0.15, 0.08, -3.6, 0.045, 0.5, -1.2, 0.004, 0.2, 0.6, 0.1, 0.9},
      {0.30, 78, 1.8, 0.55, 40, 0.40, 0.30, 0.12, -2.2, 0.030, 0.3, -0.8, 0.003, -0.3, 0.5, 0.6, 0.7},
      {0.15, 66, 1.4, 0.70, 120, 0.15, 0.20, 0.55, -2.0, 0.020, 0.4, -0.6, 0.008, 0.4, 0.4, -0.2, 1.1},
  };
  Rng rng(derive_seed(seed, streams::kSynth + 100));
  std::vector<PatientRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    const Profile& p = u < kProfiles[0].weight ? kProfiles[0]
                       : u < kProfiles[0].weight + kProfiles[1].weight ? kProfiles[1]
                                                                       : kProfiles[2];
    const double sex = rng.uniform01() < 0.5 ? 1.0 : 0.0;
    const double age = std::round(detail::clamp(p.age_mu + 12.0 * detail::normal(rng), 18.0, 100.0));
    const double crea_max = p.crea_mu * std::exp(0.35 * detail::normal(rng));
    const double crea_dc = crea_max * rng.uniform(0.5, 1.0);
    const double gfr = detail::clamp(p.gfr_mu + 0.15 * detail::normal(rng), 0.05, 1.5);
    const double crp = p.crp_mu * std::exp(0.6 * detail::normal(rng));
    const double hf = rng.uniform01() < p.p_hf ? 1.0 : 0.0;
    const double dm = rng.uniform01() < p.p_dm ? 1.0 : 0.0;
    const double ca = rng.uniform01() < p.p_ca ? 1.0 : 0.0;
    const double eta = p.b0 + p.b_age * (age - 65.0) + p.b_crea * (crea_dc - 1.2) + p.b_gfr * (gfr - 0.7) +
                       p.b_crp * (crp - 40.0) + p.b_sex * sex + p.b_hf * hf + p.b_dm * dm + p.b_ca * ca;
    const bool died = rng.uniform01() < 1.0 / (1.0 + std::exp(-eta));
    // Round lab values to clinical precision.
    auto r2 = [](double x) { return std::round(x * 100.0) / 100.0; };
    records.push_back({padded_id('p', i, n),
                       {sex, age, r2(crea_dc), r2(crea_max), r2(gfr), std::round(crp * 10.0) / 10.0, hf, dm, ca},
                       died ? Label::Y : Label::N});
  }
  return Dataset(clinical_schema(), std::move(records));
}

}  // namespace stratify
