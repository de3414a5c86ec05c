#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "stratify/core.hpp"

namespace testing_support {

using stratify::Dataset;
using stratify::FeatureKind;
using stratify::FeatureSchema;
using stratify::Label;
using stratify::PatientRecord;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("stratify_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }
  double normal() { return std::normal_distribution<double>()(eng_); }

 private:
  std::mt19937_64 eng_;
};

/// All (Y, N) pairs, ties counted one half.
inline double brute_force_auroc(const std::vector<double>& s, const std::vector<Label>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != Label::Y) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] != Label::N) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

/// Adjusted Rand index from the pair-counting contingency table.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : cells) index += c2(v);
  for (const auto& [k, v] : rows) sa += c2(v);
  for (const auto& [k, v] : cols) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2.0;
  return (index - expected) / (max_index - expected);
}

inline FeatureSchema one_feature_schema() { return FeatureSchema({{"x", FeatureKind::continuous}}, "y"); }

inline Dataset one_feature(const std::vector<double>& x, const std::vector<Label>& y) {
  std::vector<PatientRecord> r;
  for (std::size_t i = 0; i < x.size(); ++i) r.push_back({"r" + std::to_string(i), {x[i]}, y[i]});
  return Dataset(one_feature_schema(), std::move(r));
}

}  // namespace testing_support
