#include <gtest/gtest.h>

#include <cmath>

#include "stratify/synth.hpp"

using namespace stratify;

namespace {

// Fraction of the regime-A rectangle [-0.8, 0.2) x [0, 1) with x1 + x2 <= 0,
// by midpoint-rule integration over a fine grid.
double regime_a_positive_area() {
  const int steps = 2000;
  double inside = 0;
  for (int i = 0; i < steps; ++i) {
    const double x1 = -0.8 + (i + 0.5) / steps;
    for (int j = 0; j < steps; ++j) {
      const double x2 = (j + 0.5) / steps;
      inside += x1 + x2 <= 0.0;
    }
  }
  return inside / (static_cast<double>(steps) * steps);
}

}  // namespace

TEST(Synthetic, HalfPerRegime) {
  const auto s = generate_synthetic(1500, 42);
  ASSERT_EQ(s.dataset.size(), 1500u);
  int a = 0;
  for (const auto& t : s.truth) a += t.group == Regime::A;
  EXPECT_EQ(a, 750);
}

TEST(Synthetic, RegimeARule) {
  const auto r = synthetic_record("a", Regime::A, -0.5, 0.2);
  EXPECT_DOUBLE_EQ(r.values[0], -0.3);
  EXPECT_DOUBLE_EQ(r.values[1], -0.7);
  EXPECT_EQ(r.label, Label::Y);
}

TEST(Synthetic, RegimeBRule) {
  const auto r = synthetic_record("b", Regime::B, 0.6, -0.4);
  EXPECT_NEAR(r.values[0], 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(r.values[1], 1.0);
  EXPECT_EQ(r.label, Label::Y);
}

TEST(Synthetic, BoundaryUsesPrintedInequalities) {
  EXPECT_EQ(synthetic_record("a", Regime::A, -0.5, 0.5).label, Label::Y);
  EXPECT_EQ(synthetic_record("b", Regime::B, 0.5, -0.5).label, Label::N);
}

TEST(Synthetic, OnlyX3X4Exposed) {
  const auto s = generate_synthetic(4, 1);
  EXPECT_EQ(s.dataset.schema().size(), 2u);
  EXPECT_EQ(s.dataset.schema()[0].name, "X3");
  EXPECT_EQ(s.dataset.schema()[1].name, "X4");
  EXPECT_EQ(s.dataset.schema().label_name(), "Y");
}

TEST(Synthetic, LatentReconstructionAndLabelRuleProperty) {
  for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
    const auto s = generate_synthetic(2000, seed);
    for (std::size_t i = 0; i < s.dataset.size(); ++i) {
      const auto& r = s.dataset[i];
      const auto& t = s.truth[i];
      ASSERT_EQ(r.id, t.id);
      const double x3 = r.values[0], x4 = r.values[1];
      ASSERT_NEAR((x3 + x4) / 2.0, t.x1, 1e-12);
      ASSERT_NEAR((x3 - x4) / 2.0, t.x2, 1e-12);
      if (t.group == Regime::A) {
        ASSERT_TRUE(t.x1 >= -0.8 && t.x1 < 0.2 && t.x2 >= 0.0 && t.x2 < 1.0);
        ASSERT_EQ(r.label == Label::Y, t.x1 + t.x2 <= 0.0);
      } else {
        ASSERT_TRUE(t.x1 >= 0.0 && t.x1 < 1.0 && t.x2 >= -0.8 && t.x2 < 0.2);
        ASSERT_EQ(r.label == Label::Y, t.x1 + t.x2 > 0.0);
      }
    }
  }
}

TEST(Synthetic, PrevalenceMatchesGeometry) {
  const double area = regime_a_positive_area();
  EXPECT_NEAR(area, 0.32, 1e-3);
  const auto s = generate_synthetic(20000, 5);
  double pos_a = 0, pos_b = 0, n = 0;
  for (std::size_t i = 0; i < s.truth.size(); ++i) {
    const bool y = s.dataset[i].label == Label::Y;
    if (s.truth[i].group == Regime::A) {
      pos_a += y;
      n += 1;
    } else {
      pos_b += y;
    }
  }
  EXPECT_NEAR(pos_a / n, area, 0.03);
  EXPECT_NEAR(pos_b / n, 1.0 - area, 0.03);
}

TEST(Synthetic, BitIdenticalForEqualSeeds) {
  const auto a = generate_synthetic(500, 17);
  const auto b = generate_synthetic(500, 17);
  const auto c = generate_synthetic(500, 18);
  EXPECT_EQ(a.dataset.records(), b.dataset.records());
  EXPECT_NE(a.dataset.records(), c.dataset.records());
}

TEST(Synthetic, OddOrTinyIsAnError) {
  EXPECT_THROW(generate_synthetic(3, 1), Error);
  EXPECT_THROW(generate_synthetic(0, 1), Error);
  EXPECT_NO_THROW(generate_synthetic(2, 1));
}

TEST(ClinicalSurrogate, ConformsAndHasMinorityLabel) {
  const auto ds = generate_clinical_surrogate(3000, 4);
  EXPECT_EQ(ds.size(), 3000u);
  const double rate = static_cast<double>(ds.count(Label::Y)) / ds.size();
  EXPECT_GT(rate, 0.05);
  EXPECT_LT(rate, 0.25);
  EXPECT_EQ(generate_clinical_surrogate(100, 4).records(), generate_clinical_surrogate(100, 4).records());
}
