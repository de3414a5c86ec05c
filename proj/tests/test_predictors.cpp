#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "stratify/metrics.hpp"
#include "stratify/predictors.hpp"
#include "stratify/synth.hpp"
#include "support.hpp"

using namespace stratify;
using testing_support::Gen;
using testing_support::one_feature;

namespace {

Dataset two_features(Gen& gen, int n, double (*eta)(double, double)) {
  std::vector<PatientRecord> recs;
  for (int i = 0; i < n; ++i) {
    const double a = gen.normal(), b = gen.normal();
    const double p = 1.0 / (1.0 + std::exp(-eta(a, b)));
    recs.push_back({std::to_string(i), {a, b}, gen.coin(p) ? Label::Y : Label::N});
  }
  return Dataset(FeatureSchema({{"a", FeatureKind::continuous}, {"b", FeatureKind::continuous}}, "y"), recs);
}

Eigen::VectorXd theta_of(const PredictorModel& m) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(m.coefficients.size() + 1));
  t(0) = m.intercept;
  for (std::size_t i = 0; i < m.coefficients.size(); ++i) t(static_cast<Eigen::Index>(i + 1)) = m.coefficients[i];
  return t;
}

Eigen::VectorXd central_difference(const PenalizedLogistic& prob, const Eigen::VectorXd& theta, double h) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up(i) += h;
    down(i) -= h;
    g(i) = (prob.objective(up) - prob.objective(down)) / (2 * h);
  }
  return g;
}

}  // namespace

// ---------------------------------------------------------------- splines

TEST(Spline, BasisKnotsStrictlyIncreasing) {
  Gen gen(1);
  std::vector<double> x;
  std::vector<Label> y;
  for (int i = 0; i < 300; ++i) {
    x.push_back(std::round(gen.normal() * 4) / 4);  // heavy ties
    y.push_back(gen.coin() ? Label::Y : Label::N);
  }
  const auto spec = make_basis(one_feature(x, y));
  ASSERT_FALSE(spec[0].linear);
  for (std::size_t i = 1; i < spec[0].knots.size(); ++i) EXPECT_LT(spec[0].knots[i - 1], spec[0].knots[i]);
  EXPECT_GE(static_cast<int>(spec[0].knots.size()), spec[0].degree + 2);
}

TEST(Spline, BinaryAndFewValuedFeaturesAreLinear) {
  const auto binary = make_basis(Dataset(FeatureSchema({{"b", FeatureKind::binary}}, "y"),
                                         {{"1", {0.0}, Label::Y}, {"2", {1.0}, Label::N}}));
  EXPECT_TRUE(binary[0].linear);
  const auto two_values = make_basis(one_feature({0, 1, 0, 1}, {Label::Y, Label::N, Label::N, Label::Y}));
  EXPECT_TRUE(two_values[0].linear);
}

TEST(Spline, PartitionOfUnityInsideAndOutside) {
  FeatureBasis fb;
  fb.linear = false;
  fb.knots = {-2, -1, -0.3, 0, 0.4, 1.5, 3};
  for (double x = -4; x <= 5; x += 0.173) {
    const auto v = spline_row(fb, x);
    EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-12) << x;
  }
}

TEST(Spline, GrevilleCoefficientsReproduceLines) {
  FeatureBasis fb;
  fb.linear = false;
  fb.knots = {0, 0.1, 0.5, 0.7, 2};
  const auto xi = greville_abscissae(fb);
  for (double x = -1; x <= 3; x += 0.1) {
    const auto v = spline_row(fb, x);
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (3.0 - 2.0 * xi[i]) * v[i];
    EXPECT_NEAR(s, 3.0 - 2.0 * x, 1e-12) << x;
  }
}

TEST(Spline, PenaltyNullSpaceIsLinear) {
  FeatureBasis fb;
  fb.linear = false;
  fb.knots = {0, 0.1, 0.5, 0.7, 2, 2.2};
  const auto s = feature_penalty(fb);
  const auto xi = greville_abscissae(fb);
  // Dropping the first spline: a line a + b x maps to coefficients (a + b xi_i) - (a + b xi_0).
  Eigen::VectorXd line(s.rows());
  for (Eigen::Index i = 0; i < line.size(); ++i) line(i) = 1.7 * (xi[static_cast<std::size_t>(i + 1)] - xi[0]);
  EXPECT_NEAR(line.dot(s * line), 0.0, 1e-10);
  Eigen::VectorXd wiggle = Eigen::VectorXd::Zero(s.rows());
  wiggle(2) = 1.0;
  EXPECT_GT(wiggle.dot(s * wiggle), 1e-3);
}

TEST(Spline, ExtrapolationIsLinear) {
  FeatureBasis fb;
  fb.linear = false;
  fb.knots = {0, 1, 2, 3, 4};
  PredictorModel m;
  m.kind = ModelKind::additive;
  m.basis = {fb};
  m.coefficients = {0.3, -1.0, 2.0, 0.5, 1.1, -0.7};
  const double a = predict_logit(m, std::vector<double>{6}), b = predict_logit(m, std::vector<double>{8}),
               c = predict_logit(m, std::vector<double>{10});
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_NEAR(c - b, b - a, 1e-9);
  const double d = predict_logit(m, std::vector<double>{-3}), e = predict_logit(m, std::vector<double>{-5}),
               f = predict_logit(m, std::vector<double>{-7});
  EXPECT_NEAR(f - e, e - d, 1e-9);
}

// ---------------------------------------------------------------- fitting

TEST(FitAdditive, SeparableMonotone) {
  std::vector<double> x;
  std::vector<Label> y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(-1.0 + 2.0 * (i + 0.5) / 200);
    y.push_back(x.back() > 0 ? Label::Y : Label::N);
  }
  const auto ds = one_feature(x, y);
  const auto m = fit_additive(ds, 1.0);
  EXPECT_GT(predict_prob(m, std::vector<double>{0.5}), predict_prob(m, std::vector<double>{-0.5}));
  std::vector<double> s;
  for (double v : x) s.push_back(predict_logit(m, std::vector<double>{v}));
  EXPECT_DOUBLE_EQ(auroc(s, y), 1.0);
}

TEST(FitAdditive, HeavyPenaltyCollapsesToLinearFit) {
  Gen gen(3);
  std::vector<double> x;
  std::vector<Label> y;
  for (int i = 0; i < 400; ++i) {
    x.push_back(gen.normal());
    y.push_back(gen.coin(1.0 / (1.0 + std::exp(-(0.4 + 1.3 * x.back() - 0.8 * x.back() * x.back())))) ? Label::Y
                                                                                                         : Label::N);
  }
  const auto ds = one_feature(x, y);
  const auto gam = fit_additive(ds, 1e6);
  const auto lin = fit_linear(ds, kDefaultRidge);
  double worst = 0;
  for (double v = -3; v <= 3; v += 0.05)
    worst = std::max(worst, std::abs(predict_prob(gam, std::vector<double>{v}) - predict_prob(lin, std::vector<double>{v})));
  EXPECT_LE(worst, 0.02);
}

TEST(FitAdditive, UninformativeFeaturesGivePrevalence) {
  Gen gen(5);
  // Each smooth has about a dozen free columns; n must be large enough that
  // their sampling noise on pure-noise labels sits well inside the band.
  const auto ds = two_features(gen, 20000, [](double, double) { return 0.0; });
  const double prevalence = static_cast<double>(ds.count(Label::Y)) / ds.size();
  const auto m = fit_additive(ds, 1.0);
  // The linear part of each smooth is unpenalized, so its sampling noise grows
  // toward the tails; check over the central range where the data live.
  for (double a = -2; a <= 2; a += 0.25)
    for (double b = -2; b <= 2; b += 0.25) ASSERT_NEAR(predict_prob(m, std::vector<double>{a, b}), prevalence, 0.05);
}

TEST(FitAdditive, SingleLabelIsAnError) {
  const auto ds = one_feature({1, 2, 3, 4, 5, 6}, std::vector<Label>(6, Label::Y));
  EXPECT_THROW(fit_additive(ds, 1.0), Error);
  EXPECT_THROW(fit_linear(ds), Error);
  EXPECT_THROW(fit_additive(one_feature({1, 2}, {Label::Y, Label::N}), 0.0), Error);
}

TEST(FitAdditive, ObjectiveNonDecreasingAndGradientVanishesProperty) {
  Gen gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = gen.integer(60, 300);
    const double lambda = std::pow(10.0, gen.real(-3, 2));
    const double s1 = gen.real(-2, 2), s2 = gen.real(-2, 2);
    std::vector<PatientRecord> recs;
    for (int i = 0; i < n; ++i) {
      const double a = gen.normal(), b = gen.real(-2, 2);
      const double p = 1.0 / (1.0 + std::exp(-(s1 * a + s2 * std::sin(2 * b))));
      recs.push_back({std::to_string(i), {a, b}, gen.coin(p) ? Label::Y : Label::N});
    }
    const Dataset ds(FeatureSchema({{"a", FeatureKind::continuous}, {"b", FeatureKind::continuous}}, "y"), recs);
    const auto basis = make_basis(ds);
    const auto m = fit_additive(ds, lambda, basis);
    ASSERT_TRUE(m.diagnostics.converged);
    const auto& trace = m.diagnostics.objective_trace;
    for (std::size_t i = 1; i < trace.size(); ++i) ASSERT_GE(trace[i], trace[i - 1]);

    const auto prob = additive_problem(ds, lambda, basis);
    const auto theta = theta_of(m);
    const auto g = prob.gradient(theta);
    ASSERT_LE(g.norm(), 1e-5);
    // Central differences are exact on the quadratic penalty, so a wider step only
    // reduces cancellation error when the penalty entries are large.
    ASSERT_LE(central_difference(prob, theta, 1e-4).norm(), 1e-5);

    // Away from the optimum the analytic gradient must agree with finite differences.
    Eigen::VectorXd off = theta;
    for (Eigen::Index i = 0; i < off.size(); ++i) off(i) += gen.real(-0.5, 0.5);
    const auto ga = prob.gradient(off), gf = central_difference(prob, off, 1e-5);
    ASSERT_LE((ga - gf).norm() / ga.norm(), 1e-4);
  }
}

TEST(FitLinear, SeparableBlobsWithRidge) {
  Gen gen(9);
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 200; ++i) {
    const bool pos = i % 2 == 0;
    recs.push_back({std::to_string(i), {(pos ? 4.0 : -4.0) + gen.normal() * 0.5, gen.normal()}, pos ? Label::Y : Label::N});
  }
  const Dataset ds(FeatureSchema({{"a", FeatureKind::continuous}, {"b", FeatureKind::continuous}}, "y"), recs);
  const auto m = fit_linear(ds, 1e-6);
  std::vector<double> s;
  for (const auto& r : ds.records()) s.push_back(predict_logit(m, r.values));
  EXPECT_DOUBLE_EQ(auroc(s, ds.labels()), 1.0);
  try {
    fit_linear(ds, 0.0);
    FAIL() << "separable data without ridge must not converge";
  } catch (const ConvergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("ridge"), std::string::npos);
  }
}

TEST(FitLinear, ConstantFeatureGetsZeroCoefficient) {
  Gen gen(10);
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 300; ++i) {
    const double a = gen.normal();
    recs.push_back({std::to_string(i), {a, 3.0}, gen.coin(1 / (1 + std::exp(-a))) ? Label::Y : Label::N});
  }
  const Dataset ds(FeatureSchema({{"a", FeatureKind::continuous}, {"c", FeatureKind::continuous}}, "y"), recs);
  const auto m = fit_linear(ds, 1e-4);
  EXPECT_NEAR(m.coefficients[1], 0.0, 1e-6);
  EXPECT_GT(m.coefficients[0], 0.3);
}

TEST(FitLinear, NonSeparableWithoutRidgeConverges) {
  Gen gen(12);
  const auto ds = two_features(gen, 500, [](double a, double b) { return 0.5 * a - b; });
  const auto m = fit_linear(ds, 0.0);
  EXPECT_TRUE(m.diagnostics.converged);
  EXPECT_GT(m.coefficients[0], 0.0);
  EXPECT_LT(m.coefficients[1], 0.0);
}

// ---------------------------------------------------------------- prediction

TEST(Predict, ZeroModelIsOneHalf) {
  PredictorModel m;
  m.coefficients = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(predict_prob(m, std::vector<double>{1.3, -2.0}), 0.5);
}

TEST(Predict, InterceptLogThree) {
  PredictorModel m;
  m.intercept = std::log(3.0);
  m.coefficients = {0.0};
  EXPECT_NEAR(predict_prob(m, std::vector<double>{5.0}), 0.75, 1e-15);
}

TEST(Predict, ClippedIntoOpenInterval) {
  PredictorModel m;
  m.coefficients = {0.0};
  m.intercept = 1000;
  EXPECT_EQ(predict_prob(m, std::vector<double>{0}), 1.0 - kProbabilityClip);
  m.intercept = -1000;
  EXPECT_EQ(predict_prob(m, std::vector<double>{0}), kProbabilityClip);
}

TEST(Predict, MonotoneInInterceptProperty) {
  Gen gen(13);
  for (int trial = 0; trial < 200; ++trial) {
    PredictorModel m;
    m.coefficients = {gen.normal(), gen.normal()};
    m.intercept = gen.real(-20, 20);
    const std::vector<double> v{gen.normal(), gen.normal()};
    const double before = predict_prob(m, v);
    m.intercept += gen.real(0.01, 5);
    ASSERT_GE(predict_prob(m, v), before);
  }
}

TEST(Predict, DimensionMismatch) {
  PredictorModel m;
  m.coefficients = {1.0};
  EXPECT_THROW(predict_logit(m, std::vector<double>{1, 2}), SchemaError);
}

TEST(Predict, WeightNormRecomputes) {
  Gen gen(14);
  const auto ds = two_features(gen, 300, [](double a, double b) { return a * b; });
  for (const auto& m : {fit_additive(ds, 0.1), fit_linear(ds)}) {
    double ss = 0;
    for (double c : m.coefficients) ss += c * c;
    EXPECT_NEAR(m.weight_norm, std::sqrt(ss), 1e-12);
  }
}

TEST(Predict, SyntheticGroupAModelOnDeepPositivePoint) {
  // Regime A only: Y iff x1 + x2 <= 0, i.e. X3 <= 0.
  const auto syn = generate_synthetic(4000, 31);
  std::vector<std::size_t> a_rows;
  for (std::size_t i = 0; i < syn.truth.size(); ++i)
    if (syn.truth[i].group == Regime::A) a_rows.push_back(i);
  const std::vector<std::size_t> fit_rows(a_rows.begin(), a_rows.begin() + 1000);
  const std::vector<std::size_t> held_rows(a_rows.begin() + 1000, a_rows.end());
  const auto train = syn.dataset.subset(fit_rows, Role::training);
  const auto stats = compute_standardization(train);
  const auto m = fit_additive(apply_standardization(train, stats), 1.0);

  const std::vector<double> deep{-0.4, -0.8};  // x1 = -0.6, x2 = 0.2
  PatientRecord probe{"probe", deep, Label::Y};
  const auto z = apply_standardization(Dataset(train.schema(), {probe}), stats);
  const double p = predict_prob(m, z[0]);
  EXPECT_GT(p, 0.9);

  double hits = 0, n = 0;
  for (auto i : held_rows) {
    const auto& r = syn.dataset[i];
    if (std::abs(r.values[0] - deep[0]) < 0.15 && std::abs(r.values[1] - deep[1]) < 0.15) {
      n += 1;
      hits += r.label == Label::Y;
    }
  }
  ASSERT_GT(n, 20);
  EXPECT_NEAR(p, hits / n, 0.1);
}

TEST(ModelJson, RoundTrip) {
  Gen gen(15);
  const auto ds = two_features(gen, 200, [](double a, double) { return a; });
  for (const auto& m : {fit_additive(ds, 0.5), fit_linear(ds)}) {
    const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.intercept, m.intercept);
    EXPECT_EQ(back.coefficients, m.coefficients);
    EXPECT_EQ(back.basis, m.basis);
    EXPECT_EQ(back.schema_fingerprint, m.schema_fingerprint);
    EXPECT_EQ(back.weight_norm, m.weight_norm);
    for (const auto& r : ds.records()) ASSERT_EQ(predict_logit(back, r.values), predict_logit(m, r.values));
  }
}
