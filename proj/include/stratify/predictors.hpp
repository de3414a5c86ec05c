#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "stratify/core.hpp"
#include "stratify/spline.hpp"

namespace stratify {

enum class ModelKind { additive, linear };

struct FitDiagnostics {
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // penalized objective after each accepted iterate
  double gradient_norm = 0.0;

  friend bool operator==(const FitDiagnostics&, const FitDiagnostics&) = default;
};

/// Fitted logistic classifier. For additive models the coefficients follow the
/// basis column order; for linear models they follow the schema order.
struct PredictorModel {
  ModelKind kind = ModelKind::linear;
  double intercept = 0.0;
  std::vector<double> coefficients;
  BasisSpec basis;  // empty for linear models
  double weight_norm = 0.0;
  std::uint64_t schema_fingerprint = 0;
  double lambda = 0.0;
  double ridge = 0.0;
  FitDiagnostics diagnostics;

  friend bool operator==(const PredictorModel&, const PredictorModel&) = default;
};

inline constexpr double kProbabilityClip = 1e-12;
inline constexpr double kDefaultRidge = 1e-8;
// Keeps additive fits finite when a group is linearly separable.
inline constexpr double kAdditiveRidge = 1e-8;
inline constexpr int kMaxIrlsIterations = 100;
inline constexpr double kObjectiveTolerance = 1e-8;
inline constexpr int kMaxStepHalvings = 40;

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Penalized Bernoulli log-likelihood
///   sum_i [y_i eta_i - log(1 + exp(eta_i))] - theta' S theta,
/// where theta = (intercept, coefficients), eta = X theta and S carries the
/// lambda-weighted roughness penalty plus the ridge term (zero on the intercept).
struct PenalizedLogistic {
  Eigen::MatrixXd design;  // first column is the intercept
  Eigen::VectorXd response;
  Eigen::MatrixXd penalty;

  double objective(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd eta = design * theta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      ll += response(i) > 0.5 ? -detail::softplus(-eta(i)) : -detail::softplus(eta(i));
    return ll - theta.dot(penalty * theta);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd eta = design * theta;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) resid(i) = response(i) - detail::sigmoid(eta(i));
    return design.transpose() * resid - 2.0 * penalty * theta;
  }
};

/// Newton-Raphson (IRLS) with step halving; every accepted iterate increases
/// the objective. Stops when the increase drops below 1e-8 or after 100 iterations.
inline Eigen::VectorXd maximize(const PenalizedLogistic& prob, FitDiagnostics& diag) {
  const Eigen::Index p = prob.design.cols();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  const double prevalence = prob.response.mean();
  theta(0) = std::log(std::clamp(prevalence, 1e-6, 1.0 - 1e-6) / (1.0 - std::clamp(prevalence, 1e-6, 1.0 - 1e-6)));
  double obj = prob.objective(theta);
  diag = {};
  diag.objective_trace.push_back(obj);

  for (int it = 1; it <= kMaxIrlsIterations; ++it) {
    const Eigen::VectorXd eta = prob.design * theta;
    Eigen::VectorXd sqrt_w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = detail::sigmoid(eta(i));
      sqrt_w(i) = std::sqrt(mu * (1.0 - mu));
    }
    const Eigen::MatrixXd xw = prob.design.array().colwise() * sqrt_w.array();
    Eigen::MatrixXd h = xw.transpose() * xw + 2.0 * prob.penalty;
    h.diagonal().array() += 1e-10 * (1.0 + h.diagonal().array().abs());
    const Eigen::VectorXd g = prob.gradient(theta);
    const Eigen::VectorXd step = h.ldlt().solve(g);

    double scale = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand;
    double cand_obj = obj;
    for (int k = 0; k <= kMaxStepHalvings; ++k, scale *= 0.5) {
      cand = theta + scale * step;
      cand_obj = prob.objective(cand);
      if (std::isfinite(cand_obj) && cand_obj >= obj) {
        accepted = true;
        break;
      }
    }
    diag.iterations = it;
    if (!accepted) {
      // No ascent left along the Newton direction: stationary up to rounding.
      if (g.norm() <= 1e-6 || std::abs(g.dot(step)) <= 1e-9 * (1.0 + std::abs(obj))) {
        diag.converged = true;
        break;
      }
      diag.gradient_norm = g.norm();
      throw ConvergenceError("IRLS failed to increase the penalized likelihood at iteration " + std::to_string(it) +
                             " (gradient norm " + std::to_string(g.norm()) + ")");
    }
    const double change = cand_obj - obj;
    theta = std::move(cand);
    obj = cand_obj;
    diag.objective_trace.push_back(obj);
    if (change < kObjectiveTolerance) {
      diag.converged = true;
      break;
    }
  }
  diag.gradient_norm = prob.gradient(theta).norm();
  return theta;
}

inline std::vector<double> design_row(const PredictorModel& model, std::span<const double> values) {
  std::vector<double> row;
  if (model.kind == ModelKind::linear) return {values.begin(), values.end()};
  append_design_row(model.basis, values, row);
  return row;
}

inline PenalizedLogistic additive_problem(const Dataset& data, double lambda, const BasisSpec& basis) {
  const int p = basis_columns(basis);
  PenalizedLogistic prob;
  prob.design.resize(static_cast<Eigen::Index>(data.size()), p + 1);
  prob.response.resize(static_cast<Eigen::Index>(data.size()));
  std::vector<double> row;
  for (std::size_t i = 0; i < data.size(); ++i) {
    row.clear();
    append_design_row(basis, data[i].values, row);
    prob.design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (int c = 0; c < p; ++c) prob.design(static_cast<Eigen::Index>(i), c + 1) = row[static_cast<std::size_t>(c)];
    prob.response(static_cast<Eigen::Index>(i)) = data[i].label == Label::Y ? 1.0 : 0.0;
  }
  prob.penalty = Eigen::MatrixXd::Zero(p + 1, p + 1);
  prob.penalty.bottomRightCorner(p, p) = lambda * basis_penalty(basis);
  prob.penalty.diagonal().tail(p).array() += kAdditiveRidge;
  return prob;
}

inline PenalizedLogistic linear_problem(const Dataset& data, double ridge) {
  const auto p = static_cast<Eigen::Index>(data.schema().size());
  PenalizedLogistic prob;
  prob.design.resize(static_cast<Eigen::Index>(data.size()), p + 1);
  prob.response.resize(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    prob.design(r, 0) = 1.0;
    for (Eigen::Index j = 0; j < p; ++j) prob.design(r, j + 1) = data[i].values[static_cast<std::size_t>(j)];
    prob.response(r) = data[i].label == Label::Y ? 1.0 : 0.0;
  }
  prob.penalty = Eigen::MatrixXd::Zero(p + 1, p + 1);
  prob.penalty.diagonal().tail(p).setConstant(ridge);
  return prob;
}

namespace detail {

inline void require_both_labels(const Dataset& data) {
  if (data.empty()) throw Error("cannot fit on an empty dataset");
  if (data.count(Label::Y) == 0 || data.count(Label::N) == 0)
    throw ConvergenceError("cannot fit a classifier on single-label data");
}

inline void finish_model(PredictorModel& m, const Eigen::VectorXd& theta) {
  m.intercept = theta(0);
  m.coefficients.assign(theta.data() + 1, theta.data() + theta.size());
  double ss = 0.0;
  for (double c : m.coefficients) ss += c * c;
  m.weight_norm = std::sqrt(ss);
}

}  // namespace detail

/// Penalized-spline logistic GAM. Binary features enter linearly.
inline PredictorModel fit_additive(const Dataset& data, double lambda, const BasisSpec& basis) {
  detail::require_both_labels(data);
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  if (basis.size() != data.schema().size()) throw SchemaError("basis does not match the schema");
  PredictorModel m;
  m.kind = ModelKind::additive;
  m.basis = basis;
  m.lambda = lambda;
  m.ridge = kAdditiveRidge;
  m.schema_fingerprint = data.schema().fingerprint();
  const auto theta = maximize(additive_problem(data, lambda, basis), m.diagnostics);
  detail::finish_model(m, theta);
  return m;
}

inline PredictorModel fit_additive(const Dataset& data, double lambda, const BasisOptions& opt = {}) {
  return fit_additive(data, lambda, make_basis(data, opt));
}

/// Plain logistic regression with an optional ridge term.
inline PredictorModel fit_linear(const Dataset& data, double ridge = kDefaultRidge) {
  detail::require_both_labels(data);
  if (!(ridge >= 0.0)) throw Error("ridge must be non-negative");
  PredictorModel m;
  m.kind = ModelKind::linear;
  m.ridge = ridge;
  m.schema_fingerprint = data.schema().fingerprint();
  const auto prob = linear_problem(data, ridge);
  const auto theta = maximize(prob, m.diagnostics);
  if (ridge == 0.0) {
    // Every record on the correct side certifies separation: the unpenalized MLE does not exist.
    const Eigen::VectorXd eta = prob.design * theta;
    bool separated = true;
    for (Eigen::Index i = 0; i < eta.size() && separated; ++i)
      separated = (prob.response(i) > 0.5) ? eta(i) > 0.0 : eta(i) < 0.0;
    if (separated) throw ConvergenceError("training data is perfectly separated; refit with ridge > 0");
  }
  detail::finish_model(m, theta);
  return m;
}

inline double predict_logit(const PredictorModel& model, std::span<const double> values) {
  const auto row = design_row(model, values);
  if (row.size() != model.coefficients.size()) throw SchemaError("record does not match the model's feature layout");
  double eta = model.intercept;
  for (std::size_t i = 0; i < row.size(); ++i) eta += row[i] * model.coefficients[i];
  return eta;
}

inline double predict_prob(const PredictorModel& model, std::span<const double> values) {
  return std::clamp(detail::sigmoid(predict_logit(model, values)), kProbabilityClip, 1.0 - kProbabilityClip);
}

inline double predict_prob(const PredictorModel& model, const PatientRecord& r) { return predict_prob(model, r.values); }

inline nlohmann::json model_to_json(const PredictorModel& m) {
  nlohmann::json basis = nlohmann::json::array();
  for (const auto& fb : m.basis)
    basis.push_back({{"linear", fb.linear}, {"knots", fb.knots}, {"degree", fb.degree}, {"penalty_order", fb.penalty_order}});
  char fp[17];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(m.schema_fingerprint));
  return {{"kind", m.kind == ModelKind::additive ? "additive" : "linear"},
          {"schema_fingerprint", fp},
          {"intercept", m.intercept},
          {"coefficients", m.coefficients},
          {"weight_norm", m.weight_norm},
          {"lambda", m.lambda},
          {"ridge", m.ridge},
          {"basis", basis},
          {"fit", {{"iterations", m.diagnostics.iterations}, {"converged", m.diagnostics.converged}}},
          {"standardization", "stats.json"}};
}

inline PredictorModel model_from_json(const nlohmann::json& j) {
  PredictorModel m;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "additive" && kind != "linear") throw Error("unknown model kind '" + kind + "'");
  m.kind = kind == "additive" ? ModelKind::additive : ModelKind::linear;
  m.schema_fingerprint = std::stoull(j.at("schema_fingerprint").get<std::string>(), nullptr, 16);
  m.intercept = j.at("intercept").get<double>();
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  m.weight_norm = j.at("weight_norm").get<double>();
  m.lambda = j.at("lambda").get<double>();
  m.ridge = j.at("ridge").get<double>();
  for (const auto& b : j.at("basis")) {
    FeatureBasis fb;
    fb.linear = b.at("linear").get<bool>();
    fb.knots = b.at("knots").get<std::vector<double>>();
    fb.degree = b.at("degree").get<int>();
    fb.penalty_order = b.at("penalty_order").get<int>();
    m.basis.push_back(std::move(fb));
  }
  m.diagnostics.iterations = j.at("fit").at("iterations").get<int>();
  m.diagnostics.converged = j.at("fit").at("converged").get<bool>();
  return m;
}

}  // namespace stratify
