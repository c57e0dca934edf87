#pragma once

// Exact GP regression with a zero mean on standardized targets.
//
// nlml / nlml_grad / optimize operate on the targets exactly as given; the
// callers (centralized training, ADMM shards) standardize first. fit()
// standardizes internally and predict() returns original units.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trafficgp/dataset.hpp"
#include "trafficgp/errors.hpp"
#include "trafficgp/kernel.hpp"
#include "trafficgp/optimize.hpp"

namespace trafficgp {

inline constexpr double kDefaultJitter = 1e-8;

struct Factorization {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;  // jitter actually applied
};

/// Cholesky of K_y. On failure the jitter is escalated once by x100; a second
/// failure is an ill-conditioned-kernel error.
inline Factorization factorize(const KernelSpec& spec, const HyperParams& theta, std::span<const double> times,
                               double jitter = kDefaultJitter) {
  auto attempt = [&](double j) -> std::optional<Factorization> {
    Factorization f{Eigen::LLT<Matrix>(gram(spec, theta, times, {j, true})), j};
    if (f.llt.info() != Eigen::Success) return std::nullopt;
    const auto diag = f.llt.matrixLLT().diagonal();
    if (!diag.allFinite() || (diag.array() <= 0.0).any()) return std::nullopt;
    return f;
  };
  if (auto f = attempt(jitter)) return std::move(*f);
  // A zero jitter cannot be scaled; fall back to the default level.
  const double escalated = 100.0 * (jitter > 0.0 ? jitter : kDefaultJitter);
  if (auto f = attempt(escalated)) return std::move(*f);
  throw Error(ErrorCode::IllConditioned,
              "Cholesky of K_y failed with jitter " + std::to_string(jitter) + " and " + std::to_string(escalated));
}

namespace detail {

inline void check_gp_inputs(const Dataset& data, const KernelSpec& spec, const HyperParams& theta) {
  validate(data);
  check_theta(spec, theta);
}

inline Eigen::Map<const Vector> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace detail

inline double nlml(const Dataset& data, const KernelSpec& spec, const HyperParams& theta,
                   double jitter = kDefaultJitter) {
  detail::check_gp_inputs(data, spec, theta);
  const auto f = factorize(spec, theta, data.times, jitter);
  const auto y = detail::as_vector(data.values);
  const Vector alpha = f.llt.solve(y);
  const double logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  const auto n = static_cast<double>(data.size());
  return 0.5 * y.dot(alpha) + 0.5 * logdet + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

/// NLML and its gradient from a single factorization. The gradient is
/// -1/2 tr((alpha alpha^T - K_y^-1) dK_y/dtheta_j), accumulated in one pass
/// over the upper triangle so kernel terms are evaluated once per pair.
inline double nlml_with_grad(const Dataset& data, const KernelSpec& spec, const HyperParams& theta, Vector* grad,
                             double jitter = kDefaultJitter) {
  detail::check_gp_inputs(data, spec, theta);
  const auto f = factorize(spec, theta, data.times, jitter);
  const auto y = detail::as_vector(data.values);
  const Vector alpha = f.llt.solve(y);
  const double logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  const auto n = static_cast<Eigen::Index>(data.size());
  const double value = 0.5 * y.dot(alpha) + 0.5 * logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!grad) return value;

  const Matrix kinv = f.llt.solve(Matrix::Identity(n, n));
  const auto p = detail::unpack(spec, theta);
  const std::size_t terms = spec.num_terms();
  grad->setZero(static_cast<Eigen::Index>(spec.dim()));
  double trace_w = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double w = (alpha[i] * alpha[j] - kinv(i, j)) * (i == j ? 1.0 : 2.0);
      if (i == j) trace_w += w;
      const double r = std::abs(data.times[static_cast<std::size_t>(i)] - data.times[static_cast<std::size_t>(j)]);
      for (std::size_t t = 0; t < terms; ++t) {
        const auto e = detail::eval_term(spec.terms()[t], p[t].amp2, p[t].ell, r);
        (*grad)[static_cast<Eigen::Index>(2 * t)] += w * 2.0 * e.value;
        (*grad)[static_cast<Eigen::Index>(2 * t + 1)] += w * e.dlog_length;
      }
    }
  }
  (*grad)[static_cast<Eigen::Index>(spec.noise_index())] = trace_w * 2.0 * noise_variance(spec, theta);
  *grad *= -0.5;
  return value;
}

inline Vector nlml_grad(const Dataset& data, const KernelSpec& spec, const HyperParams& theta,
                        double jitter = kDefaultJitter) {
  Vector g;
  nlml_with_grad(data, spec, theta, &g, jitter);
  return g;
}

inline Objective nlml_objective(Dataset data, KernelSpec spec, double jitter = kDefaultJitter) {
  return [data = std::move(data), spec = std::move(spec), jitter](const Vector& theta, Vector* g) {
    return nlml_with_grad(data, spec, theta, g, jitter);
  };
}

/// Minimizes NLML (+ optional prox term) starting from theta0.
inline OptimResult optimize(const Dataset& data, const KernelSpec& spec, const HyperParams& theta0,
                            const OptimConfig& cfg = {}) {
  detail::check_gp_inputs(data, spec, theta0);
  return minimize(nlml_objective(data, spec), theta0, cfg);
}

struct FittedGP {
  KernelSpec spec;
  HyperParams theta;
  std::vector<double> times;
  Matrix chol;   // lower triangular, chol * chol^T == K_y (with `jitter`)
  Vector alpha;  // K_y^-1 * standardized targets
  Standardization standardization;
  double jitter = kDefaultJitter;
};

struct PredictiveDistribution {
  std::vector<double> mean;
  std::vector<double> variance;  // includes observation noise
};

inline FittedGP fit(const Dataset& data, const KernelSpec& spec, const HyperParams& theta,
                    const Standardization& stats, double jitter = kDefaultJitter) {
  detail::check_gp_inputs(data, spec, theta);
  if (!(stats.std > 0.0)) throw Error(ErrorCode::DegenerateData, "fit: standardization std must be > 0");
  const Dataset z = standardize(data, stats);
  auto f = factorize(spec, theta, z.times, jitter);
  FittedGP m;
  m.spec = spec;
  m.theta = theta;
  m.times = data.times;
  m.chol = f.llt.matrixL();
  m.alpha = f.llt.solve(detail::as_vector(z.values));
  m.standardization = stats;
  m.jitter = f.jitter;
  return m;
}

/// Standardizes with the data's own sample mean/std.
inline FittedGP fit(const Dataset& data, const KernelSpec& spec, const HyperParams& theta,
                    double jitter = kDefaultJitter) {
  validate(data);
  return fit(data, spec, theta, compute_standardization(data.values), jitter);
}

/// Predictive mean/variance in standardized units; `clamp` zeroes tiny
/// negative variances from round-off.
inline PredictiveDistribution predict_standardized(const FittedGP& model, std::span<const double> query,
                                                   bool clamp = true) {
  PredictiveDistribution out;
  if (query.empty()) return out;
  const Matrix ks = cross_gram(model.spec, model.theta, model.times, query);
  const Vector mu = ks.transpose() * model.alpha;
  const Matrix v = model.chol.triangularView<Eigen::Lower>().solve(ks);
  const double prior = signal_variance(model.spec, model.theta) + noise_variance(model.spec, model.theta);
  out.mean.assign(mu.data(), mu.data() + mu.size());
  out.variance.resize(query.size());
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const double var = prior - v.col(j).squaredNorm();
    out.variance[static_cast<std::size_t>(j)] = clamp ? std::max(var, 0.0) : var;
  }
  return out;
}

inline PredictiveDistribution predict(const FittedGP& model, std::span<const double> query) {
  auto out = predict_standardized(model, query, true);
  const auto& s = model.standardization;
  for (auto& m : out.mean) m = s.inverse(m);
  for (auto& v : out.variance) v *= s.std * s.std;
  return out;
}

}  // namespace trafficgp
