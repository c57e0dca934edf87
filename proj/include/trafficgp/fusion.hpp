#pragma once

// Prediction-time aggregation: robust Bayesian committee machine over shard
// experts, plus the subset-of-data and centralized baselines.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "trafficgp/admm.hpp"
#include "trafficgp/dataset.hpp"
#include "trafficgp/errors.hpp"
#include "trafficgp/gp.hpp"
#include "trafficgp/kernel.hpp"

namespace trafficgp {

struct ExpertPrediction {
  int worker_id = 0;
  std::vector<double> mean;
  std::vector<double> variance;
};

struct FusionStrategy {
  enum class Kind { Rbcm, Sod, Centralized };
  Kind kind = Kind::Rbcm;
  int sod_worker = 0;

  static FusionStrategy rbcm() { return {Kind::Rbcm, 0}; }
  static FusionStrategy sod(int worker) { return {Kind::Sod, worker}; }
  static FusionStrategy centralized() { return {Kind::Centralized, 0}; }
};

inline std::string to_string(const FusionStrategy& s) {
  switch (s.kind) {
    case FusionStrategy::Kind::Rbcm: return "rbcm";
    case FusionStrategy::Kind::Sod: return "sod";
    case FusionStrategy::Kind::Centralized: return "centralized";
  }
  return "unknown";
}

/// Prior predictive variance of a noisy observation, sum of term variances
/// plus sigma_n^2 (standardized units).
inline double prior_variance(const KernelSpec& spec, const HyperParams& theta) {
  return signal_variance(spec, theta) + noise_variance(spec, theta);
}

/// Pointwise rBCM with zero prior mean. Inputs must share units with
/// prior_var (standardized space):
///   beta_k    = 1/2 (log prior_var - log var_k)
///   precision = sum_k beta_k / var_k + (1 - sum_k beta_k) / prior_var
///   mean      = (1 / precision) sum_k beta_k mean_k / var_k
/// The precision is floored at 1e-6 / prior_var.
inline PredictiveDistribution rbcm_fuse(std::span<const ExpertPrediction> experts, double prior_var) {
  if (experts.empty()) throw Error(ErrorCode::EmptyInput, "rbcm_fuse: no experts");
  if (!(prior_var > 0.0) || !std::isfinite(prior_var)) {
    throw Error(ErrorCode::ParameterShape, "rbcm_fuse: prior variance must be positive");
  }
  const std::size_t m = experts.front().mean.size();
  for (const auto& e : experts) {
    if (e.mean.size() != m || e.variance.size() != m) throw Error(ErrorCode::ParameterShape, "rbcm_fuse: expert size mismatch");
    for (double v : e.variance) {
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::ParameterShape, "rbcm_fuse: expert variance must be > 0");
    }
  }
  const double log_prior = std::log(prior_var);
  const double floor_precision = 1e-6 / prior_var;
  PredictiveDistribution out;
  out.mean.resize(m);
  out.variance.resize(m);
  for (std::size_t q = 0; q < m; ++q) {
    double beta_sum = 0.0;
    double precision = 0.0;
    double weighted = 0.0;
    for (const auto& e : experts) {
      const double beta = 0.5 * (log_prior - std::log(e.variance[q]));
      beta_sum += beta;
      precision += beta / e.variance[q];
      weighted += beta * e.mean[q] / e.variance[q];
    }
    precision += (1.0 - beta_sum) / prior_var;
    precision = std::max(precision, floor_precision);
    out.variance[q] = 1.0 / precision;
    out.mean[q] = out.variance[q] * weighted;
  }
  return out;
}

/// rBCM on experts given in original units: fused in the space defined by
/// `stats`, then mapped back. A single expert is its own committee and is
/// returned unchanged.
inline PredictiveDistribution fuse_experts(std::span<const ExpertPrediction> experts, const Standardization& stats,
                                           double prior_var_standardized) {
  if (experts.size() == 1) return {experts.front().mean, experts.front().variance};
  std::vector<ExpertPrediction> scaled(experts.begin(), experts.end());
  const double s2 = stats.std * stats.std;
  for (auto& e : scaled) {
    for (auto& mu : e.mean) mu = stats.forward(mu);
    for (auto& v : e.variance) v /= s2;
  }
  auto fused = rbcm_fuse(scaled, prior_var_standardized);
  for (auto& mu : fused.mean) mu = stats.inverse(mu);
  for (auto& v : fused.variance) v *= s2;
  return fused;
}

/// Expert prediction of one shard at shared hyperparameters.
inline ExpertPrediction expert_predict(const Shard& shard, const KernelSpec& spec, const HyperParams& theta,
                                       const Standardization& stats, std::span<const double> query) {
  const auto model = fit(shard.data, spec, theta, stats);
  auto pd = predict(model, query);
  return {shard.worker_id, std::move(pd.mean), std::move(pd.variance)};
}

/// Everything a strategy may need. `stats` is the standardization of the
/// full training set, shared by all experts.
struct FusionInputs {
  KernelSpec spec;
  HyperParams theta;
  Standardization stats;
  std::vector<Shard> shards;
  Dataset full;
};

inline PredictiveDistribution predict_with_strategy(const FusionStrategy& strategy, const FusionInputs& in,
                                                    std::span<const double> query) {
  check_theta(in.spec, in.theta);
  switch (strategy.kind) {
    case FusionStrategy::Kind::Centralized:
      return predict(fit(in.full, in.spec, in.theta, in.stats), query);
    case FusionStrategy::Kind::Sod: {
      if (strategy.sod_worker < 0 || static_cast<std::size_t>(strategy.sod_worker) >= in.shards.size()) {
        throw Error(ErrorCode::ParameterShape, "sod: worker id " + std::to_string(strategy.sod_worker) + " out of range");
      }
      auto e = expert_predict(in.shards[static_cast<std::size_t>(strategy.sod_worker)], in.spec, in.theta, in.stats, query);
      return {std::move(e.mean), std::move(e.variance)};
    }
    case FusionStrategy::Kind::Rbcm: {
      if (in.shards.empty()) throw Error(ErrorCode::EmptyInput, "rbcm: no shards");
      std::vector<ExpertPrediction> experts;
      experts.reserve(in.shards.size());
      for (const auto& s : in.shards) experts.push_back(expert_predict(s, in.spec, in.theta, in.stats, query));
      return fuse_experts(experts, in.stats, prior_variance(in.spec, in.theta));
    }
  }
  throw Error(ErrorCode::ParameterShape, "unknown fusion strategy");
}

}  // namespace trafficgp
