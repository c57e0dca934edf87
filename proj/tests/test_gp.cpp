#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "trafficgp/gp.hpp"

using namespace trafficgp;

namespace {

HyperParams theta_of(std::initializer_list<double> values) {
  HyperParams t(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) t[i++] = v;
  return t;
}

// sigma_n so small that sigma_n^2 underflows to zero.
constexpr double kNoNoise = -400.0;

Dataset standardized_random(std::mt19937_64& rng, std::size_t n, const KernelSpec& spec, HyperParams* theta) {
  auto p = oracle::random_problem(rng, n, spec);
  *theta = p.theta;
  return standardize(p.data, compute_standardization(p.data.values));
}

}  // namespace

TEST(Nlml, SinglePointFrozenValues) {
  const auto spec = KernelSpec::se_only();
  const Dataset zero{{0.0}, {0.0}};
  EXPECT_NEAR(nlml(zero, spec, theta_of({0.0, 0.0, kNoNoise}), 0.0), 0.9189385332046727, 1e-14);
  const Dataset one{{0.0}, {1.0}};
  EXPECT_NEAR(nlml(one, spec, theta_of({0.5 * std::log(2.0), 0.0, kNoNoise}), 0.0), 1.5155121234846454, 1e-14);
}

TEST(Nlml, MatchesDenseOracle) {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    HyperParams theta;
    const auto spec = KernelSpec::traffic_default();
    const auto d = standardized_random(rng, 30, spec, &theta);
    const double fast = nlml(d, spec, theta);
    const double slow = oracle::dense_nlml(d, spec, theta);
    EXPECT_NEAR(fast, slow, 1e-8 * std::abs(slow)) << "rep " << rep;
  }
}

TEST(Nlml, ValueWithGradientEqualsPlainValue) {
  std::mt19937_64 rng(7);
  HyperParams theta;
  const auto spec = KernelSpec::traffic_default();
  const auto d = standardized_random(rng, 25, spec, &theta);
  Vector g;
  EXPECT_EQ(nlml_with_grad(d, spec, theta, &g), nlml(d, spec, theta));
  EXPECT_EQ(g.size(), 7);
}

TEST(NlmlGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(202);
  for (int rep = 0; rep < 20; ++rep) {
    HyperParams theta;
    const auto spec = KernelSpec::traffic_default();
    const auto d = standardized_random(rng, 20, spec, &theta);
    const auto fd = oracle::fd_gradient([&](const Vector& x) { return nlml(d, spec, x); }, theta);
    EXPECT_LE(oracle::max_rel_error(nlml_grad(d, spec, theta), fd), 1e-4) << "rep " << rep;
  }
}

TEST(NlmlGrad, MatchesDenseOracleDifferences) {
  // Differences of the explicit-inverse NLML, independent of the Cholesky path.
  std::mt19937_64 rng(303);
  HyperParams theta;
  const auto spec = KernelSpec::se_only();
  auto d = standardized_random(rng, 15, spec, &theta);
  std::fill(d.values.begin(), d.values.end(), 0.0);
  const auto fd = oracle::fd_gradient([&](const Vector& x) { return oracle::dense_nlml(d, spec, x); }, theta);
  EXPECT_LE(oracle::max_rel_error(nlml_grad(d, spec, theta), fd), 1e-4);
}

TEST(NlmlGrad, Deterministic) {
  std::mt19937_64 rng(9);
  HyperParams theta;
  const auto spec = KernelSpec::traffic_default();
  const auto d = standardized_random(rng, 30, spec, &theta);
  const auto a = nlml_grad(d, spec, theta);
  const auto b = nlml_grad(d, spec, theta);
  for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Factorize, JitterEscalatesOnce) {
  const auto spec = KernelSpec::se_only();
  const std::vector<double> t{0.0, 0.0};
  const auto f = factorize(spec, theta_of({0.0, 0.0, kNoNoise}), t, 0.0);
  EXPECT_DOUBLE_EQ(f.jitter, 100.0 * kDefaultJitter);
  // 1 + 5e-17 rounds to 1, so the first attempt is singular.
  const auto g = factorize(spec, theta_of({0.0, 0.0, kNoNoise}), t, 5e-17);
  EXPECT_DOUBLE_EQ(g.jitter, 100.0 * 5e-17);
}

TEST(Factorize, SecondFailureIsIllConditioned) {
  const auto spec = KernelSpec::se_only();
  const std::vector<double> t{0.0, 0.0};
  try {
    factorize(spec, theta_of({20.0, 0.0, kNoNoise}), t, 1e-8);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IllConditioned);
  }
}

TEST(Optimize, MonotoneTraceOnSyntheticData) {
  std::mt19937_64 rng(31);
  HyperParams theta;
  const auto spec = KernelSpec::traffic_default();
  const auto d = standardized_random(rng, 60, spec, &theta);
  OptimConfig cfg;
  cfg.max_iters = 40;
  const auto res = optimize(d, spec, default_theta(spec), cfg);
  ASSERT_GE(res.trace.size(), 2u);
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LE(res.trace[i], res.trace[i - 1]);
  EXPECT_EQ(res.value, res.trace.back());
  EXPECT_NEAR(res.value, nlml(d, spec, res.theta), 1e-12 * std::abs(res.value));
}

TEST(Optimize, ConvergedMeansSmallGradient) {
  std::mt19937_64 rng(41);
  HyperParams theta;
  const auto spec = KernelSpec::se_only();
  const auto d = standardized_random(rng, 40, spec, &theta);
  OptimConfig cfg;
  cfg.grad_tol = 1e-5;
  const auto res = optimize(d, spec, default_theta(spec), cfg);
  ASSERT_TRUE(res.converged);
  EXPECT_LE(nlml_grad(d, spec, res.theta).lpNorm<Eigen::Infinity>(), 1e-5);
}

TEST(Optimize, RecoversNoiseLevelOfSampledData) {
  // Draw from a GP with known hyperparameters, then fit from default_theta.
  const auto spec = KernelSpec::se_only();
  const double true_noise = 0.3;
  const auto truth = theta_of({0.0, std::log(5.0), std::log(true_noise)});
  std::vector<double> t(200);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  const Eigen::LLT<Matrix> llt(gram(spec, truth, t));
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  Vector w(200);
  for (auto& x : w) x = normal(rng);
  const Vector y = llt.matrixL() * w;
  const Dataset d{t, std::vector<double>(y.data(), y.data() + y.size())};
  const auto res = optimize(d, spec, default_theta(spec));
  const double noise = std::exp(res.theta[2]);
  EXPECT_GT(noise, true_noise / 2.0);
  EXPECT_LT(noise, true_noise * 2.0);
}

TEST(Optimize, WrongThetaDimension) {
  const Dataset d{{0.0, 1.0}, {0.0, 1.0}};
  EXPECT_THROW(optimize(d, KernelSpec::se_only(), HyperParams::Zero(2)), Error);
}

TEST(Fit, DegenerateData) {
  const auto spec = KernelSpec::se_only();
  try {
    fit(Dataset{{0.0}, {5.0}}, spec, default_theta(spec));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
  try {
    fit(Dataset{{0.0, 1.0}, {3.0, 3.0}}, spec, default_theta(spec));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
}

TEST(Fit, FactorAndWeightsReproduceTheSystem) {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 5; ++rep) {
    const auto spec = KernelSpec::traffic_default();
    auto p = oracle::random_problem(rng, 40, spec);
    for (auto& v : p.data.values) v = 50.0 + 10.0 * v;
    const auto m = fit(p.data, spec, p.theta);
    const Matrix ky = gram(spec, p.theta, p.data.times, {m.jitter, true});
    EXPECT_TRUE((m.chol * m.chol.transpose()).isApprox(ky, 1e-8));
    const auto z = standardize(p.data, m.standardization);
    const Vector yz = Eigen::Map<const Vector>(z.values.data(), static_cast<Eigen::Index>(z.size()));
    EXPECT_LE((ky * m.alpha - yz).norm(), 1e-6 * yz.norm());
  }
}

TEST(Predict, MatchesDenseOracle) {
  std::mt19937_64 rng(66);
  for (int rep = 0; rep < 10; ++rep) {
    const auto spec = KernelSpec::traffic_default();
    auto p = oracle::random_problem(rng, 40, spec);
    const auto stats = compute_standardization(p.data.values);
    const auto z = standardize(p.data, stats);
    std::vector<double> query;
    for (int q = 0; q < 15; ++q) query.push_back(p.data.times.front() - 5.0 + 9.0 * q);
    const auto fast = predict_standardized(fit(p.data, spec, p.theta, stats), query, false);
    const auto slow = oracle::dense_predict(z, spec, p.theta, query);
    const double prior = oracle::kernel(spec, p.theta, 0.0, 0.0) + oracle::noise_var(spec, p.theta);
    for (std::size_t i = 0; i < query.size(); ++i) {
      EXPECT_NEAR(fast.mean[i], slow.mean[i], 1e-8 * std::max(1.0, std::abs(slow.mean[i])));
      EXPECT_NEAR(fast.variance[i], slow.variance[i], 1e-8 * prior);
    }
  }
}

TEST(Predict, DestandardizesMeanAndVariance) {
  std::mt19937_64 rng(67);
  const auto spec = KernelSpec::traffic_default();
  auto p = oracle::random_problem(rng, 30, spec);
  for (auto& v : p.data.values) v = 100.0 + 20.0 * v;
  const auto m = fit(p.data, spec, p.theta);
  const std::vector<double> q{1.0, 17.5, 90.0};
  const auto raw = predict_standardized(m, q);
  const auto out = predict(m, q);
  const auto& s = m.standardization;
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_DOUBLE_EQ(out.mean[i], raw.mean[i] * s.std + s.mean);
    EXPECT_DOUBLE_EQ(out.variance[i], raw.variance[i] * s.std * s.std);
  }
}

TEST(Predict, NoiselessInterpolation) {
  const auto spec = KernelSpec::se_only();
  const auto theta = theta_of({0.0, std::log(3.0), std::log(1e-9)});
  const Dataset d{{0.0, 2.0, 4.0, 6.0, 8.0}, {10.0, 12.0, 11.0, 9.0, 10.5}};
  const auto m = fit(d, spec, theta);
  const auto out = predict(m, d.times);
  const double sd = m.standardization.std;
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(out.mean[i], d.values[i], 1e-4 * sd);
    EXPECT_LE(out.variance[i], 1e-6 * sd * sd);
  }
}

TEST(Predict, RevertsToPriorFarAway) {
  const auto spec = KernelSpec::traffic_default();
  // Periodic amplitudes ~0, SE length-scale 1 h, sigma_f = 1, sigma_n = 0.1.
  const auto theta = theta_of({-400.0, 0.0, -400.0, 0.0, 0.0, 0.0, std::log(0.1)});
  const Dataset d{{0.0, 1.0, 2.0, 3.0}, {5.0, 7.0, 6.0, 8.0}};
  const auto m = fit(d, spec, theta);
  const auto out = predict(m, std::vector<double>{3.0 + 25.0});
  const double sd2 = m.standardization.std * m.standardization.std;
  EXPECT_NEAR(out.variance[0], (1.0 + 0.01) * sd2, 0.01 * (1.01 * sd2));
}

TEST(Predict, RawVarianceRoundOffIsTiny) {
  std::mt19937_64 rng(68);
  for (int rep = 0; rep < 10; ++rep) {
    const auto spec = KernelSpec::traffic_default();
    auto p = oracle::random_problem(rng, 40, spec);
    const auto m = fit(p.data, spec, p.theta);
    const auto out = predict_standardized(m, p.data.times, false);
    const double prior = signal_variance(spec, p.theta) + noise_variance(spec, p.theta);
    for (double v : out.variance) EXPECT_GE(v, -1e-8 * prior);
    for (double v : predict(m, p.data.times).variance) EXPECT_GE(v, 0.0);
  }
}

TEST(Predict, EmptyQueryGivesEmptyResult) {
  const auto spec = KernelSpec::se_only();
  const auto m = fit(Dataset{{0.0, 1.0}, {1.0, 2.0}}, spec, default_theta(spec));
  const auto out = predict(m, std::vector<double>{});
  EXPECT_TRUE(out.mean.empty());
  EXPECT_TRUE(out.variance.empty());
}
