#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "trafficgp/kernel.hpp"

using namespace trafficgp;

namespace {

HyperParams theta_of(std::initializer_list<double> values) {
  HyperParams t(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) t[i++] = v;
  return t;
}

KernelSpec periodic_only(double p) { return KernelSpec({KernelTerm::periodic(p)}); }

}  // namespace

TEST(Kernel, SquaredExponentialFrozenValues) {
  const auto spec = KernelSpec::se_only();
  const auto theta = theta_of({0.0, 0.0, std::log(0.1)});
  EXPECT_DOUBLE_EQ(eval_kernel(spec, theta, 3.0, 3.0), 1.0);
  EXPECT_NEAR(eval_kernel(spec, theta, 0.0, 1.0), 0.6065306597126334, 1e-15);
}

TEST(Kernel, PeriodicFullPeriodIsOne) {
  const auto spec = periodic_only(24.0);
  const auto theta = theta_of({0.0, 0.0, 0.0});
  EXPECT_NEAR(eval_kernel(spec, theta, 0.0, 24.0), 1.0, 1e-15);
  // Half period: sin^2 = 1, exp(-2).
  EXPECT_NEAR(eval_kernel(spec, theta, 0.0, 12.0), 0.1353352832366127, 1e-15);
}

TEST(Kernel, NoiseIsNotPartOfEvalKernel) {
  const auto spec = KernelSpec::se_only();
  const auto theta = theta_of({std::log(2.0), 0.0, std::log(5.0)});
  EXPECT_DOUBLE_EQ(eval_kernel(spec, theta, 1.0, 1.0), 4.0);
}

TEST(Kernel, ZeroLagEqualsSumOfAmplitudes) {
  const auto spec = KernelSpec::traffic_default();
  const auto theta = theta_of({std::log(1.5), 0.2, std::log(0.5), -0.1, std::log(2.0), 3.0, -2.0});
  EXPECT_DOUBLE_EQ(eval_kernel(spec, theta, 7.0, 7.0), signal_variance(spec, theta));
  EXPECT_NEAR(signal_variance(spec, theta), 2.25 + 0.25 + 4.0, 1e-14);
}

TEST(Kernel, MatchesTextbookOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  for (int rep = 0; rep < 50; ++rep) {
    auto p = oracle::random_problem(rng, 2, KernelSpec::traffic_default());
    const double a = u(rng);
    const double b = u(rng);
    EXPECT_NEAR(eval_kernel(p.spec, p.theta, a, b), oracle::kernel(p.spec, p.theta, a, b), 1e-12);
  }
}

TEST(Kernel, SymmetricAndStationary) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int rep = 0; rep < 100; ++rep) {
    auto p = oracle::random_problem(rng, 2, KernelSpec::traffic_default());
    const double a = u(rng);
    const double b = u(rng);
    const double c = u(rng);
    EXPECT_EQ(eval_kernel(p.spec, p.theta, a, b), eval_kernel(p.spec, p.theta, b, a));
    EXPECT_NEAR(eval_kernel(p.spec, p.theta, a, b), eval_kernel(p.spec, p.theta, a + c, b + c), 1e-12);
  }
}

TEST(Kernel, WrongThetaDimensionIsParameterShapeError) {
  const auto spec = KernelSpec::traffic_default();
  try {
    eval_kernel(spec, HyperParams::Zero(3), 0.0, 1.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParameterShape);
  }
}

TEST(Kernel, PeriodicTermNeedsPositivePeriod) {
  EXPECT_THROW(KernelSpec({KernelTerm::periodic(0.0)}), Error);
  EXPECT_THROW(KernelSpec(std::vector<KernelTerm>{}), Error);
}

TEST(Gram, SinglePointWithJitter) {
  const auto spec = KernelSpec::se_only();
  // sigma_n = 0 is not representable in log-domain; use a negligible one.
  const auto theta = theta_of({0.0, 0.0, -400.0});
  const std::vector<double> t{0.0};
  const auto k = gram(spec, theta, t, {1e-8, true});
  ASSERT_EQ(k.rows(), 1);
  EXPECT_DOUBLE_EQ(k(0, 0), 1.0 + 1e-8);
}

TEST(Gram, ExactlySymmetric) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = oracle::random_problem(rng, 25, KernelSpec::traffic_default());
    const auto k = gram(p.spec, p.theta, p.data.times);
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      for (Eigen::Index j = 0; j < k.cols(); ++j) ASSERT_EQ(k(i, j), k(j, i));
    }
  }
}

TEST(Gram, DiagonalCarriesNoiseAndJitter) {
  const auto spec = KernelSpec::traffic_default();
  const auto theta = default_theta(spec);
  const std::vector<double> t{0.0, 1.0, 2.0};
  const auto with = gram(spec, theta, t, {1e-6, true});
  const auto without = gram(spec, theta, t, {0.0, false});
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(with(i, i) - without(i, i), 0.01 + 1e-6, 1e-15);
  EXPECT_EQ(with(0, 1), without(0, 1));
}

TEST(Gram, CholeskySucceedsOnRandomConfigs) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    auto p = oracle::random_problem(rng, 30, KernelSpec::traffic_default());
    const Eigen::LLT<Matrix> llt(gram(p.spec, p.theta, p.data.times, {1e-8, true}));
    EXPECT_EQ(llt.info(), Eigen::Success) << "rep " << rep;
  }
}

TEST(Gram, EmptyTimesIsError) {
  const std::vector<double> none;
  try {
    gram(KernelSpec::se_only(), default_theta(KernelSpec::se_only()), none);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(GramGrad, AmplitudeDerivativeIsTwiceTheTerm) {
  const auto spec = KernelSpec::se_only();
  const auto theta = theta_of({0.3, 1.2, -1.0});
  const std::vector<double> t{0.0, 0.7, 3.1};
  const auto g = gram_grad(spec, theta, t, 0);
  const auto k = gram(spec, theta, t, {0.0, false});
  EXPECT_TRUE(g.isApprox(2.0 * k, 1e-14));
}

TEST(GramGrad, NoiseDerivativeIsDiagonal) {
  const auto spec = KernelSpec::se_only();
  const auto theta = theta_of({0.0, 0.0, std::log(0.5)});
  const std::vector<double> t{0.0, 1.0, 2.0};
  const auto g = gram_grad(spec, theta, t, spec.noise_index());
  EXPECT_TRUE(g.isApprox(Matrix::Identity(3, 3) * 0.5, 1e-15));
}

TEST(GramGrad, MatchesFiniteDifferencesOfGram) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = oracle::random_problem(rng, 20, KernelSpec::traffic_default());
    for (std::size_t j = 0; j < p.spec.dim(); ++j) {
      const double h = 1e-5;
      HyperParams tp = p.theta;
      HyperParams tm = p.theta;
      tp[static_cast<Eigen::Index>(j)] += h;
      tm[static_cast<Eigen::Index>(j)] -= h;
      const Matrix fd = (gram(p.spec, tp, p.data.times) - gram(p.spec, tm, p.data.times)) / (2.0 * h);
      const Matrix an = gram_grad(p.spec, p.theta, p.data.times, j);
      const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-3);
      EXPECT_LE((fd - an).cwiseAbs().maxCoeff() / scale, 1e-4) << "rep " << rep << " index " << j;
    }
  }
}

TEST(GramGrad, IndexOutOfRange) {
  const auto spec = KernelSpec::se_only();
  const std::vector<double> t{0.0};
  EXPECT_THROW(gram_grad(spec, default_theta(spec), t, 3), Error);
}

TEST(DefaultTheta, Layout) {
  const auto composite = default_theta(KernelSpec::traffic_default());
  ASSERT_EQ(composite.size(), 7);
  EXPECT_EQ(composite[0], 0.0);
  EXPECT_EQ(composite[1], 0.0);
  EXPECT_EQ(composite[4], 0.0);
  EXPECT_DOUBLE_EQ(composite[5], std::log(24.0));
  EXPECT_DOUBLE_EQ(composite[6], std::log(0.1));
  EXPECT_EQ(default_theta(KernelSpec::se_only()).size(), 3);
  EXPECT_EQ(default_theta(KernelSpec::traffic_default()), composite);
}

TEST(KernelJson, RoundTripAndStrictness) {
  const auto spec = KernelSpec::traffic_default();
  const auto j = to_json(spec);
  EXPECT_EQ(j.dump(),
            R"({"terms":[{"kind":"periodic","period_hours":168.0},{"kind":"periodic","period_hours":24.0},{"kind":"se"}]})");
  EXPECT_EQ(kernel_spec_from_json(j), spec);
  EXPECT_THROW(kernel_spec_from_json(nlohmann::json::parse(R"({"terms":[{"kind":"se"}],"extra":1})")), Error);
  EXPECT_THROW(kernel_spec_from_json(nlohmann::json::parse(R"({"terms":[{"kind":"matern"}]})")), Error);
  EXPECT_THROW(kernel_spec_from_json(nlohmann::json::parse(R"({"terms":[{"kind":"periodic"}]})")), Error);
}
