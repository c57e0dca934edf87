#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "trafficgp/optimize.hpp"

using namespace trafficgp;
using Eigen::VectorXd;

namespace {

Objective shifted_square(double c) {
  return [c](const VectorXd& x, VectorXd* g) {
    if (g) *g = 2.0 * (x.array() - c).matrix();
    return (x.array() - c).square().sum();
  };
}

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST(Minimize, QuadraticMinimum) {
  const auto res = minimize(shifted_square(3.0), scalar(0.0), {});
  EXPECT_NEAR(res.theta[0], 3.0, 1e-6);
  EXPECT_TRUE(res.converged);
}

TEST(Minimize, ProxShiftsTheMinimum) {
  OptimConfig cfg;
  cfg.prox = ProxTerm{2.0, scalar(1.0)};
  const auto res = minimize(shifted_square(3.0), scalar(0.0), cfg);
  EXPECT_NEAR(res.theta[0], 2.0, 1e-6);
  // Reported value includes the prox term: (2-3)^2 + (2-1)^2 = 2.
  EXPECT_NEAR(res.value, 2.0, 1e-10);
}

TEST(Minimize, RosenbrockIsMonotone) {
  const Objective rosen = [](const VectorXd& x, VectorXd* g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    if (g) {
      g->resize(2);
      (*g)[0] = -2.0 * a - 400.0 * x[0] * b;
      (*g)[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  VectorXd x0(2);
  x0 << -1.2, 1.0;
  OptimConfig cfg;
  cfg.max_iters = 500;
  cfg.grad_tol = 1e-8;
  const auto res = minimize(rosen, x0, cfg);
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LE(res.trace[i], res.trace[i - 1]);
  EXPECT_NEAR(res.theta[0], 1.0, 1e-4);
  EXPECT_NEAR(res.theta[1], 1.0, 1e-4);
}

TEST(Minimize, MaxItersIsRespected) {
  OptimConfig cfg;
  cfg.max_iters = 1;
  const auto res = minimize(shifted_square(3.0), scalar(-100.0), cfg);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_EQ(res.trace.size(), 2u);
}

TEST(Minimize, NonFiniteStartIsInvalidStart) {
  const Objective bad = [](const VectorXd&, VectorXd* g) {
    if (g) *g = VectorXd::Zero(1);
    return std::numeric_limits<double>::quiet_NaN();
  };
  try {
    minimize(bad, scalar(0.0), {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidStart);
  }
}

TEST(Minimize, ThrowingStartIsInvalidStart) {
  const Objective bad = [](const VectorXd&, VectorXd*) -> double { throw Error(ErrorCode::IllConditioned, "x"); };
  try {
    minimize(bad, scalar(0.0), {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidStart);
  }
}

TEST(Minimize, InfeasibleTrialPointsAreRejected) {
  // Objective undefined for x < 0; unconstrained minimum at -1.
  const Objective f = [](const VectorXd& x, VectorXd* g) {
    if (x[0] < 0.0) throw Error(ErrorCode::IllConditioned, "outside domain");
    if (g) *g = scalar(2.0 * (x[0] + 1.0));
    return (x[0] + 1.0) * (x[0] + 1.0);
  };
  const auto res = minimize(f, scalar(2.0), {});
  EXPECT_GE(res.theta[0], 0.0);
  EXPECT_LT(res.theta[0], 1e-3);
}

TEST(Minimize, ConfigValidation) {
  OptimConfig cfg;
  cfg.backtrack = 1.0;
  EXPECT_THROW(minimize(shifted_square(0.0), scalar(1.0), cfg), Error);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(minimize(shifted_square(0.0), scalar(1.0), cfg), Error);
  cfg = {};
  cfg.prox = ProxTerm{1.0, VectorXd::Zero(2)};
  try {
    minimize(shifted_square(0.0), scalar(1.0), cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParameterShape);
  }
}
