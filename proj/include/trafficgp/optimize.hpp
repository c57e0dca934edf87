#pragma once

// Monotone first-order minimizer used for both centralized hyperparameter
// training and the ADMM local subproblems. Directions come from limited
// memory BFGS; every step is accepted only under the Armijo condition of a
// backtracking line search, so the objective never increases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "trafficgp/errors.hpp"

namespace trafficgp {

/// Adds (rho/2) * ||theta - anchor||^2 to the objective.
struct ProxTerm {
  double rho = 1.0;
  Eigen::VectorXd anchor;
};

struct OptimConfig {
  int max_iters = 200;
  double grad_tol = 1e-5;
  double backtrack = 0.5;
  double armijo = 1e-4;
  std::optional<ProxTerm> prox;

  void validate() const {
    if (max_iters < 1) throw Error(ErrorCode::Config, "optim: max_iters must be >= 1");
    if (!(grad_tol > 0.0)) throw Error(ErrorCode::Config, "optim: grad_tol must be > 0");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw Error(ErrorCode::Config, "optim: backtrack must be in (0,1)");
    if (!(armijo > 0.0 && armijo < 1.0)) throw Error(ErrorCode::Config, "optim: armijo must be in (0,1)");
    if (prox && !(prox->rho > 0.0)) throw Error(ErrorCode::Config, "optim: prox rho must be > 0");
  }
};

/// Returns f(theta); writes the gradient when `grad` is non-null. May throw
/// trafficgp::Error for infeasible points (treated as +inf off the start).
using Objective = std::function<double(const Eigen::VectorXd& theta, Eigen::VectorXd* grad)>;

struct OptimResult {
  Eigen::VectorXd theta;
  double value = 0.0;  // including the prox term, if any
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step, trace[0] at theta0
};

inline Objective with_prox(Objective f, const std::optional<ProxTerm>& prox) {
  if (!prox) return f;
  return [f = std::move(f), p = *prox](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const Eigen::VectorXd d = x - p.anchor;
    double v = f(x, g);
    if (g) *g += p.rho * d;
    return v + 0.5 * p.rho * d.squaredNorm();
  };
}

namespace detail {

inline double safe_eval(const Objective& f, const Eigen::VectorXd& x, Eigen::VectorXd* g) {
  try {
    const double v = f(x, g);
    if (!std::isfinite(v) || (g && !g->allFinite())) return std::numeric_limits<double>::infinity();
    return v;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

inline OptimResult minimize(const Objective& objective, const Eigen::VectorXd& theta0, const OptimConfig& cfg) {
  cfg.validate();
  if (cfg.prox && cfg.prox->anchor.size() != theta0.size()) {
    throw Error(ErrorCode::ParameterShape, "optim: prox anchor dimension mismatch");
  }
  const Objective f = with_prox(objective, cfg.prox);

  constexpr int kMemory = 10;
  constexpr double kMaxStep = 2.0;  // cap on the infinity-norm of a single step
  constexpr int kMaxHalvings = 30;
  // Relative decrease below which a step counts as stalled; the gradient of
  // an ill-conditioned NLML is itself only accurate to a few digits. A single
  // small step is normal near a minimum with a large objective value, so the
  // run stops after kStallSteps of them in a row.
  constexpr double kStallRel = 1e-13;
  constexpr int kStallSteps = 3;
  int stalled = 0;

  OptimResult res;
  res.theta = theta0;
  Eigen::VectorXd g(theta0.size());
  try {
    res.value = f(theta0, &g);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidStart, std::string("optim: objective failed at start: ") + e.what());
  }
  if (!std::isfinite(res.value) || !g.allFinite()) {
    throw Error(ErrorCode::InvalidStart, "optim: non-finite objective at start");
  }
  res.trace.push_back(res.value);

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)
  Eigen::VectorXd x_new(theta0.size());
  Eigen::VectorXd g_new(theta0.size());

  while (res.iterations < cfg.max_iters) {
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> alphas(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      const auto& [s, y] = memory[i];
      alphas[i] = s.dot(q) / y.dot(s);
      q -= alphas[i] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double beta = y.dot(q) / y.dot(s);
      q += (alphas[i] - beta) * s;
    }
    Eigen::VectorXd dir = -q;
    if (!(dir.dot(g) < 0.0) || !dir.allFinite()) {
      memory.clear();
      dir = -g;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (memory.empty()) break;  // already steepest descent
        memory.clear();
        dir = -g;
      }
      double step = 1.0;
      if (memory.empty()) step = std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>());
      const double dinf = dir.lpNorm<Eigen::Infinity>();
      if (step * dinf > kMaxStep) step = kMaxStep / dinf;
      const double slope = g.dot(dir);
      for (int h = 0; h < kMaxHalvings; ++h, step *= cfg.backtrack) {
        x_new = res.theta + step * dir;
        // Trial points need the value only; the gradient is taken once a
        // step passes the sufficient-decrease test.
        double v = detail::safe_eval(f, x_new, nullptr);
        if (v <= res.value + cfg.armijo * step * slope) {
          v = detail::safe_eval(f, x_new, &g_new);
          if (!(v <= res.value + cfg.armijo * step * slope)) continue;
          Eigen::VectorXd s = x_new - res.theta;
          Eigen::VectorXd y = g_new - g;
          if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            memory.emplace_back(std::move(s), std::move(y));
            if (memory.size() > kMemory) memory.pop_front();
          }
          res.theta = x_new;
          res.value = v;
          g = g_new;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;  // no descent possible at working precision
    ++res.iterations;
    const double decrease = res.trace.back() - res.value;
    res.trace.push_back(res.value);
    stalled = decrease <= kStallRel * std::max(1.0, std::abs(res.value)) ? stalled + 1 : 0;
    if (stalled >= kStallSteps) break;
  }
  if (!res.converged && g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) res.converged = true;
  return res;
}

}  // namespace trafficgp
