#pragma once

// Composite stationary covariance for hourly traffic series: a sum of
// squared-exponential and periodic (exp-sine-squared) terms, with
// observation noise entering only on the Gram diagonal.
//
// Hyperparameters live in log-domain. Packing order follows the term order:
//   [log amplitude, log length-scale] per term, then log noise std.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficgp/errors.hpp"

namespace trafficgp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Log-domain hyperparameter vector (see packing order above).
using HyperParams = Eigen::VectorXd;

enum class TermKind { SquaredExponential, Periodic };

struct KernelTerm {
  TermKind kind = TermKind::SquaredExponential;
  double period_hours = 0.0;  // Periodic only; fixed, not learned

  static KernelTerm se() { return {TermKind::SquaredExponential, 0.0}; }
  static KernelTerm periodic(double period) { return {TermKind::Periodic, period}; }

  friend bool operator==(const KernelTerm&, const KernelTerm&) = default;
};

class KernelSpec {
 public:
  KernelSpec() = default;

  explicit KernelSpec(std::vector<KernelTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw Error(ErrorCode::ParameterShape, "kernel spec needs at least one term");
    for (const auto& t : terms_) {
      if (t.kind == TermKind::Periodic && !(t.period_hours > 0.0 && std::isfinite(t.period_hours))) {
        throw Error(ErrorCode::ParameterShape, "periodic term needs period_hours > 0");
      }
    }
  }

  /// Weekly periodic + daily periodic + squared exponential.
  static KernelSpec traffic_default() {
    return KernelSpec({KernelTerm::periodic(168.0), KernelTerm::periodic(24.0), KernelTerm::se()});
  }
  static KernelSpec se_only() { return KernelSpec({KernelTerm::se()}); }

  [[nodiscard]] const std::vector<KernelTerm>& terms() const noexcept { return terms_; }
  [[nodiscard]] std::size_t num_terms() const noexcept { return terms_.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return 2 * terms_.size() + 1; }
  [[nodiscard]] std::size_t amplitude_index(std::size_t term) const noexcept { return 2 * term; }
  [[nodiscard]] std::size_t lengthscale_index(std::size_t term) const noexcept { return 2 * term + 1; }
  [[nodiscard]] std::size_t noise_index() const noexcept { return 2 * terms_.size(); }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

 private:
  std::vector<KernelTerm> terms_;
};

struct GramOptions {
  double jitter = 1e-8;
  bool include_noise = true;
};

inline void check_theta(const KernelSpec& spec, const HyperParams& theta) {
  if (static_cast<std::size_t>(theta.size()) != spec.dim()) {
    throw Error(ErrorCode::ParameterShape, "theta has dimension " + std::to_string(theta.size()) +
                                               ", kernel expects " + std::to_string(spec.dim()));
  }
  if (!theta.allFinite()) throw Error(ErrorCode::ParameterShape, "theta has non-finite entries");
}

inline double noise_variance(const KernelSpec& spec, const HyperParams& theta) {
  const double sn = std::exp(theta[static_cast<Eigen::Index>(spec.noise_index())]);
  return sn * sn;
}

namespace detail {

// Value of one term at lag r plus its derivative w.r.t. log length-scale.
// The log-amplitude derivative is always 2*value.
struct TermEval {
  double value;
  double dlog_length;
};

inline TermEval eval_term(const KernelTerm& term, double amp2, double ell, double r) {
  if (term.kind == TermKind::SquaredExponential) {
    const double q = (r * r) / (ell * ell);
    const double v = amp2 * std::exp(-0.5 * q);
    return {v, v * q};
  }
  const double s = std::sin(std::numbers::pi * r / term.period_hours);
  const double q = 4.0 * s * s / (ell * ell);
  const double v = amp2 * std::exp(-0.5 * q);
  return {v, v * q};
}

struct TermParams {
  double amp2;
  double ell;
};

inline std::vector<TermParams> unpack(const KernelSpec& spec, const HyperParams& theta) {
  std::vector<TermParams> out;
  out.reserve(spec.num_terms());
  for (std::size_t t = 0; t < spec.num_terms(); ++t) {
    const double a = std::exp(theta[static_cast<Eigen::Index>(spec.amplitude_index(t))]);
    const double l = std::exp(theta[static_cast<Eigen::Index>(spec.lengthscale_index(t))]);
    out.push_back({a * a, l});
  }
  return out;
}

inline double eval_unpacked(const KernelSpec& spec, std::span<const TermParams> p, double r) {
  double sum = 0.0;
  for (std::size_t t = 0; t < spec.num_terms(); ++t) sum += eval_term(spec.terms()[t], p[t].amp2, p[t].ell, r).value;
  return sum;
}

}  // namespace detail

/// Sum of the non-noise terms at (t1, t2).
inline double eval_kernel(const KernelSpec& spec, const HyperParams& theta, double t1, double t2) {
  check_theta(spec, theta);
  const auto p = detail::unpack(spec, theta);
  return detail::eval_unpacked(spec, p, std::abs(t1 - t2));
}

/// Prior variance of the latent function, k(t, t).
inline double signal_variance(const KernelSpec& spec, const HyperParams& theta) {
  check_theta(spec, theta);
  double sum = 0.0;
  for (const auto& tp : detail::unpack(spec, theta)) sum += tp.amp2;
  return sum;
}

/// Cross-covariance between two sets of time points (no noise, no jitter).
inline Matrix cross_gram(const KernelSpec& spec, const HyperParams& theta, std::span<const double> a,
                         std::span<const double> b) {
  check_theta(spec, theta);
  const auto p = detail::unpack(spec, theta);
  Matrix out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          detail::eval_unpacked(spec, p, std::abs(a[i] - b[j]));
    }
  }
  return out;
}

/// K_y = K + (sigma_n^2 if include_noise) I + jitter I. The upper triangle is
/// computed and mirrored so the result is exactly symmetric.
inline Matrix gram(const KernelSpec& spec, const HyperParams& theta, std::span<const double> times,
                   const GramOptions& opts = {}) {
  if (times.empty()) throw Error(ErrorCode::EmptyInput, "gram: no time points");
  if (opts.jitter < 0.0) throw Error(ErrorCode::ParameterShape, "gram: jitter must be >= 0");
  check_theta(spec, theta);
  const auto p = detail::unpack(spec, theta);
  const auto n = static_cast<Eigen::Index>(times.size());
  Matrix k(n, n);
  const double diag_extra = (opts.include_noise ? noise_variance(spec, theta) : 0.0) + opts.jitter;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      const double v = detail::eval_unpacked(spec, p, std::abs(times[i] - times[j]));
      k(i, j) = v;
      k(j, i) = v;
    }
    k(j, j) = detail::eval_unpacked(spec, p, 0.0) + diag_extra;
  }
  return k;
}

/// dK_y / d theta[index], with theta in log-domain.
inline Matrix gram_grad(const KernelSpec& spec, const HyperParams& theta, std::span<const double> times,
                        std::size_t index) {
  check_theta(spec, theta);
  if (index >= spec.dim()) {
    throw Error(ErrorCode::ParameterShape, "gram_grad: index " + std::to_string(index) + " out of range");
  }
  if (times.empty()) throw Error(ErrorCode::EmptyInput, "gram_grad: no time points");
  const auto n = static_cast<Eigen::Index>(times.size());
  if (index == spec.noise_index()) {
    return Matrix::Identity(n, n) * (2.0 * noise_variance(spec, theta));
  }
  const auto p = detail::unpack(spec, theta);
  const std::size_t term = index / 2;
  const bool amplitude = (index % 2) == 0;
  const auto& kt = spec.terms()[term];
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const auto e = detail::eval_term(kt, p[term].amp2, p[term].ell, std::abs(times[i] - times[j]));
      const double v = amplitude ? 2.0 * e.value : e.dlog_length;
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

/// Unit amplitudes, SE length-scale 24 h, periodic length-scales 1, noise std 0.1.
inline HyperParams default_theta(const KernelSpec& spec) {
  HyperParams theta = HyperParams::Zero(static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t t = 0; t < spec.num_terms(); ++t) {
    theta[static_cast<Eigen::Index>(spec.lengthscale_index(t))] =
        spec.terms()[t].kind == TermKind::SquaredExponential ? std::log(24.0) : 0.0;
  }
  theta[static_cast<Eigen::Index>(spec.noise_index())] = std::log(0.1);
  return theta;
}

// JSON form: {"terms":[{"kind":"periodic","period_hours":168.0},{"kind":"se"}]}

inline nlohmann::json to_json(const KernelSpec& spec) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : spec.terms()) {
    if (t.kind == TermKind::Periodic) {
      terms.push_back({{"kind", "periodic"}, {"period_hours", t.period_hours}});
    } else {
      terms.push_back({{"kind", "se"}});
    }
  }
  return {{"terms", terms}};
}

inline KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "kernel: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "terms") throw Error(ErrorCode::Config, "kernel: unknown key '" + key + "'");
  }
  if (!j.contains("terms") || !j["terms"].is_array()) throw Error(ErrorCode::Config, "kernel: 'terms' must be an array");
  std::vector<KernelTerm> terms;
  for (const auto& t : j["terms"]) {
    if (!t.is_object() || !t.contains("kind") || !t["kind"].is_string()) {
      throw Error(ErrorCode::Config, "kernel: each term needs a string 'kind'");
    }
    const auto kind = t["kind"].get<std::string>();
    if (kind == "se") {
      for (const auto& [key, _] : t.items()) {
        if (key != "kind") throw Error(ErrorCode::Config, "kernel: unknown key '" + key + "' in se term");
      }
      terms.push_back(KernelTerm::se());
    } else if (kind == "periodic") {
      for (const auto& [key, _] : t.items()) {
        if (key != "kind" && key != "period_hours") {
          throw Error(ErrorCode::Config, "kernel: unknown key '" + key + "' in periodic term");
        }
      }
      if (!t.contains("period_hours") || !t["period_hours"].is_number()) {
        throw Error(ErrorCode::Config, "kernel: periodic term needs numeric 'period_hours'");
      }
      terms.push_back(KernelTerm::periodic(t["period_hours"].get<double>()));
    } else {
      throw Error(ErrorCode::Config, "kernel: unknown term kind '" + kind + "'");
    }
  }
  try {
    return KernelSpec(std::move(terms));
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("kernel: ") + e.what());
  }
}

}  // namespace trafficgp
