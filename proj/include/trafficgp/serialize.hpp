#pragma once

// JSON forms of the configuration and data types, shared by the wire
// protocol and the CLI run config. Readers reject unknown keys.

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficgp/admm.hpp"
#include "trafficgp/dataset.hpp"
#include "trafficgp/errors.hpp"
#include "trafficgp/kernel.hpp"
#include "trafficgp/optimize.hpp"
#include "trafficgp/traffic.hpp"

namespace trafficgp {

using json = nlohmann::json;

/// Strict reader over one JSON object: every key must be consumed or
/// finish() reports it as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where, ErrorCode code = ErrorCode::Config)
      : j_(j), where_(std::move(where)), code_(code) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    if (!j_.contains(key)) fail("missing key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number()) fail("'" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail("'" + key + "' must be finite");
    return d;
  }

  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      fail("'" + key + "' out of range");
    }
    return v.get<std::int64_t>();
  }

  /// Non-negative integer over the full 64-bit unsigned range.
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail("'" + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) { return has(key) ? integer(key) : fallback; }

  std::string string(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_string()) fail("'" + key + "' must be a string");
    return v.get<std::string>();
  }

  std::string string(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_boolean()) fail("'" + key + "' must be a boolean");
    return v.get<bool>();
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) fail("unknown key '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw Error(code_, where_ + ": " + msg); }

  [[nodiscard]] const std::string& where() const { return where_; }
  [[nodiscard]] ErrorCode code() const { return code_; }

 private:
  const json& j_;
  std::string where_;
  ErrorCode code_;
  std::set<std::string> seen_;
};

inline json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline std::vector<double> doubles_from_json(const json& j, const std::string& where, ErrorCode code = ErrorCode::Config) {
  if (!j.is_array()) throw Error(code, where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw Error(code, where + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline Vector vector_from_json(const json& j, const std::string& where, ErrorCode code = ErrorCode::Config) {
  const auto d = doubles_from_json(j, where, code);
  return Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
}

inline json to_json(const OptimConfig& c) {
  return {{"max_iters", c.max_iters}, {"grad_tol", c.grad_tol}, {"backtrack", c.backtrack}, {"armijo", c.armijo}};
}

inline OptimConfig optim_config_from_json(const json& j, OptimConfig base, const std::string& where,
                                          ErrorCode code = ErrorCode::Config) {
  ObjectReader r(j, where, code);
  base.max_iters = static_cast<int>(r.integer("max_iters", base.max_iters));
  base.grad_tol = r.number("grad_tol", base.grad_tol);
  base.backtrack = r.number("backtrack", base.backtrack);
  base.armijo = r.number("armijo", base.armijo);
  r.finish();
  try {
    base.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return base;
}

inline json to_json(const AdmmConfig& c) {
  return {{"k_workers", c.k_workers},  {"rho", c.rho},           {"max_outer", c.max_outer},
          {"eps_abs", c.eps_abs},      {"eps_rel", c.eps_rel},   {"inner", to_json(c.inner)},
          {"partition", std::string(to_string(c.partition))}, {"seed", c.seed},
          {"adaptive_rho", c.adaptive_rho}, {"balance_mu", c.balance_mu}, {"balance_tau", c.balance_tau},
          {"relaxation", c.relaxation}, {"fixed_iterations", c.fixed_iterations}};
}

inline AdmmConfig admm_config_from_json(const json& j, const std::string& where, ErrorCode code = ErrorCode::Config) {
  ObjectReader r(j, where, code);
  AdmmConfig c;
  c.k_workers = static_cast<int>(r.integer("k_workers", c.k_workers));
  c.rho = r.number("rho", c.rho);
  c.max_outer = static_cast<int>(r.integer("max_outer", c.max_outer));
  c.eps_abs = r.number("eps_abs", c.eps_abs);
  c.eps_rel = r.number("eps_rel", c.eps_rel);
  if (r.has("inner")) c.inner = optim_config_from_json(r.at("inner"), c.inner, where + ".inner", code);
  const auto p = r.string("partition", "strided");
  if (p == "strided") {
    c.partition = PartitionScheme::Strided;
  } else if (p == "block") {
    c.partition = PartitionScheme::Block;
  } else {
    r.fail("partition must be 'strided' or 'block'");
  }
  c.seed = r.unsigned_integer("seed", 0);
  c.adaptive_rho = r.boolean("adaptive_rho", c.adaptive_rho);
  c.balance_mu = r.number("balance_mu", c.balance_mu);
  c.balance_tau = r.number("balance_tau", c.balance_tau);
  c.relaxation = r.number("relaxation", c.relaxation);
  c.fixed_iterations = r.boolean("fixed_iterations", c.fixed_iterations);
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return c;
}

inline json to_json(const TrafficConfig& c) {
  return {{"n_points", c.n_points},
          {"dt_hours", c.dt_hours},
          {"offset", c.offset},
          {"weekly_amp", c.weekly_amp},
          {"daily_amp", c.daily_amp},
          {"smooth_noise_sigma", c.smooth_noise_sigma},
          {"smooth_noise_lengthscale_hours", c.smooth_noise_lengthscale_hours},
          {"white_noise_sigma", c.white_noise_sigma},
          {"seed", c.seed}};
}

inline TrafficConfig traffic_config_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  TrafficConfig c;
  const auto n = r.integer("n_points", static_cast<std::int64_t>(c.n_points));
  if (n < 2) r.fail("n_points must be >= 2");
  c.n_points = static_cast<std::size_t>(n);
  c.dt_hours = r.number("dt_hours", c.dt_hours);
  c.offset = r.number("offset", c.offset);
  c.weekly_amp = r.number("weekly_amp", c.weekly_amp);
  c.daily_amp = r.number("daily_amp", c.daily_amp);
  c.smooth_noise_sigma = r.number("smooth_noise_sigma", c.smooth_noise_sigma);
  c.smooth_noise_lengthscale_hours = r.number("smooth_noise_lengthscale_hours", c.smooth_noise_lengthscale_hours);
  c.white_noise_sigma = r.number("white_noise_sigma", c.white_noise_sigma);
  c.seed = r.unsigned_integer("seed", 0);
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return c;
}

inline json to_json(const Standardization& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline Standardization standardization_from_json(const json& j, const std::string& where, ErrorCode code) {
  ObjectReader r(j, where, code);
  Standardization s{r.number("mean"), r.number("std")};
  r.finish();
  if (!(s.std > 0.0)) r.fail("std must be > 0");
  return s;
}

inline json to_json(const Shard& s) {
  return {{"worker_id", s.worker_id}, {"indices", s.indices}, {"times", s.data.times}, {"values", s.data.values}};
}

inline Shard shard_from_json(const json& j, const std::string& where, ErrorCode code) {
  ObjectReader r(j, where, code);
  Shard s;
  s.worker_id = static_cast<int>(r.integer("worker_id"));
  const auto& idx = r.at("indices");
  if (!idx.is_array()) r.fail("indices must be an array");
  for (const auto& i : idx) {
    if (!i.is_number_unsigned()) r.fail("indices must be non-negative integers");
    s.indices.push_back(i.get<std::size_t>());
  }
  s.data.times = doubles_from_json(r.at("times"), where + ".times", code);
  s.data.values = doubles_from_json(r.at("values"), where + ".values", code);
  r.finish();
  if (s.data.times.size() != s.data.values.size() || s.indices.size() != s.data.times.size()) {
    r.fail("indices/times/values lengths differ");
  }
  return s;
}

}  // namespace trafficgp
