#pragma once

// Synthetic hourly traffic with weekly and daily seasonality, CSV I/O,
// chronological splitting and forecast metrics.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "trafficgp/dataset.hpp"
#include "trafficgp/errors.hpp"

namespace trafficgp {

struct TrafficConfig {
  std::size_t n_points = 700;
  double dt_hours = 1.0;
  double offset = 10.0;
  double weekly_amp = 3.0;
  double daily_amp = 2.0;
  double smooth_noise_sigma = 0.5;
  double smooth_noise_lengthscale_hours = 6.0;
  double white_noise_sigma = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_points < 2) throw Error(ErrorCode::Config, "traffic: n_points must be >= 2");
    if (!(dt_hours > 0.0)) throw Error(ErrorCode::Config, "traffic: dt_hours must be > 0");
    if (!(offset > 0.0)) throw Error(ErrorCode::Config, "traffic: offset must be > 0");
    if (smooth_noise_sigma < 0.0 || white_noise_sigma < 0.0) throw Error(ErrorCode::Config, "traffic: sigmas must be >= 0");
    if (!(smooth_noise_lengthscale_hours > 0.0)) throw Error(ErrorCode::Config, "traffic: smooth length-scale must be > 0");
  }
};

/// y(t) = offset + weekly_amp sin(2 pi t / 168) + daily_amp sin(2 pi t / 24)
///        + smooth SE-GP draw + white noise, with t_i = i * dt_hours.
inline Dataset generate_traffic(const TrafficConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_points;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset d;
  d.times.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.times[i] = static_cast<double>(i) * cfg.dt_hours;

  Eigen::VectorXd smooth = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (cfg.smooth_noise_sigma > 0.0) {
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd k(ni, ni);
    const double ell = cfg.smooth_noise_lengthscale_hours;
    for (Eigen::Index j = 0; j < ni; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double r = d.times[static_cast<std::size_t>(i)] - d.times[static_cast<std::size_t>(j)];
        k(i, j) = k(j, i) = std::exp(-0.5 * r * r / (ell * ell));
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (double jitter = 1e-8; jitter <= 1e-2; jitter *= 100.0) {
      llt.compute(k + jitter * Eigen::MatrixXd::Identity(ni, ni));
      if (llt.info() == Eigen::Success) break;
    }
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::IllConditioned, "traffic: smooth-noise Gram not factorizable");
    Eigen::VectorXd w(ni);
    for (Eigen::Index i = 0; i < ni; ++i) w[i] = normal(rng);
    smooth = llt.matrixL() * w;
    smooth *= cfg.smooth_noise_sigma;
  }

  d.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = d.times[i];
    const double white = normal(rng);
    d.values[i] = cfg.offset + cfg.weekly_amp * std::sin(2.0 * std::numbers::pi * t / 168.0) +
                  cfg.daily_amp * std::sin(2.0 * std::numbers::pi * t / 24.0) +
                  smooth[static_cast<Eigen::Index>(i)] + cfg.white_noise_sigma * white;
  }
  return d;
}

// CSV: header "time_h,value", then one row per point, 17 significant digits.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const Dataset& d) {
  os << "time_h,value\n";
  for (std::size_t i = 0; i < d.size(); ++i) os << format_double(d.times[i]) << ',' << format_double(d.values[i]) << '\n';
}

inline void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_csv(f, d);
  if (!f) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

namespace detail {

inline double parse_field(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::Format, "line " + std::to_string(line) + ": non-numeric field '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline Dataset read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::Format, "line 1: missing header 'time_h,value'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_h,value") throw Error(ErrorCode::Format, "line 1: missing header 'time_h,value'");
  Dataset d;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(ErrorCode::Format, "line " + std::to_string(lineno) + ": expected two fields");
    }
    const std::string_view sv(line);
    const double t = detail::parse_field(sv.substr(0, comma), lineno);
    const double v = detail::parse_field(sv.substr(comma + 1), lineno);
    if (!d.times.empty() && !(t > d.times.back())) {
      throw Error(ErrorCode::Format, "line " + std::to_string(lineno) + ": times not strictly increasing");
    }
    d.times.push_back(t);
    d.values.push_back(v);
  }
  return d;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return read_csv(f);
}

struct SplitSpec {
  double train_fraction = 600.0 / 700.0;
};

/// Chronological split: train = first floor(N * fraction) points.
inline std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorCode::Split, "split: train_fraction must be in (0,1)");
  }
  // Relative slack absorbs representation error in fractions like 6/7.
  const double exact = static_cast<double>(d.size()) * spec.train_fraction;
  const auto n_train = static_cast<std::size_t>(std::floor(exact * (1.0 + 1e-12)));
  if (n_train < 1 || n_train >= d.size()) {
    throw Error(ErrorCode::Split, "split: fraction " + std::to_string(spec.train_fraction) + " of " +
                                      std::to_string(d.size()) + " points leaves an empty side");
  }
  Dataset train{{d.times.begin(), d.times.begin() + static_cast<std::ptrdiff_t>(n_train)},
                {d.values.begin(), d.values.begin() + static_cast<std::ptrdiff_t>(n_train)}};
  Dataset test{{d.times.begin() + static_cast<std::ptrdiff_t>(n_train), d.times.end()},
               {d.values.begin() + static_cast<std::ptrdiff_t>(n_train), d.values.end()}};
  return {std::move(train), std::move(test)};
}

inline void check_metric_inputs(const std::vector<double>& actual, const std::vector<double>& predicted) {
  if (actual.size() != predicted.size()) throw Error(ErrorCode::ParameterShape, "metric: length mismatch");
  if (actual.empty()) throw Error(ErrorCode::EmptyInput, "metric: no points");
}

/// Mean absolute percentage error, in percent.
inline double mape(const std::vector<double>& actual, const std::vector<double>& predicted) {
  check_metric_inputs(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) throw Error(ErrorCode::UndefinedMetric, "mape: actual value is zero at index " + std::to_string(i));
    sum += std::abs(predicted[i] - actual[i]) / std::abs(actual[i]);
  }
  return 100.0 * sum / static_cast<double>(actual.size());
}

inline double rmse(const std::vector<double>& actual, const std::vector<double>& predicted) {
  check_metric_inputs(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

}  // namespace trafficgp
