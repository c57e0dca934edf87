#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "trafficgp/errors.hpp"

namespace trafficgp {

/// Time-stamped observations. Times are hours and strictly increasing.
struct Dataset {
  std::vector<double> times;
  std::vector<double> values;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  [[nodiscard]] bool empty() const noexcept { return times.empty(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void validate(const Dataset& d) {
  if (d.times.size() != d.values.size()) {
    throw Error(ErrorCode::ParameterShape, "dataset: times and values differ in length");
  }
  if (d.empty()) throw Error(ErrorCode::EmptyInput, "dataset: no points");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d.times[i]) || !std::isfinite(d.values[i])) {
      throw Error(ErrorCode::ParameterShape, "dataset: non-finite entry at index " + std::to_string(i));
    }
    if (i > 0 && !(d.times[i] > d.times[i - 1])) {
      throw Error(ErrorCode::ParameterShape, "dataset: times not strictly increasing at index " + std::to_string(i));
    }
  }
}

struct Standardization {
  double mean = 0.0;
  double std = 1.0;

  [[nodiscard]] double forward(double v) const noexcept { return (v - mean) / std; }
  [[nodiscard]] double inverse(double v) const noexcept { return v * std + mean; }

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

/// Sample mean and sample (n-1) standard deviation. A single point or a
/// constant series has no usable scale and is rejected.
inline Standardization compute_standardization(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw Error(ErrorCode::DegenerateData, "standardization needs at least two points");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw Error(ErrorCode::DegenerateData, "standardization: data has zero variance");
  }
  return {mean, sd};
}

inline Dataset standardize(const Dataset& d, const Standardization& s) {
  Dataset out{d.times, {}};
  out.values.reserve(d.size());
  for (double v : d.values) out.values.push_back(s.forward(v));
  return out;
}

inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.times.reserve(indices.size());
  out.values.reserve(indices.size());
  for (auto i : indices) {
    out.times.push_back(d.times.at(i));
    out.values.push_back(d.values.at(i));
  }
  return out;
}

}  // namespace trafficgp
