#pragma once

// Coordinator <-> worker messages. A frame is a 4-byte big-endian unsigned
// body length followed by a UTF-8 JSON object with a "type" field. Doubles
// are written in shortest round-trip decimal form, so decode(encode(m)) == m
// bit for bit.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "trafficgp/admm.hpp"
#include "trafficgp/errors.hpp"
#include "trafficgp/kernel.hpp"
#include "trafficgp/serialize.hpp"

namespace trafficgp::protocol {

inline constexpr std::uint32_t kMaxFrameBytes = 64u * 1024u * 1024u;

struct Init {
  int worker_id = 0;
  KernelSpec spec;
  Shard shard;
  AdmmConfig cfg;
  Standardization stats;

  friend bool operator==(const Init& a, const Init& b) {
    return a.worker_id == b.worker_id && a.spec == b.spec && a.shard == b.shard && a.stats == b.stats &&
           to_json(a.cfg) == to_json(b.cfg);
  }
};

struct LocalUpdateRequest {
  int iteration = 0;
  std::vector<double> z;
  std::vector<double> u;
  double rho = 1.0;  // penalty for this iteration (changes under residual balancing)
  friend bool operator==(const LocalUpdateRequest&, const LocalUpdateRequest&) = default;
};

struct LocalUpdateResponse {
  int worker_id = 0;
  int iteration = 0;
  std::vector<double> theta;
  double objective = 0.0;
  double wall_ms = 0.0;
  friend bool operator==(const LocalUpdateResponse&, const LocalUpdateResponse&) = default;
};

struct PredictRequest {
  std::vector<double> z;
  std::vector<double> query_times;
  friend bool operator==(const PredictRequest&, const PredictRequest&) = default;
};

struct PredictResponse {
  int worker_id = 0;
  std::vector<double> mean;
  std::vector<double> variance;
  friend bool operator==(const PredictResponse&, const PredictResponse&) = default;
};

struct ErrorReply {
  std::string code;
  std::string detail;
  friend bool operator==(const ErrorReply&, const ErrorReply&) = default;
};

struct Shutdown {
  friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

/// Acknowledges Init and Shutdown.
struct Ack {
  int worker_id = 0;
  std::string of;
  friend bool operator==(const Ack&, const Ack&) = default;
};

using Message = std::variant<Init, LocalUpdateRequest, LocalUpdateResponse, PredictRequest, PredictResponse, ErrorReply,
                             Shutdown, Ack>;

inline std::string_view type_name(const Message& m) {
  struct Visitor {
    std::string_view operator()(const Init&) const { return "Init"; }
    std::string_view operator()(const LocalUpdateRequest&) const { return "LocalUpdateRequest"; }
    std::string_view operator()(const LocalUpdateResponse&) const { return "LocalUpdateResponse"; }
    std::string_view operator()(const PredictRequest&) const { return "PredictRequest"; }
    std::string_view operator()(const PredictResponse&) const { return "PredictResponse"; }
    std::string_view operator()(const ErrorReply&) const { return "Error"; }
    std::string_view operator()(const Shutdown&) const { return "Shutdown"; }
    std::string_view operator()(const Ack&) const { return "Ack"; }
  };
  return std::visit(Visitor{}, m);
}

namespace detail {

[[noreturn]] inline void protocol_error(const std::string& msg) { throw Error(ErrorCode::Protocol, msg); }

inline void require_finite(const std::vector<double>& v, const char* field) {
  for (double d : v) {
    if (!std::isfinite(d)) protocol_error(std::string("non-finite value in '") + field + "'");
  }
}

inline void require_finite(double d, const char* field) {
  if (!std::isfinite(d)) protocol_error(std::string("non-finite value in '") + field + "'");
}

inline json body_of(const Init& m) {
  require_finite(m.shard.data.times, "shard.times");
  require_finite(m.shard.data.values, "shard.values");
  return {{"worker_id", m.worker_id}, {"spec", to_json(m.spec)},  {"shard", to_json(m.shard)},
          {"cfg", to_json(m.cfg)},    {"stats", to_json(m.stats)}};
}
inline json body_of(const LocalUpdateRequest& m) {
  require_finite(m.z, "z");
  require_finite(m.u, "u");
  require_finite(m.rho, "rho");
  return {{"iteration", m.iteration}, {"z", m.z}, {"u", m.u}, {"rho", m.rho}};
}
inline json body_of(const LocalUpdateResponse& m) {
  require_finite(m.theta, "theta");
  require_finite(m.objective, "objective");
  require_finite(m.wall_ms, "wall_ms");
  return {{"worker_id", m.worker_id}, {"iteration", m.iteration}, {"theta", m.theta},
          {"objective", m.objective}, {"wall_ms", m.wall_ms}};
}
inline json body_of(const PredictRequest& m) {
  require_finite(m.z, "z");
  require_finite(m.query_times, "query_times");
  return {{"z", m.z}, {"query_times", m.query_times}};
}
inline json body_of(const PredictResponse& m) {
  require_finite(m.mean, "mean");
  require_finite(m.variance, "variance");
  return {{"worker_id", m.worker_id}, {"mean", m.mean}, {"variance", m.variance}};
}
inline json body_of(const ErrorReply& m) { return {{"code", m.code}, {"detail", m.detail}}; }
inline json body_of(const Shutdown&) { return json::object(); }
inline json body_of(const Ack& m) { return {{"worker_id", m.worker_id}, {"of", m.of}}; }

inline int int_field(ObjectReader& r, const std::string& key) {
  const auto v = r.integer(key);
  if (v < INT32_MIN || v > INT32_MAX) r.fail("'" + key + "' out of range");
  return static_cast<int>(v);
}

inline std::vector<double> doubles_field(ObjectReader& r, const std::string& key) {
  return doubles_from_json(r.at(key), r.where() + "." + key, ErrorCode::Protocol);
}

}  // namespace detail

/// JSON body (no length prefix).
inline std::string encode_body(const Message& m) {
  json body = std::visit([](const auto& x) { return detail::body_of(x); }, m);
  body["type"] = std::string(type_name(m));
  return body.dump();
}

inline std::string frame(std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw Error(ErrorCode::FrameTooLarge, "frame of " + std::to_string(body.size()) + " bytes");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xFF));
  out.push_back(static_cast<char>((n >> 16) & 0xFF));
  out.push_back(static_cast<char>((n >> 8) & 0xFF));
  out.push_back(static_cast<char>(n & 0xFF));
  out.append(body);
  return out;
}

inline std::string encode(const Message& m) { return frame(encode_body(m)); }

inline std::uint32_t read_length(std::string_view header) {
  if (header.size() < 4) detail::protocol_error("truncated frame header");
  const auto b = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(header[i])); };
  const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (n > kMaxFrameBytes) throw Error(ErrorCode::FrameTooLarge, "frame length " + std::to_string(n) + " exceeds 64 MiB");
  return n;
}

inline Message decode_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    detail::protocol_error(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) detail::protocol_error("message lacks a string 'type'");
  const auto type = j["type"].get<std::string>();
  ObjectReader r(j, type, ErrorCode::Protocol);
  r.at("type");
  Message out;
  if (type == "Init") {
    Init m;
    m.worker_id = detail::int_field(r, "worker_id");
    try {
      m.spec = kernel_spec_from_json(r.at("spec"));
    } catch (const Error& e) {
      detail::protocol_error(std::string("Init.spec: ") + e.what());
    }
    m.shard = shard_from_json(r.at("shard"), "Init.shard", ErrorCode::Protocol);
    m.cfg = admm_config_from_json(r.at("cfg"), "Init.cfg", ErrorCode::Protocol);
    m.stats = standardization_from_json(r.at("stats"), "Init.stats", ErrorCode::Protocol);
    out = std::move(m);
  } else if (type == "LocalUpdateRequest") {
    LocalUpdateRequest m;
    m.iteration = detail::int_field(r, "iteration");
    m.z = detail::doubles_field(r, "z");
    m.u = detail::doubles_field(r, "u");
    m.rho = r.number("rho");
    if (!(m.rho > 0.0)) r.fail("rho must be > 0");
    out = std::move(m);
  } else if (type == "LocalUpdateResponse") {
    LocalUpdateResponse m;
    m.worker_id = detail::int_field(r, "worker_id");
    m.iteration = detail::int_field(r, "iteration");
    m.theta = detail::doubles_field(r, "theta");
    m.objective = r.number("objective");
    m.wall_ms = r.number("wall_ms");
    out = std::move(m);
  } else if (type == "PredictRequest") {
    PredictRequest m;
    m.z = detail::doubles_field(r, "z");
    m.query_times = detail::doubles_field(r, "query_times");
    out = std::move(m);
  } else if (type == "PredictResponse") {
    PredictResponse m;
    m.worker_id = detail::int_field(r, "worker_id");
    m.mean = detail::doubles_field(r, "mean");
    m.variance = detail::doubles_field(r, "variance");
    out = std::move(m);
  } else if (type == "Error") {
    out = ErrorReply{r.string("code"), r.string("detail")};
  } else if (type == "Shutdown") {
    out = Shutdown{};
  } else if (type == "Ack") {
    Ack m;
    m.worker_id = detail::int_field(r, "worker_id");
    m.of = r.string("of");
    out = std::move(m);
  } else {
    detail::protocol_error("unknown message type '" + type + "'");
  }
  r.finish();
  return out;
}

/// Decodes exactly one complete frame.
inline Message decode(std::string_view bytes) {
  const std::uint32_t n = read_length(bytes);
  if (bytes.size() - 4 < n) detail::protocol_error("truncated frame: header promises " + std::to_string(n) + " bytes");
  if (bytes.size() - 4 > n) detail::protocol_error("trailing bytes after frame");
  return decode_body(bytes.substr(4));
}

}  // namespace trafficgp::protocol
