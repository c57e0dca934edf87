#pragma once

// stderr logging; level from TRAFFICGP_LOG={error|info|debug} (default error).

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>

namespace trafficgp::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

inline Level level_from_env() {
  const char* v = std::getenv("TRAFFICGP_LOG");
  if (!v) return Level::Error;
  const std::string_view s(v);
  if (s == "debug") return Level::Debug;
  if (s == "info") return Level::Info;
  return Level::Error;
}

inline Level& current_level() {
  static Level level = level_from_env();
  return level;
}

namespace detail {

inline void format_into(std::ostringstream& os, std::string_view fmt) { os << fmt; }

template <class T, class... Rest>
void format_into(std::ostringstream& os, std::string_view fmt, const T& first, const Rest&... rest) {
  const auto pos = fmt.find("{}");
  if (pos == std::string_view::npos) {
    os << fmt;
    return;
  }
  os << fmt.substr(0, pos) << first;
  format_into(os, fmt.substr(pos + 2), rest...);
}

template <class... Args>
void write(Level lvl, std::string_view tag, std::string_view fmt, const Args&... args) {
  if (static_cast<int>(lvl) > static_cast<int>(current_level())) return;
  std::ostringstream os;
  os << "[trafficgp " << tag << "] ";
  format_into(os, fmt, args...);
  os << '\n';
  static std::mutex mu;
  const std::lock_guard lock(mu);
  std::cerr << os.str();
}

}  // namespace detail

template <class... Args>
void error(std::string_view fmt, const Args&... args) {
  detail::write(Level::Error, "error", fmt, args...);
}
template <class... Args>
void info(std::string_view fmt, const Args&... args) {
  detail::write(Level::Info, "info", fmt, args...);
}
template <class... Args>
void debug(std::string_view fmt, const Args&... args) {
  detail::write(Level::Debug, "debug", fmt, args...);
}

}  // namespace trafficgp::log
