#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace popart {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Error categories raised by the library. Every thrown popart::Error carries one.
enum class Errc {
  invalid_argument,
  dimension_mismatch,
  insufficient_samples,
  not_invertible,
  rank_deficient,
  oracle_scale_exceeded,
  horizon_too_short,
  config,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

namespace detail {

inline void require(bool cond, Errc code, const char* what) {
  if (!cond) [[unlikely]] throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) [[unlikely]] throw Error(code, what);
}

struct WarningSink {
  std::mutex mu;
  std::function<void(const std::string&)> handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
};

inline WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}

}  // namespace detail

/// Replace the process-wide warning handler (default prints to stderr).
/// Passing an empty function silences warnings.
inline void set_warning_handler(std::function<void(const std::string&)> handler) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mu);
  sink.handler = std::move(handler);
}

inline void warn(const std::string& msg) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mu);
  if (sink.handler) sink.handler(msg);
}

}  // namespace popart
