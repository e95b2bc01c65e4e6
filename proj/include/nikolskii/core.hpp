#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace nikolskii {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Raised when a caller violates a documented precondition that is not a
// plain range error (e.g. a point set too coarse for the requested degree).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a norm cannot be computed to its declared accuracy.
class AccuracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An L_p exponent p in [1, inf]. Spelled "inf" in text form.
class Exponent {
 public:
  constexpr Exponent() = default;
  Exponent(double p) : p_(p) {  // NOLINT(google-explicit-constructor)
    if (std::isnan(p) || p < 1.0) {
      throw std::domain_error("exponent must lie in [1, inf], got " + std::to_string(p));
    }
  }

  static Exponent infinity() { return Exponent(std::numeric_limits<double>::infinity()); }

  static Exponent parse(std::string_view text) {
    if (text == "inf" || text == "infinity" || text == "Inf") return infinity();
    std::size_t used = 0;
    const std::string s(text);
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse exponent '" + s + "'");
    }
    if (used != s.size()) throw std::invalid_argument("cannot parse exponent '" + s + "'");
    return Exponent(v);
  }

  double value() const { return p_; }
  bool is_infinite() const { return std::isinf(p_); }

  // Even integer exponents make |P|^p a polynomial of degree p*n.
  bool is_even_integer() const {
    return !is_infinite() && std::floor(p_) == p_ && std::fmod(p_, 2.0) == 0.0;
  }

  std::string str() const {
    if (is_infinite()) return "inf";
    if (std::floor(p_) == p_ && std::abs(p_) < 1e15) {
      return std::to_string(static_cast<long long>(p_));
    }
    std::string s = std::to_string(p_);
    while (!s.empty() && s.back() == '0') s.pop_back();
    return s;
  }

  friend bool operator==(Exponent a, Exponent b) { return a.p_ == b.p_; }
  friend auto operator<=>(Exponent a, Exponent b) { return a.p_ <=> b.p_; }

 private:
  double p_ = 2.0;
};

// Runs body(i) for i in [0, count) on up to hardware_concurrency workers.
// Work is split into contiguous blocks so results indexed by i are
// independent of scheduling.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         unsigned max_workers = 0) {
  unsigned workers = max_workers != 0 ? max_workers : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(count, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body, &err = errors[w]] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace nikolskii
