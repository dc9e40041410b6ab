#ifndef IMPLAB_COMMON_HPP
#define IMPLAB_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace implab {

inline constexpr const char* kVersion = "0.1.0";

// Log guard used by every loss and posterior normalizer.
inline constexpr double kEps = 1e-12;

// A probability vector over classes. Entries nonnegative, sum 1 within 1e-12.
using ProbVector = std::vector<double>;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (flags, generator parameters).
struct ConfigError : Error {
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Dimension mismatch; message names both dimensions.
struct ShapeError : ContractError {
  using ContractError::ContractError;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Malformed input file; message carries the line number.
struct ParseError : Error {
  using Error::Error;
};

struct ScheduleExhaustedError : ContractError {
  using ContractError::ContractError;
};

// A trellis position whose allowed symbols all carry zero mass.
struct DegeneratePositionError : Error {
  int position;
  explicit DegeneratePositionError(int pos)
      : Error("degenerate trellis position " + std::to_string(pos) +
              ": allowed symbols carry zero total mass"),
        position(pos) {}
};

// ---------------------------------------------------------------------------
// Dense row-major matrix, 64-bit throughout.

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  std::span<double> row(int r) {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
  bool operator==(const Matrix&) const = default;
};

// ---------------------------------------------------------------------------
// Numerics

inline double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;  // all -inf (or a stray +inf)
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

// Softmax with max-subtraction; safe for logits up to +-500 and beyond.
inline ProbVector softmax(std::span<const double> logits) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double z : logits) hi = std::max(hi, z);
  ProbVector p(logits.size());
  double sum = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - hi);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline bool is_on_simplex(std::span<const double> p, double tol = 1e-9) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

inline void require_simplex(std::span<const double> p, const char* what) {
  if (!is_on_simplex(p))
    throw ContractError(std::string(what) + " is not on the probability simplex");
}

// ---------------------------------------------------------------------------
// Deterministic random streams.
//
// All randomness in the library flows through Stream so that draw order is
// explicit and runs are bit-reproducible for a fixed seed. Gaussians use
// Box-Muller with a fixed two-draw cost (no cached spare).

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes a salt into a base seed; used to derive independent substreams.
inline std::uint64_t derive(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t s = base ^ (0x9e3779b97f4a7c15ULL + (salt << 6) + (salt >> 2));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds do not produce correlated first draws.
    for (int i = 0; i < 4; ++i) splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; always consumes exactly two draws.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n) via 128-bit multiply (no rejection loop).
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Fisher-Yates; deterministic across platforms.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace rng
}  // namespace implab

#endif  // IMPLAB_COMMON_HPP
