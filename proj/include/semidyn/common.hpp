/**
 * @file common.hpp
 * @brief Shared error types, numeric helpers, and a deterministic RNG.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace semidyn {

/// Raised when an input violates a documented precondition (dimension
/// mismatch, non-finite entries, invalid gains, malformed schedules, ...).
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when the joint-space inertia matrix is numerically singular or
/// indefinite, i.e. the supplied inertial parameters are unphysical.
struct SingularInertia : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a discrete low-pass filter step would be unstable.
struct UnstableFilter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a parameter-adaptation step produces non-finite values.
struct AdaptationDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a finite-difference derivative evaluation fails.
struct DerivativeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a normalized-error denominator collapses (max == min).
struct DegenerateNormalizer : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when simulated plant state leaves the sane-magnitude envelope.
struct SimulationDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.allFinite();
}

/// splitmix64 step; used to derive decorrelated child seeds from a master
/// seed so every random stream in an experiment is pinned by one integer.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/**
 * @brief Deterministic random source.
 *
 * Wraps mt19937_64 but implements the value transforms (uniform, normal)
 * by hand: the standard library distribution objects are free to differ
 * between implementations, which would break byte-identical replay.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the polar method (no cached second variate, so the
  /// draw sequence is a pure function of the engine state).
  double normal() {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  /// Uniform integer in [lo, hi] (both inclusive).
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace semidyn
