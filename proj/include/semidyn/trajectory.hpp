/**
 * @file trajectory.hpp
 * @brief Excitation trajectories: per-joint harmonic series over a shared
 *        base frequency, cyclic by construction, drawn from a seeded
 *        generator under joint and velocity limits.
 */
#pragma once

#include <cmath>
#include <vector>

#include "semidyn/common.hpp"

namespace semidyn {

/// Desired joint state at one instant.
struct TrajectoryPoint {
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
  Eigen::VectorXd ddq;
};

/**
 * Sum of pure harmonics of one base frequency plus a constant offset,
 * per joint:
 *
 *   q_j(t) = offset_j + sum_k a_jk sin(k w t) + b_jk cos(k w t)
 *
 * Pure harmonics make every joint exactly periodic with T = 2 pi / w, so a
 * cycle always returns to its starting state. The highest harmonic is chosen
 * to absorb the start conditions q(0) = offset and dq(0) = 0, which lets
 * trajectories with a shared offset be concatenated with continuous position
 * and velocity.
 */
class FourierTrajectory {
 public:
  FourierTrajectory(double omega, Eigen::MatrixXd sin_coeff, Eigen::MatrixXd cos_coeff,
                    Eigen::VectorXd offset)
      : omega_(omega),
        sin_coeff_(std::move(sin_coeff)),
        cos_coeff_(std::move(cos_coeff)),
        offset_(std::move(offset)) {
    if (omega_ <= 0.0 || !std::isfinite(omega_)) {
      throw ContractViolation("FourierTrajectory: base frequency must be positive");
    }
    const auto dof = offset_.size();
    if (sin_coeff_.rows() != dof || cos_coeff_.rows() != dof ||
        sin_coeff_.cols() != cos_coeff_.cols() || sin_coeff_.cols() < 1) {
      throw ContractViolation("FourierTrajectory: coefficient shape mismatch");
    }
    if (!all_finite(sin_coeff_) || !all_finite(cos_coeff_) || !all_finite(offset_)) {
      throw ContractViolation("FourierTrajectory: coefficients must be finite");
    }
    // Fold the start conditions into the last harmonic: sum_k b_k = 0 pins
    // q(0) to the offset, sum_k k a_k = 0 pins dq(0) to zero.
    const int kmax = static_cast<int>(sin_coeff_.cols());
    for (int j = 0; j < dof; ++j) {
      double b_sum = 0.0;
      double ka_sum = 0.0;
      for (int k = 1; k < kmax; ++k) {
        ka_sum += static_cast<double>(k) * sin_coeff_(j, k - 1);
        b_sum += cos_coeff_(j, k - 1);
      }
      sin_coeff_(j, kmax - 1) = -ka_sum / static_cast<double>(kmax);
      cos_coeff_(j, kmax - 1) = -b_sum;
    }
  }

  int dof() const { return static_cast<int>(offset_.size()); }
  int harmonics() const { return static_cast<int>(sin_coeff_.cols()); }
  double omega() const { return omega_; }
  double period() const { return 2.0 * M_PI / omega_; }
  const Eigen::VectorXd& offset() const { return offset_; }

  TrajectoryPoint eval(double t) const {
    if (t < 0.0 || !std::isfinite(t)) {
      throw ContractViolation("FourierTrajectory::eval: t must be finite and non-negative");
    }
    const int n = dof();
    TrajectoryPoint p{offset_, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (int k = 1; k <= harmonics(); ++k) {
      const double wk = static_cast<double>(k) * omega_;
      const double s = std::sin(wk * t);
      const double c = std::cos(wk * t);
      for (int j = 0; j < n; ++j) {
        const double a = sin_coeff_(j, k - 1);
        const double b = cos_coeff_(j, k - 1);
        p.q[j] += a * s + b * c;
        p.dq[j] += wk * (a * c - b * s);
        p.ddq[j] -= wk * wk * (a * s + b * c);
      }
    }
    return p;
  }

 private:
  double omega_;
  Eigen::MatrixXd sin_coeff_;  // dof x harmonics, a_{jk}
  Eigen::MatrixXd cos_coeff_;  // dof x harmonics, b_{jk}
  Eigen::VectorXd offset_;
};

/// Limits a sampled trajectory must respect.
struct TrajectoryLimits {
  double q_abs = 1.8;    // rad, symmetric position envelope about zero
  double dq_abs = 2.0;   // rad/s
  double ddq_abs = 12.0; // rad/s^2
};

/**
 * Draw one trajectory from the generator, rejecting candidates that leave
 * the limit envelope anywhere on a dense one-period grid. Coefficients are
 * scaled down geometrically on rejection so the loop always terminates.
 */
inline FourierTrajectory sample_trajectory(int dof, double omega, int harmonics,
                                           double coeff_scale, const Eigen::VectorXd& offset,
                                           const TrajectoryLimits& limits, Rng& rng,
                                           int grid_points = 10000) {
  if (dof <= 0 || harmonics < 1 || coeff_scale <= 0.0) {
    throw ContractViolation("sample_trajectory: bad shape arguments");
  }
  double scale = coeff_scale;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::MatrixXd a(dof, harmonics);
    Eigen::MatrixXd b(dof, harmonics);
    for (int j = 0; j < dof; ++j) {
      for (int k = 0; k < harmonics; ++k) {
        // Taper higher harmonics so velocity/acceleration stay tame.
        const double taper = scale / (1.0 + k);
        a(j, k) = rng.uniform(-taper, taper);
        b(j, k) = rng.uniform(-taper, taper);
      }
    }
    FourierTrajectory traj(omega, std::move(a), std::move(b), offset);
    bool ok = true;
    const double dt = traj.period() / static_cast<double>(grid_points);
    for (int i = 0; i <= grid_points && ok; ++i) {
      const TrajectoryPoint p = traj.eval(static_cast<double>(i) * dt);
      ok = p.q.cwiseAbs().maxCoeff() <= limits.q_abs &&
           p.dq.cwiseAbs().maxCoeff() <= limits.dq_abs &&
           p.ddq.cwiseAbs().maxCoeff() <= limits.ddq_abs;
    }
    if (ok) return traj;
    scale *= 0.7;
  }
  throw ContractViolation("sample_trajectory: could not satisfy limits");
}

/**
 * A list of trajectories with a shared offset, played back-to-back in a
 * repeating loop: trajectory i runs for `cycles` of its own period, then the
 * next one starts from the same rest state.
 */
class TrajectorySequence {
 public:
  TrajectorySequence(std::vector<FourierTrajectory> parts, int cycles_per_part)
      : parts_(std::move(parts)), cycles_(cycles_per_part) {
    if (parts_.empty() || cycles_ < 1) {
      throw ContractViolation("TrajectorySequence: needs parts and a positive cycle count");
    }
    boundaries_.reserve(parts_.size());
    double acc = 0.0;
    for (const auto& p : parts_) {
      acc += p.period() * static_cast<double>(cycles_);
      boundaries_.push_back(acc);
    }
  }

  double total_duration() const { return boundaries_.back(); }
  std::size_t size() const { return parts_.size(); }
  const FourierTrajectory& part(std::size_t i) const { return parts_.at(i); }

  /// Evaluate at absolute time t; t beyond the total duration wraps around.
  TrajectoryPoint eval(double t) const {
    double local = std::fmod(t, total_duration());
    if (local < 0.0) local += total_duration();
    std::size_t idx = 0;
    double start = 0.0;
    while (idx + 1 < parts_.size() && local >= boundaries_[idx]) {
      start = boundaries_[idx];
      ++idx;
    }
    return parts_[idx].eval(local - start);
  }

 private:
  std::vector<FourierTrajectory> parts_;
  int cycles_;
  std::vector<double> boundaries_;  // cumulative end times
};

}  // namespace semidyn
