/**
 * @file sensors.hpp
 * @brief Measurement chain for the simulated plant: encoder noise, per-joint
 *        constant-velocity Kalman filters for velocity, and a third-order
 *        tracking loop (PLL) for acceleration estimates.
 */
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "semidyn/common.hpp"

namespace semidyn {

struct SensorSettings {
  double sigma_q = 1e-4;        ///< encoder noise standard deviation (rad)
  double kalman_process = 0.1;  ///< velocity-model process intensity (rad^2/s^3)
  double pll_bandwidth = 50.0;  ///< tracking-loop natural frequency (rad/s)
  bool exact = false;           ///< bypass: hand the true state through
};

struct SensorReading {
  Eigen::VectorXd q_meas;
  Eigen::VectorXd dq_est;
  Eigen::VectorXd ddq_est;
};

/**
 * One filter stack per joint. The Kalman filter runs a constant-velocity
 * model (state: position, velocity) against the noisy encoder value; the
 * acceleration comes from a critically-damped third-order loop
 *
 *   e = q_meas - th,  th += dt (om + l1 e),  om += dt (al + l2 e),
 *   al += dt l3 e,    with l1 = 3 wn, l2 = 3 wn^2, l3 = wn^3,
 *
 * whose continuous closed loop has a triple pole at -wn. The discrete-time
 * closed loop is verified stable at construction. Exact mode returns the
 * true state untouched and draws nothing from the generator, so bypassed
 * runs stay bit-reproducible.
 */
class SensorChain {
 public:
  SensorChain(int dof, const SensorSettings& settings, double dt)
      : settings_(settings), dt_(dt), kalman_(dof), pll_(dof) {
    if (dof <= 0 || dt <= 0.0) {
      throw ContractViolation("SensorChain: dof and dt must be positive");
    }
    if (settings.sigma_q < 0.0 || settings.kalman_process <= 0.0 ||
        settings.pll_bandwidth <= 0.0) {
      throw ContractViolation("SensorChain: noise and filter parameters out of range");
    }
    const double wn = settings.pll_bandwidth;
    l1_ = 3.0 * wn;
    l2_ = 3.0 * wn * wn;
    l3_ = wn * wn * wn;

    // Discrete closed-loop matrix of the tracking loop; all eigenvalues must
    // sit strictly inside the unit circle at this sample time.
    Eigen::Matrix3d a;
    a << 1.0 - dt * l1_, dt, 0.0,
        -dt * l2_, 1.0, dt,
        -dt * l3_, 0.0, 1.0;
    const Eigen::Vector3cd eig = Eigen::EigenSolver<Eigen::Matrix3d>(a, false).eigenvalues();
    for (int i = 0; i < 3; ++i) {
      if (std::abs(eig[i]) >= 1.0) {
        throw UnstableFilter("SensorChain: tracking loop unstable at this sample time");
      }
    }
    for (auto& k : kalman_) {
      k.cov << settings.sigma_q * settings.sigma_q + 1e-12, 0.0, 0.0, 1.0;
    }
  }

  /// Process one sample of the true state. In exact mode the reading is the
  /// true state itself; otherwise the encoder value is noisy and velocity /
  /// acceleration are filter estimates.
  SensorReading step(const Eigen::VectorXd& q_true, const Eigen::VectorXd& dq_true,
                     const Eigen::VectorXd& ddq_true, Rng& rng) {
    const int n = static_cast<int>(kalman_.size());
    if (q_true.size() != n || dq_true.size() != n || ddq_true.size() != n) {
      throw ContractViolation("SensorChain::step: state dimension mismatch");
    }
    if (settings_.exact) {
      return SensorReading{q_true, dq_true, ddq_true};
    }
    SensorReading out{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    if (!primed_) {
      // First sample: start the filters on the measurement at rest (the
      // excitation trajectories all begin at zero velocity), avoiding a large
      // artificial transient from all-zero initial states.
      for (int j = 0; j < n; ++j) {
        const double q_meas = q_true[j] + settings_.sigma_q * rng.normal();
        kalman_[j].pos = q_meas;
        kalman_[j].vel = 0.0;
        pll_[j] = PllState{q_meas, 0.0, 0.0};
        out.q_meas[j] = q_meas;
        out.dq_est[j] = 0.0;
        out.ddq_est[j] = 0.0;
      }
      primed_ = true;
      return out;
    }
    for (int j = 0; j < n; ++j) {
      const double q_meas = q_true[j] + settings_.sigma_q * rng.normal();
      out.q_meas[j] = q_meas;
      out.dq_est[j] = kalman_step(kalman_[j], q_meas);
      out.ddq_est[j] = pll_step(pll_[j], q_meas);
    }
    return out;
  }

 private:
  struct KalmanState {
    double pos = 0.0;
    double vel = 0.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  };
  struct PllState {
    double th = 0.0;
    double om = 0.0;
    double al = 0.0;
  };

  double kalman_step(KalmanState& k, double q_meas) {
    // Predict under the constant-velocity model.
    const double dt = dt_;
    k.pos += dt * k.vel;
    Eigen::Matrix2d f;
    f << 1.0, dt, 0.0, 1.0;
    Eigen::Matrix2d q;
    const double qc = settings_.kalman_process;
    q << qc * dt * dt * dt / 3.0, qc * dt * dt / 2.0, qc * dt * dt / 2.0, qc * dt;
    k.cov = f * k.cov * f.transpose() + q;
    // Correct with the encoder value.
    const double r = settings_.sigma_q * settings_.sigma_q + 1e-12;
    const double innov = q_meas - k.pos;
    const double s = k.cov(0, 0) + r;
    const Eigen::Vector2d gain = k.cov.col(0) / s;
    k.pos += gain[0] * innov;
    k.vel += gain[1] * innov;
    k.cov -= gain * k.cov.row(0);
    k.cov = 0.5 * (k.cov + k.cov.transpose());
    return k.vel;
  }

  double pll_step(PllState& p, double q_meas) {
    const double e = q_meas - p.th;
    p.th += dt_ * (p.om + l1_ * e);
    p.om += dt_ * (p.al + l2_ * e);
    p.al += dt_ * l3_ * e;
    return p.al;
  }

  SensorSettings settings_;
  double dt_;
  double l1_ = 0.0, l2_ = 0.0, l3_ = 0.0;
  std::vector<KalmanState> kalman_;
  std::vector<PllState> pll_;
  bool primed_ = false;
};

}  // namespace semidyn
