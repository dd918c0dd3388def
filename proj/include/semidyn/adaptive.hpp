/**
 * @file adaptive.hpp
 * @brief Composite parameter adaptation with bounded-gain forgetting.
 *
 * The learner drives the inertial-parameter estimate with two error signals
 * at once: the tracking error (through the direct, two-velocity regressor)
 * and a filtered torque prediction error (through the low-pass-filtered
 * regressor). The adaptation gain follows a Riccati-type update whose
 * forgetting factor shrinks to zero as the gain norm approaches
 * lambda0 / k0, which keeps the gain bounded under persistent excitation
 * and frozen directions bounded without it.
 */
#pragma once

#include "semidyn/regressor.hpp"

namespace semidyn {

/// Controller and learner gains. Diagonals are stored as vectors.
struct AdaptiveGains {
  Eigen::VectorXd lambda;   // resolved-rate pole per joint [1/s]
  Eigen::VectorXd kd;       // feedback gain per joint
  Eigen::MatrixXd r_weight; // prediction-error weight (n x n, PD)
  double lambda0 = 1.5;     // forgetting base rate [1/s]
  double k0 = 0.1;          // gain-norm shaping: bound = lambda0 / k0
  double filter_pole = 20.0;  // torque/regressor low-pass pole [rad/s]
  double adapt_deadzone = 0.0;  // tracking-error dead zone for learning [rad/s]

  double p_norm_bound() const { return lambda0 / k0; }

  void validate(int dof) const {
    if (lambda.size() != dof || kd.size() != dof) {
      throw ContractViolation("AdaptiveGains: diagonal length mismatch");
    }
    if (lambda.minCoeff() <= 0.0 || kd.minCoeff() <= 0.0) {
      throw ContractViolation("AdaptiveGains: lambda and kd must be positive");
    }
    if (r_weight.rows() != dof || r_weight.cols() != dof) {
      throw ContractViolation("AdaptiveGains: r_weight must be n x n");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(r_weight);
    if (llt.info() != Eigen::Success) {
      throw ContractViolation("AdaptiveGains: r_weight must be positive definite");
    }
    if (lambda0 <= 0.0 || k0 <= 0.0 || filter_pole <= 0.0) {
      throw ContractViolation("AdaptiveGains: rates must be positive");
    }
    if (adapt_deadzone < 0.0) {
      throw ContractViolation("AdaptiveGains: adapt_deadzone must be non-negative");
    }
  }
};

/**
 * Continuous dead zone: components inside [-phi, phi] map to zero, outside
 * shift toward zero by phi. Feeding the learner the dead-zoned tracking
 * error (while the feedback keeps the raw value) is the standard guard
 * against parameter drift under measurement noise: errors at the noise
 * floor carry no trustworthy gradient, so they are withheld from the
 * integrator rather than accumulated.
 */
inline Eigen::VectorXd deadzone(const Eigen::VectorXd& s, double phi) {
  if (phi <= 0.0) return s;
  return s.unaryExpr([phi](double v) {
    if (v > phi) return v - phi;
    if (v < -phi) return v + phi;
    return 0.0;
  });
}

/// Reference velocity/acceleration and the composite tracking error
///   s = dq - dq_r = (dq - dq_d) + Lambda (q - q_d).
struct ResolvedRates {
  Eigen::VectorXd dq_r;
  Eigen::VectorXd ddq_r;
  Eigen::VectorXd s;
};

inline ResolvedRates resolved_rates(const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                                    const Eigen::VectorXd& q_d, const Eigen::VectorXd& dq_d,
                                    const Eigen::VectorXd& ddq_d,
                                    const Eigen::VectorXd& lambda) {
  const auto n = q.size();
  if (dq.size() != n || q_d.size() != n || dq_d.size() != n || ddq_d.size() != n ||
      lambda.size() != n) {
    throw ContractViolation("resolved_rates: dimension mismatch");
  }
  ResolvedRates out;
  out.dq_r = dq_d - lambda.cwiseProduct(q - q_d);
  out.ddq_r = ddq_d - lambda.cwiseProduct(dq - dq_d);
  out.s = dq - out.dq_r;
  return out;
}

/// First-order low-pass state shared by the measured torque and the
/// regressor history: x' = x + pole * dt * (u - x).
struct TorqueFilter {
  Eigen::VectorXd y_f;   // filtered measured torque
  Eigen::MatrixXd w;     // filtered regressor (same pole, same phase)

  static TorqueFilter zero(int dof, int params) {
    return TorqueFilter{Eigen::VectorXd::Zero(dof), Eigen::MatrixXd::Zero(dof, params)};
  }
};

inline TorqueFilter filter_step(const TorqueFilter& filt, const Eigen::VectorXd& tau_meas,
                                const RegressorMatrix& y_now, double pole, double dt) {
  if (pole <= 0.0 || dt <= 0.0) {
    throw ContractViolation("filter_step: pole and dt must be positive");
  }
  const double alpha = pole * dt;
  if (alpha >= 1.0) {
    throw UnstableFilter("filter_step: pole * dt = " + std::to_string(alpha) +
                         " >= 1 (discrete filter unstable)");
  }
  if (tau_meas.size() != filt.y_f.size() || y_now.values.rows() != filt.w.rows() ||
      y_now.values.cols() != filt.w.cols()) {
    throw ContractViolation("filter_step: dimension mismatch");
  }
  TorqueFilter out;
  out.y_f = filt.y_f + alpha * (tau_meas - filt.y_f);
  out.w = filt.w + alpha * (y_now.values - filt.w);
  return out;
}

/// Filtered torque prediction error e = W pi_hat - y_f.
inline Eigen::VectorXd prediction_error(const TorqueFilter& filt, const Eigen::VectorXd& pi_hat) {
  return filt.w * pi_hat - filt.y_f;
}

/// Learner state: the estimate, its gain matrix, the filter memory, and the
/// warm-start vector for the spectral-norm power iteration.
struct ParametricState {
  Eigen::VectorXd pi_hat;
  Eigen::MatrixXd p_gain;
  TorqueFilter filter;
  Eigen::VectorXd power_vec;

  static ParametricState init(const Eigen::VectorXd& pi0, double p0, int dof) {
    ParametricState st;
    st.pi_hat = pi0;
    st.p_gain = p0 * Eigen::MatrixXd::Identity(pi0.size(), pi0.size());
    st.filter = TorqueFilter::zero(dof, static_cast<int>(pi0.size()));
    st.power_vec = Eigen::VectorXd::Constant(pi0.size(), 1.0 / std::sqrt(double(pi0.size())));
    return st;
  }
};

/// Spectral norm of a symmetric PSD matrix by power iteration, warm-started
/// from (and updating) the supplied direction estimate.
inline double estimate_spectral_norm(const Eigen::MatrixXd& m, Eigen::VectorXd& v, int iters = 5) {
  if (v.size() != m.rows() || v.norm() < 1e-300) {
    v = Eigen::VectorXd::Constant(m.rows(), 1.0 / std::sqrt(double(m.rows())));
  }
  double norm_est = 0.0;
  for (int i = 0; i < iters; ++i) {
    Eigen::VectorXd w = m * v;
    norm_est = w.norm();
    if (norm_est < 1e-300) return 0.0;
    v = w / norm_est;
  }
  return norm_est;
}

/// Floor past which the gain matrix counts as having lost positive
/// definiteness and is repaired by eigenvalue clamping.
inline constexpr double kGainEigenFloor = 1e-12;

struct GainUpdate {
  Eigen::MatrixXd p;
  bool repaired = false;      // eigenvalue flooring was required
  double norm_estimate = 0.0; // post-update spectral norm estimate
};

/**
 * @brief Bounded-gain-forgetting update of the adaptation gain.
 *
 * Continuous law dP/dt = lambda(t) P - P W' R W P with
 * lambda(t) = lambda0 (1 - |P| / bound), bound = lambda0 / k0, integrated by
 * one explicit Euler step and symmetrized. The spectral norm is estimated
 * by warm-started power iteration; after the step the matrix is repaired to
 * the PSD cone if needed and rescaled if the norm estimate exceeds the
 * bound, so |P| <= lambda0 / k0 holds throughout.
 */
inline GainUpdate bgf_gain_update(const Eigen::MatrixXd& p, const Eigen::MatrixXd& w,
                                  const Eigen::MatrixXd& r_weight, double lambda0, double k0,
                                  double dt, Eigen::VectorXd& power_vec) {
  if (p.rows() != p.cols() || w.cols() != p.rows() || r_weight.rows() != w.rows()) {
    throw ContractViolation("bgf_gain_update: dimension mismatch");
  }
  const double bound = lambda0 / k0;
  GainUpdate out;

  const double norm_now = estimate_spectral_norm(p, power_vec);
  const double lambda_t = lambda0 * (1.0 - norm_now / bound);
  const Eigen::MatrixXd pw = p * w.transpose();
  Eigen::MatrixXd next = p + dt * (lambda_t * p - pw * r_weight * pw.transpose());
  next = 0.5 * (next + next.transpose());

  if (!next.allFinite()) {
    throw AdaptationDivergence("bgf_gain_update: non-finite gain matrix");
  }

  // Repair: clamp eigenvalues when the Euler step overshoots the PSD cone.
  Eigen::LLT<Eigen::MatrixXd> llt(
      next - kGainEigenFloor * Eigen::MatrixXd::Identity(next.rows(), next.cols()));
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(next);
    next = eig.eigenvectors() *
           eig.eigenvalues().cwiseMax(kGainEigenFloor).asDiagonal() *
           eig.eigenvectors().transpose();
    next = 0.5 * (next + next.transpose());
    out.repaired = true;
  }

  double norm_next = estimate_spectral_norm(next, power_vec);
  if (norm_next > bound) {
    next *= bound / norm_next;
    norm_next = bound;
  }
  out.p = std::move(next);
  out.norm_estimate = norm_next;
  return out;
}

struct CompositeUpdate {
  ParametricState state;
  Eigen::VectorXd delta_pi;
};

/**
 * @brief One composite adaptation step.
 *
 * delta = -dt * P (Y' s + W' R e); with e = 0 this is the tracking-error
 * (direct) law alone, with s = 0 the prediction-error (indirect) law alone.
 * The gain-matrix update is separate (bgf_gain_update) so callers control
 * the order and cadence of the two.
 */
inline CompositeUpdate composite_update(const ParametricState& st, const RegressorMatrix& y,
                                        const Eigen::MatrixXd& w, const Eigen::VectorXd& s,
                                        const Eigen::VectorXd& e, const Eigen::MatrixXd& r_weight,
                                        double dt) {
  if (y.values.cols() != st.pi_hat.size() || w.cols() != st.pi_hat.size() ||
      s.size() != y.values.rows() || e.size() != w.rows()) {
    throw ContractViolation("composite_update: dimension mismatch");
  }
  CompositeUpdate out{st, -dt * (st.p_gain * (y.values.transpose() * s +
                                              w.transpose() * (r_weight * e)))};
  if (!out.delta_pi.allFinite()) {
    throw AdaptationDivergence("composite_update: non-finite parameter step");
  }
  out.state.pi_hat += out.delta_pi;
  return out;
}

/// Commanded torque: feedforward at the estimate plus the nonparametric
/// correction minus velocity-error feedback.
inline Eigen::VectorXd control_law(const Eigen::VectorXd& tau_model,
                                   const Eigen::VectorXd& tau_np, const Eigen::VectorXd& kd,
                                   const Eigen::VectorXd& s) {
  if (tau_np.size() != tau_model.size() || kd.size() != tau_model.size() ||
      s.size() != tau_model.size()) {
    throw ContractViolation("control_law: dimension mismatch");
  }
  return tau_model + tau_np - kd.cwiseProduct(s);
}

}  // namespace semidyn
