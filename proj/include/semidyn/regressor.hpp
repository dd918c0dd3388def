/**
 * @file regressor.hpp
 * @brief Linear-in-parameter torque maps and their state derivatives.
 *
 * The two-velocity regressor Y(q, dq, dq_r, ddq_r) satisfies
 *
 *   Y(q, dq, dq_r, ddq_r) pi = M(q) ddq_r + C(q, dq) dq_r + g(q) + F(dq_r)
 *
 * with C the Christoffel (factorized) Coriolis matrix. C(q, a) b is the
 * symmetric bilinear extension of the velocity-product torque
 * h(v) = rnea(q, v, 0, no gravity), so it is recovered exactly by
 * polarization:
 *
 *   C(q, dq) dq_r = [h(dq + dq_r) - h(dq) - h(dq_r)] / 2.
 *
 * Setting dq_r = dq, ddq_r = ddq collapses Y pi to the plain inverse
 * dynamics, which is the property the adaptation and prediction layers
 * rely on.
 */
#pragma once

#include "semidyn/rnea.hpp"

namespace semidyn {

/// Which convention a stored regressor was produced by: the instantaneous
/// (direct) map at a state, or the low-pass-filtered history used by the
/// prediction-error branch of the learner.
enum class RegressorKind { kDirect, kFiltered };

struct RegressorMatrix {
  Eigen::MatrixXd values;  // dof x param_dim
  RegressorKind kind = RegressorKind::kDirect;
};

namespace detail {

/// Shared assembly: inertial columns from four cached forward sweeps plus
/// friction columns in the reference velocity.
inline Eigen::MatrixXd regressor_values(const KinematicChain& chain, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& dq, const Eigen::VectorXd& dq_r,
                                        const Eigen::VectorXd& ddq_r) {
  const int n = chain.dof();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const RneaPass acc_pass = rnea_forward(chain, q, zero, ddq_r, true);
  const RneaPass vel_sum = rnea_forward(chain, q, dq + dq_r, zero, false);
  const RneaPass vel_a = rnea_forward(chain, q, dq, zero, false);
  const RneaPass vel_b = rnea_forward(chain, q, dq_r, zero, false);

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, chain.param_dim());
  Eigen::VectorXd col(n), tmp(n);
  for (int link = 0; link < n; ++link) {
    const int base = KinematicChain::kParamsPerJoint * link;
    for (int k = 0; k < 10; ++k) {
      rnea_backward_basis(chain, acc_pass, link, k, col);
      rnea_backward_basis(chain, vel_sum, link, k, tmp);
      col.head(link + 1) += 0.5 * tmp.head(link + 1);
      rnea_backward_basis(chain, vel_a, link, k, tmp);
      col.head(link + 1) -= 0.5 * tmp.head(link + 1);
      rnea_backward_basis(chain, vel_b, link, k, tmp);
      col.head(link + 1) -= 0.5 * tmp.head(link + 1);
      y.col(base + k) = col;
    }
    y(link, base + pi_layout::kCoulomb) = std::tanh(dq_r[link] / kCoulombSmoothing);
    y(link, base + pi_layout::kViscous) = dq_r[link];
  }
  return y;
}

}  // namespace detail

/// Two-velocity regressor Y(q, dq, dq_r, ddq_r).
inline RegressorMatrix regressor(const KinematicChain& chain, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& dq, const Eigen::VectorXd& dq_r,
                                 const Eigen::VectorXd& ddq_r) {
  check_dim(chain, q, "q");
  check_dim(chain, dq, "dq");
  check_dim(chain, dq_r, "dq_r");
  check_dim(chain, ddq_r, "ddq_r");
  return RegressorMatrix{detail::regressor_values(chain, q, dq, dq_r, ddq_r),
                         RegressorKind::kDirect};
}

/// Single-velocity regressor at a state: Y(q, dq, dq, ddq), so that
/// Y pi equals inverse_dynamics(chain, pi, state) for every pi.
inline RegressorMatrix regressor_single(const KinematicChain& chain, const JointState& state) {
  check_state(chain, state);
  return RegressorMatrix{detail::regressor_values(chain, state.q, state.dq, state.dq, state.ddq),
                         RegressorKind::kDirect};
}

/// Y(q, dq, dq_r, ddq_r) * pi evaluated directly (four sweeps, no matrix),
/// for the inner control loop.
inline Eigen::VectorXd regressor_torque(const KinematicChain& chain, const Eigen::VectorXd& pi,
                                        const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                                        const Eigen::VectorXd& dq_r,
                                        const Eigen::VectorXd& ddq_r) {
  check_params(chain, pi);
  const int n = chain.dof();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd tau =
      rnea_backward(chain, rnea_forward(chain, q, zero, ddq_r, true), pi);
  tau += 0.5 * rnea_backward(chain, rnea_forward(chain, q, dq + dq_r, zero, false), pi);
  tau -= 0.5 * rnea_backward(chain, rnea_forward(chain, q, dq, zero, false), pi);
  tau -= 0.5 * rnea_backward(chain, rnea_forward(chain, q, dq_r, zero, false), pi);
  return tau + friction_torque(chain, pi, dq_r);
}

/// Partial derivatives of g(state) = Y(q, dq, ddq) * delta_pi with respect
/// to each state block, evaluated by central differences.
struct RegressorPartials {
  Eigen::MatrixXd wrt_q;    // d g / d q
  Eigen::MatrixXd wrt_dq;   // d g / d dq
  Eigen::MatrixXd wrt_ddq;  // d g / d ddq
};

/**
 * @brief State derivatives of the parameter-delta torque Y(state) * delta_pi.
 *
 * Each column is a central finite difference with step 1e-6 * max(1, |x_k|).
 * The product itself is evaluated as inverse_dynamics at delta_pi, so each
 * column costs two dynamics sweeps. Throws DerivativeFailure if any
 * evaluation produces non-finite output.
 */
inline RegressorPartials regressor_param_product_partials(const KinematicChain& chain,
                                                          const JointState& state,
                                                          const Eigen::VectorXd& delta_pi) {
  check_state(chain, state);
  check_params(chain, delta_pi);
  const int n = chain.dof();
  RegressorPartials out{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};

  JointState probe = state;
  auto fill = [&](Eigen::VectorXd& block, Eigen::MatrixXd& dest) {
    for (int k = 0; k < n; ++k) {
      const double x = block[k];
      const double step = 1e-6 * std::max(1.0, std::abs(x));
      block[k] = x + step;
      const Eigen::VectorXd hi = inverse_dynamics(chain, delta_pi, probe);
      block[k] = x - step;
      const Eigen::VectorXd lo = inverse_dynamics(chain, delta_pi, probe);
      block[k] = x;
      dest.col(k) = (hi - lo) / (2.0 * step);
    }
  };
  fill(probe.q, out.wrt_q);
  fill(probe.dq, out.wrt_dq);
  fill(probe.ddq, out.wrt_ddq);

  if (!out.wrt_q.allFinite() || !out.wrt_dq.allFinite() || !out.wrt_ddq.allFinite()) {
    throw DerivativeFailure("regressor_param_product_partials: non-finite derivative");
  }
  return out;
}

}  // namespace semidyn
