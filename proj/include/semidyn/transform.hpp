/**
 * @file transform.hpp
 * @brief Consistency transform: keeps the residual mixture aligned with a
 *        moving parametric model.
 *
 * The mixture is trained on samples (state, eps) with
 * eps = tau_meas - Y(state) pi_hat. When the estimate moves by delta, every
 * stored residual implicitly shrinks by Y(state) delta. The transform
 * applies that change in closed form to each component:
 *
 *   mean:  tau block shifted by -Y(mean_state) delta (exact evaluation);
 *   cov:   linearized through L = [[I, 0], [-J, I]] with
 *          J = d(Y(state) delta)/d(state) at the component mean, i.e.
 *          Sigma' = L Sigma L'.
 *
 * L is unit lower-triangular, so the map is volume preserving, and because
 * the state block of the mean never moves, transforms compose exactly:
 * applying delta1 then delta2 equals applying delta1 + delta2.
 */
#pragma once

#include "semidyn/gmm.hpp"
#include "semidyn/regressor.hpp"

namespace semidyn {

/// A parameter-estimate increment, elementwise clamped at construction so a
/// single wild adaptation step cannot catapult the mixture.
struct ParamDelta {
  Eigen::VectorXd delta;

  static ParamDelta clamped(const Eigen::VectorXd& raw, double max_abs) {
    if (!raw.allFinite()) {
      throw ContractViolation("ParamDelta: delta must be finite");
    }
    if (max_abs <= 0.0) {
      throw ContractViolation("ParamDelta: clamp bound must be positive");
    }
    return ParamDelta{raw.cwiseMax(-max_abs).cwiseMin(max_abs)};
  }

  bool is_zero() const { return (delta.array() == 0.0).all(); }
};

/// Residual the nonparametric learner is trained on.
inline Eigen::VectorXd residual_target(const Eigen::VectorXd& tau_meas,
                                       const Eigen::VectorXd& tau_param) {
  if (tau_meas.size() != tau_param.size()) {
    throw ContractViolation("residual_target: dimension mismatch");
  }
  return tau_meas - tau_param;
}

struct ComponentTransformResult {
  GaussianComponent component;
  bool transformed = false;        // false: left untouched (failure path)
  double floor_perturbation = 0.0; // Frobenius perturbation added by flooring
};

/**
 * @brief Core remap of one component given the output-shift value and its
 *        Jacobian with respect to the input (state) block.
 *
 * Exposed separately so non-robot mixtures (e.g. scalar demos) can reuse
 * the exact same covariance algebra.
 */
inline ComponentTransformResult transform_component_generic(const GaussianComponent& c,
                                                            int input_dim,
                                                            const Eigen::VectorXd& shift,
                                                            const Eigen::MatrixXd& jac,
                                                            bool mean_only = false) {
  const int out_dim = static_cast<int>(c.mean.size()) - input_dim;
  if (shift.size() != out_dim || jac.rows() != out_dim || jac.cols() != input_dim) {
    throw ContractViolation("transform_component: shift/jacobian dimension mismatch");
  }
  ComponentTransformResult res;
  res.component = c;
  res.component.mean.tail(out_dim) -= shift;
  if (!mean_only) {
    const auto s_block = c.cov.topLeftCorner(input_dim, input_dim);
    const auto cross = c.cov.topRightCorner(input_dim, out_dim);
    const auto o_block = c.cov.bottomRightCorner(out_dim, out_dim);
    const Eigen::MatrixXd sj = s_block * jac.transpose();
    const Eigen::MatrixXd new_cross = cross - sj;
    const Eigen::MatrixXd jc = jac * cross;
    Eigen::MatrixXd new_out = jac * sj - jc - jc.transpose() + o_block;
    res.component.cov.topRightCorner(input_dim, out_dim) = new_cross;
    res.component.cov.bottomLeftCorner(out_dim, input_dim) = new_cross.transpose();
    res.component.cov.bottomRightCorner(out_dim, out_dim) = std::move(new_out);
    res.floor_perturbation = floor_covariance(res.component.cov);
  }
  res.transformed = true;
  return res;
}

/**
 * @brief Robot-space component transform for a parameter increment.
 *
 * The component mean stores (q, dq, ddq, tau). The shift is the exact
 * parameter-delta torque at the mean state; the Jacobian comes from
 * regressor_param_product_partials. delta = 0 returns the component
 * bit-identically. A derivative failure leaves the component untouched
 * with transformed = false.
 */
inline ComponentTransformResult transform_component(const GaussianComponent& c,
                                                    const ParamDelta& delta,
                                                    const KinematicChain& chain) {
  const int n = chain.dof();
  if (c.mean.size() != 4 * n) {
    throw ContractViolation("transform_component: component must live in (q,dq,ddq,tau) space");
  }
  if (delta.is_zero()) {
    return ComponentTransformResult{c, true, 0.0};
  }
  const JointState state{c.mean.segment(0, n), c.mean.segment(n, n), c.mean.segment(2 * n, n)};
  ComponentTransformResult res;
  try {
    const Eigen::VectorXd shift = inverse_dynamics(chain, delta.delta, state);
    const RegressorPartials part = regressor_param_product_partials(chain, state, delta.delta);
    Eigen::MatrixXd jac(n, 3 * n);
    jac << part.wrt_q, part.wrt_dq, part.wrt_ddq;
    res = transform_component_generic(c, 3 * n, shift, jac);
  } catch (const DerivativeFailure&) {
    res.component = c;
    res.transformed = false;
  } catch (const ContractViolation&) {
    res.component = c;
    res.transformed = false;
  }
  return res;
}

struct ModelTransformResult {
  MixtureModel model;
  int failed = 0;                   // components left untransformed
  double floor_perturbation = 0.0;  // summed Frobenius perturbations
};

/// Apply the consistency transform to every component. Priors, accumulated
/// masses, ages, and the component count are untouched.
inline ModelTransformResult transform_model(const MixtureModel& model, const ParamDelta& delta,
                                            const KinematicChain& chain) {
  if (delta.is_zero()) {
    return ModelTransformResult{model, 0, 0.0};
  }
  std::vector<GaussianComponent> comps;
  comps.reserve(model.components().size());
  int failed = 0;
  double perturbation = 0.0;
  for (const auto& c : model.components()) {
    ComponentTransformResult r = transform_component(c, delta, chain);
    if (!r.transformed) ++failed;
    perturbation += r.floor_perturbation;
    comps.push_back(std::move(r.component));
  }
  return ModelTransformResult{model.with_components(std::move(comps)), failed, perturbation};
}

}  // namespace semidyn
