/**
 * @file plant.hpp
 * @brief Simulated plant: rigid-body forward dynamics plus an unmodeled
 *        force term, integrated with a semi-implicit Euler step.
 */
#pragma once

#include <cmath>

#include "semidyn/chain.hpp"
#include "semidyn/rnea.hpp"

namespace semidyn {

/**
 * Forces the rigid-body parameter vector cannot express: a smooth nonlinear
 * velocity friction alpha tanh(beta dq) + gamma dq^3 and a state-dependent
 * bias b sin(q), per joint. This is what the residual learner has to absorb.
 */
struct UnmodeledForce {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd bias;

  static UnmodeledForce zero(int dof) {
    return UnmodeledForce{Eigen::VectorXd::Zero(dof), Eigen::VectorXd::Zero(dof),
                          Eigen::VectorXd::Zero(dof), Eigen::VectorXd::Zero(dof)};
  }

  Eigen::VectorXd torque(const Eigen::VectorXd& q, const Eigen::VectorXd& dq) const {
    return (alpha.array() * (beta.array() * dq.array()).tanh() +
            gamma.array() * dq.array().cube() + bias.array() * q.array().sin())
        .matrix();
  }
};

/// Plant state advanced by the integrator.
struct PlantState {
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
};

/**
 * The simulated robot. Each step applies the commanded torque minus the
 * unmodeled force to the reference rigid-body model and integrates with a
 * semi-implicit Euler step (velocity first, then position with the new
 * velocity), which keeps the energy of the conservative part bounded.
 */
class Plant {
 public:
  Plant(const KinematicChain& chain, Eigen::VectorXd pi_true, UnmodeledForce unmodeled,
        double dt)
      : chain_(chain), pi_(std::move(pi_true)), unmodeled_(std::move(unmodeled)), dt_(dt) {
    check_params(chain_, pi_);
    if (dt <= 0.0) {
      throw ContractViolation("Plant: dt must be positive");
    }
    const int n = chain_.dof();
    if (unmodeled_.alpha.size() != n || unmodeled_.beta.size() != n ||
        unmodeled_.gamma.size() != n || unmodeled_.bias.size() != n) {
      throw ContractViolation("Plant: unmodeled force dimension mismatch");
    }
  }

  const KinematicChain& chain() const { return chain_; }
  const Eigen::VectorXd& pi_true() const { return pi_; }
  double dt() const { return dt_; }

  /// Acceleration realized at (state, tau_cmd) including the unmodeled term.
  Eigen::VectorXd acceleration(const PlantState& s, const Eigen::VectorXd& tau_cmd) const {
    const Eigen::VectorXd tau_eff = tau_cmd - unmodeled_.torque(s.q, s.dq);
    return forward_dynamics(chain_, pi_, s.q, s.dq, tau_eff);
  }

  struct StepResult {
    PlantState state;
    Eigen::VectorXd ddq;  ///< acceleration realized during the step
  };

  StepResult advance(const PlantState& s, const Eigen::VectorXd& tau_cmd) const {
    check_dim(chain_, s.q, "plant q");
    check_dim(chain_, s.dq, "plant dq");
    check_dim(chain_, tau_cmd, "plant torque");
    StepResult out;
    out.ddq = acceleration(s, tau_cmd);
    out.state.dq = s.dq + dt_ * out.ddq;
    out.state.q = s.q + dt_ * out.state.dq;
    const double norm =
        std::max(out.state.q.cwiseAbs().maxCoeff(), out.state.dq.cwiseAbs().maxCoeff());
    if (!std::isfinite(norm) || norm > 1e6) {
      throw SimulationDivergence("Plant::advance: state norm exceeded divergence bound");
    }
    return out;
  }

  PlantState step(const PlantState& s, const Eigen::VectorXd& tau_cmd) const {
    return advance(s, tau_cmd).state;
  }

 private:
  KinematicChain chain_;
  Eigen::VectorXd pi_;
  UnmodeledForce unmodeled_;
  double dt_;
};

}  // namespace semidyn
