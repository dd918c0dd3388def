/**
 * @file rnea.hpp
 * @brief Recursive Newton-Euler dynamics for fixed-base revolute chains.
 *
 * All link quantities are expressed in the link's own frame with inertial
 * parameters taken about the link-frame origin, so joint torques are exactly
 * linear in the parameter vector. The forward (kinematic) sweep is parameter
 * independent and cached in RneaPass; backward (force) sweeps can then be
 * repeated cheaply for different parameter vectors or single-parameter basis
 * directions, which is what makes regressor assembly affordable.
 */
#pragma once

#include <vector>

#include "semidyn/chain.hpp"

namespace semidyn {

/// Width of the tanh(dq / w) smoothing that replaces sign(dq) in the Coulomb
/// friction term. The same constant is used by the plant, the inverse
/// dynamics, and the regressor so the model family stays self-consistent.
/// The width bounds the friction term's velocity stiffness at f_c / w; it is
/// kept wide enough that a discrete-time controller at millisecond steps
/// retains margin against that stiffness on the lightest joints.
inline constexpr double kCoulombSmoothing = 0.05;

/// Per-link kinematic quantities from one forward sweep. Parameter
/// independent: reusable across any number of backward (force) sweeps.
struct RneaPass {
  std::vector<Eigen::Matrix3d> rot_to_link;      // maps parent-frame vectors into link i
  std::vector<Eigen::Vector3d> origin_in_parent; // link-i origin, parent frame
  std::vector<Eigen::Vector3d> omega;            // angular velocity, link frame
  std::vector<Eigen::Vector3d> domega;           // angular acceleration, link frame
  std::vector<Eigen::Vector3d> accel;            // classical origin acceleration
                                                 // (gravity folded into the base)
};

/// Forward sweep: propagate velocities and accelerations root to tip.
/// Gravity enters as an equivalent base acceleration of -g.
inline RneaPass rnea_forward(const KinematicChain& chain, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& dq, const Eigen::VectorXd& ddq,
                             bool with_gravity) {
  const int n = chain.dof();
  RneaPass pass;
  pass.rot_to_link.resize(n);
  pass.origin_in_parent.resize(n);
  pass.omega.resize(n);
  pass.domega.resize(n);
  pass.accel.resize(n);

  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  Eigen::Vector3d dw = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = with_gravity ? Eigen::Vector3d(-chain.gravity()) : Eigen::Vector3d::Zero();

  for (int i = 0; i < n; ++i) {
    const RevoluteJoint& joint = chain.joint(i);
    const Eigen::Matrix3d rot =
        (joint.origin_rotation * Eigen::AngleAxisd(q[i], joint.axis)).transpose();
    const Eigen::Vector3d& p = joint.origin_translation;
    const Eigen::Vector3d& z = joint.axis;

    // The joint origin is a material point of the parent, so its classical
    // acceleration uses the parent's angular motion only.
    const Eigen::Vector3d a_origin = rot * (a + dw.cross(p) + w.cross(w.cross(p)));
    const Eigen::Vector3d w_parent = rot * w;
    const Eigen::Vector3d w_link = w_parent + z * dq[i];
    const Eigen::Vector3d dw_link = rot * dw + z * ddq[i] + w_parent.cross(z * dq[i]);

    pass.rot_to_link[i] = rot;
    pass.origin_in_parent[i] = p;
    pass.omega[i] = w_link;
    pass.domega[i] = dw_link;
    pass.accel[i] = a_origin;

    w = w_link;
    dw = dw_link;
    a = a_origin;
  }
  return pass;
}

/// Net wrench (force, moment about the frame origin) produced by link i's
/// inertial parameters [m, m*c, I] under the cached motion.
inline void link_wrench(const RneaPass& pass, int i,
                        const Eigen::Ref<const Eigen::VectorXd>& params10,
                        Eigen::Vector3d& force, Eigen::Vector3d& moment) {
  const double m = params10[0];
  const Eigen::Vector3d h = params10.segment<3>(1);
  const Eigen::Matrix3d inertia = inertia_from_packed(params10.segment<6>(4));
  const Eigen::Vector3d& w = pass.omega[i];
  const Eigen::Vector3d& dw = pass.domega[i];
  const Eigen::Vector3d& a = pass.accel[i];
  force = m * a + dw.cross(h) + w.cross(w.cross(h));
  moment = inertia * dw + w.cross(inertia * w) + h.cross(a);
}

/// Backward sweep with a full parameter vector (friction excluded).
inline Eigen::VectorXd rnea_backward(const KinematicChain& chain, const RneaPass& pass,
                                     const Eigen::VectorXd& pi) {
  const int n = chain.dof();
  Eigen::VectorXd tau(n);
  Eigen::Vector3d f_acc = Eigen::Vector3d::Zero();
  Eigen::Vector3d n_acc = Eigen::Vector3d::Zero();
  for (int i = n - 1; i >= 0; --i) {
    Eigen::Vector3d f, mom;
    link_wrench(pass, i, pi.segment(KinematicChain::kParamsPerJoint * i, 10), f, mom);
    if (i + 1 < n) {
      // Fold the accumulated child wrench (frame i+1) into frame i.
      const Eigen::Vector3d f_child = pass.rot_to_link[i + 1].transpose() * f_acc;
      mom += pass.rot_to_link[i + 1].transpose() * n_acc +
             pass.origin_in_parent[i + 1].cross(f_child);
      f += f_child;
    }
    tau[i] = chain.joint(i).axis.dot(mom);
    f_acc = f;
    n_acc = mom;
  }
  return tau;
}

/// Backward sweep for a single unit inertial parameter (index 0..9) of one
/// link: torques vanish distal to the link, so only rows 0..link are filled.
inline void rnea_backward_basis(const KinematicChain& chain, const RneaPass& pass, int link,
                                int param_index, Eigen::Ref<Eigen::VectorXd> tau_out) {
  const Eigen::Vector3d& w = pass.omega[link];
  const Eigen::Vector3d& dw = pass.domega[link];
  const Eigen::Vector3d& a = pass.accel[link];

  Eigen::Vector3d f = Eigen::Vector3d::Zero();
  Eigen::Vector3d mom = Eigen::Vector3d::Zero();
  if (param_index == 0) {
    f = a;  // unit mass
  } else if (param_index < 4) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[param_index - 1] = 1.0;  // unit first moment
    f = dw.cross(e) + w.cross(w.cross(e));
    mom = e.cross(a);
  } else {
    // Unit inertia entry; off-diagonal entries occupy two tensor slots.
    static constexpr int kRow[6] = {0, 0, 0, 1, 1, 2};
    static constexpr int kCol[6] = {0, 1, 2, 1, 2, 2};
    const int r = kRow[param_index - 4];
    const int c = kCol[param_index - 4];
    Eigen::Matrix3d basis = Eigen::Matrix3d::Zero();
    basis(r, c) = 1.0;
    basis(c, r) = 1.0;
    mom = basis * dw + w.cross(basis * w);
  }

  tau_out.setZero();
  tau_out[link] = chain.joint(link).axis.dot(mom);
  for (int i = link; i > 0; --i) {
    const Eigen::Vector3d f_parent = pass.rot_to_link[i].transpose() * f;
    const Eigen::Vector3d n_parent =
        pass.rot_to_link[i].transpose() * mom + pass.origin_in_parent[i].cross(f_parent);
    tau_out[i - 1] = chain.joint(i - 1).axis.dot(n_parent);
    f = f_parent;
    mom = n_parent;
  }
}

/// Smoothed Coulomb + viscous joint friction for the given velocity-like
/// vector (the measured velocity in the plant model, the reference velocity
/// in the two-velocity torque map).
inline Eigen::VectorXd friction_torque(const KinematicChain& chain, const Eigen::VectorXd& pi,
                                       const Eigen::VectorXd& dq_like) {
  const int n = chain.dof();
  Eigen::VectorXd tau(n);
  for (int i = 0; i < n; ++i) {
    const int base = KinematicChain::kParamsPerJoint * i;
    tau[i] = pi[base + pi_layout::kCoulomb] * std::tanh(dq_like[i] / kCoulombSmoothing) +
             pi[base + pi_layout::kViscous] * dq_like[i];
  }
  return tau;
}

/**
 * @brief Joint torques that realize the given state under parameters pi.
 *
 * Includes gravity and the smoothed Coulomb/viscous friction model. Linear
 * in pi by construction.
 */
inline Eigen::VectorXd inverse_dynamics(const KinematicChain& chain, const Eigen::VectorXd& pi,
                                        const JointState& state) {
  check_params(chain, pi);
  check_state(chain, state);
  const RneaPass pass = rnea_forward(chain, state.q, state.dq, state.ddq, true);
  return rnea_backward(chain, pass, pi) + friction_torque(chain, pi, state.dq);
}

/// Joint-space inertia matrix, assembled column-by-column from unit
/// accelerations with gravity and velocities off; symmetrized on return.
inline Eigen::MatrixXd mass_matrix(const KinematicChain& chain, const Eigen::VectorXd& pi,
                                   const Eigen::VectorXd& q) {
  check_params(chain, pi);
  check_dim(chain, q, "q");
  const int n = chain.dof();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd m(n, n);
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    unit[j] = 1.0;
    const RneaPass pass = rnea_forward(chain, q, zero, unit, false);
    m.col(j) = rnea_backward(chain, pass, pi);
    unit[j] = 0.0;
  }
  return 0.5 * (m + m.transpose());
}

/// Condition-number ceiling past which the inertia matrix is treated as
/// numerically singular.
inline constexpr double kInertiaConditionLimit = 1e12;

/**
 * @brief Forward dynamics: joint accelerations under applied torque tau.
 *
 * Throws SingularInertia when the inertia matrix is not safely positive
 * definite (condition number above kInertiaConditionLimit or a
 * non-positive eigenvalue).
 */
inline Eigen::VectorXd forward_dynamics(const KinematicChain& chain, const Eigen::VectorXd& pi,
                                        const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                                        const Eigen::VectorXd& tau) {
  check_dim(chain, tau, "tau");
  const Eigen::MatrixXd m = mass_matrix(chain, pi, q);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi / lo > kInertiaConditionLimit) {
    throw SingularInertia("forward_dynamics: inertia matrix singular (min eig " +
                          std::to_string(lo) + ")");
  }
  const JointState bias_state{q, dq, Eigen::VectorXd::Zero(chain.dof())};
  const Eigen::VectorXd bias = inverse_dynamics(chain, pi, bias_state);
  return eig.eigenvectors() *
         ((eig.eigenvectors().transpose() * (tau - bias)).array() /
          eig.eigenvalues().array())
             .matrix();
}

/// World pose of every link frame.
struct LinkPose {
  Eigen::Matrix3d rot;  // link -> world
  Eigen::Vector3d origin;
};

inline std::vector<LinkPose> forward_kinematics(const KinematicChain& chain,
                                                const Eigen::VectorXd& q) {
  check_dim(chain, q, "q");
  std::vector<LinkPose> poses(static_cast<size_t>(chain.dof()));
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (int i = 0; i < chain.dof(); ++i) {
    const RevoluteJoint& joint = chain.joint(i);
    origin += rot * joint.origin_translation;
    rot = rot * (joint.origin_rotation * Eigen::AngleAxisd(q[i], joint.axis));
    poses[static_cast<size_t>(i)] = LinkPose{rot, origin};
  }
  return poses;
}

/// Total mechanical energy (kinetic + gravitational potential). Friction
/// entries of pi are ignored; intended for conservative-motion checks.
inline double mechanical_energy(const KinematicChain& chain, const Eigen::VectorXd& pi,
                                const Eigen::VectorXd& q, const Eigen::VectorXd& dq) {
  const Eigen::MatrixXd m = mass_matrix(chain, pi, q);
  const double kinetic = 0.5 * dq.dot(m * dq);
  const std::vector<LinkPose> poses = forward_kinematics(chain, q);
  double potential = 0.0;
  for (int i = 0; i < chain.dof(); ++i) {
    const int base = KinematicChain::kParamsPerJoint * i;
    const double mass = pi[base + pi_layout::kMass];
    const Eigen::Vector3d h = pi.segment<3>(base + pi_layout::kFirstMoment);
    const auto& pose = poses[static_cast<size_t>(i)];
    potential -= chain.gravity().dot(mass * pose.origin + pose.rot * h);
  }
  return kinetic + potential;
}

}  // namespace semidyn
