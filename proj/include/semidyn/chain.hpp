/**
 * @file chain.hpp
 * @brief Fixed-base serial-chain description and the inertial parameter layout.
 */
#pragma once

#include <utility>
#include <vector>

#include "semidyn/common.hpp"

namespace semidyn {

/// One revolute joint: its rotation axis and the fixed transform that places
/// the joint frame (at q = 0) relative to the parent link frame.
struct RevoluteJoint {
  Eigen::Vector3d axis;                // unit rotation axis, link frame
  Eigen::Matrix3d origin_rotation;     // parent <- link orientation at q = 0
  Eigen::Vector3d origin_translation;  // link origin in the parent frame [m]
};

/**
 * @brief Geometry of a fixed-base serial chain of revolute joints.
 *
 * The chain is immutable after construction; every dynamics routine takes it
 * by const reference. Link i's frame has its origin on joint i's axis, so
 * inertial parameters are always expressed about that origin.
 */
class KinematicChain {
 public:
  /// Entries of the flat parameter vector per joint:
  /// [m, m*cx, m*cy, m*cz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz, f_coul, f_visc].
  static constexpr int kParamsPerJoint = 12;

  KinematicChain(std::vector<RevoluteJoint> joints, const Eigen::Vector3d& gravity)
      : joints_(std::move(joints)), gravity_(gravity) {
    if (joints_.empty()) {
      throw ContractViolation("KinematicChain: at least one joint required");
    }
    if (!gravity_.allFinite()) {
      throw ContractViolation("KinematicChain: gravity must be finite");
    }
    const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
    for (const auto& j : joints_) {
      if (!j.axis.allFinite() || std::abs(j.axis.norm() - 1.0) > 1e-12) {
        throw ContractViolation("KinematicChain: joint axis must be a unit vector");
      }
      const double ortho =
          (j.origin_rotation.transpose() * j.origin_rotation - eye).cwiseAbs().maxCoeff();
      if (!j.origin_rotation.allFinite() || ortho > 1e-12) {
        throw ContractViolation("KinematicChain: origin rotation must be orthonormal");
      }
      if (!j.origin_translation.allFinite()) {
        throw ContractViolation("KinematicChain: origin translation must be finite");
      }
    }
  }

  int dof() const { return static_cast<int>(joints_.size()); }
  int param_dim() const { return kParamsPerJoint * dof(); }
  const RevoluteJoint& joint(int i) const { return joints_[static_cast<size_t>(i)]; }
  const Eigen::Vector3d& gravity() const { return gravity_; }

 private:
  std::vector<RevoluteJoint> joints_;
  Eigen::Vector3d gravity_;
};

/// Joint-space state: positions, velocities, accelerations.
struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
  Eigen::VectorXd ddq;
};

/// Offsets inside one joint's 12-entry parameter block.
namespace pi_layout {
inline constexpr int kMass = 0;
inline constexpr int kFirstMoment = 1;  // 3 entries, m * com
inline constexpr int kInertia = 4;      // 6 entries: Ixx Ixy Ixz Iyy Iyz Izz
inline constexpr int kCoulomb = 10;
inline constexpr int kViscous = 11;
}  // namespace pi_layout

/// Symmetric inertia tensor from the 6-entry packed form.
inline Eigen::Matrix3d inertia_from_packed(const Eigen::Ref<const Eigen::VectorXd>& p6) {
  Eigen::Matrix3d inertia;
  inertia << p6[0], p6[1], p6[2],
             p6[1], p6[3], p6[4],
             p6[2], p6[4], p6[5];
  return inertia;
}

inline void check_dim(const KinematicChain& chain, const Eigen::VectorXd& v, const char* what) {
  if (v.size() != chain.dof()) {
    throw ContractViolation(std::string(what) + ": expected length " +
                            std::to_string(chain.dof()) + ", got " +
                            std::to_string(v.size()));
  }
  if (!v.allFinite()) {
    throw ContractViolation(std::string(what) + ": entries must be finite");
  }
}

inline void check_params(const KinematicChain& chain, const Eigen::VectorXd& pi) {
  if (pi.size() != chain.param_dim()) {
    throw ContractViolation("parameter vector: expected length " +
                            std::to_string(chain.param_dim()) + ", got " +
                            std::to_string(pi.size()));
  }
  if (!pi.allFinite()) {
    throw ContractViolation("parameter vector: entries must be finite");
  }
}

inline void check_state(const KinematicChain& chain, const JointState& s) {
  check_dim(chain, s.q, "state q");
  check_dim(chain, s.dq, "state dq");
  check_dim(chain, s.ddq, "state ddq");
}

}  // namespace semidyn
