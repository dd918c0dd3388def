/**
 * @file model_io.hpp
 * @brief Chain model files: geometry, gravity, and reference inertial
 *        parameters in a small JSON schema.
 */
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semidyn/chain.hpp"

namespace semidyn {

/// A kinematic chain bundled with the reference (ground-truth) parameter
/// vector the simulated plant runs on.
struct ChainModel {
  std::string name;
  KinematicChain chain;
  Eigen::VectorXd pi_reference;
};

namespace detail {

inline Eigen::Vector3d vec3_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw ContractViolation(std::string("chain model: missing 3-vector field ") + key);
  }
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) v[i] = j[key][i].get<double>();
  return v;
}

/// Roll-pitch-yaw to rotation matrix, extrinsic x-y-z convention:
/// R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Eigen::Matrix3d rotation_from_rpy(const Eigen::Vector3d& rpy) {
  return (Eigen::AngleAxisd(rpy[2], Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(rpy[1], Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rpy[0], Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

}  // namespace detail

inline ChainModel chain_model_from_json(const nlohmann::json& doc) {
  if (!doc.contains("joints") || !doc["joints"].is_array() || doc["joints"].empty()) {
    throw ContractViolation("chain model: needs a non-empty joints array");
  }
  const Eigen::Vector3d gravity = detail::vec3_field(doc, "gravity");

  std::vector<RevoluteJoint> joints;
  Eigen::VectorXd pi(KinematicChain::kParamsPerJoint *
                     static_cast<int>(doc["joints"].size()));
  int offset = 0;
  for (const auto& jj : doc["joints"]) {
    RevoluteJoint joint;
    joint.axis = detail::vec3_field(jj, "axis");
    joint.origin_rotation = detail::rotation_from_rpy(detail::vec3_field(jj, "origin_rotation_rpy"));
    joint.origin_translation = detail::vec3_field(jj, "origin_translation");
    joints.push_back(joint);

    if (!jj.contains("pi_reference") ||
        jj["pi_reference"].size() != KinematicChain::kParamsPerJoint) {
      throw ContractViolation("chain model: each joint needs pi_reference[12]");
    }
    for (int i = 0; i < KinematicChain::kParamsPerJoint; ++i) {
      pi[offset + i] = jj["pi_reference"][i].get<double>();
    }
    offset += KinematicChain::kParamsPerJoint;
  }

  ChainModel model{doc.value("name", std::string("unnamed")),
                   KinematicChain(joints, gravity), std::move(pi)};
  check_params(model.chain, model.pi_reference);
  return model;
}

inline ChainModel load_chain_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ContractViolation("chain model: cannot open " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation("chain model: parse failure in " + path + ": " + e.what());
  }
  return chain_model_from_json(doc);
}

}  // namespace semidyn
