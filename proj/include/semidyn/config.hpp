/**
 * @file config.hpp
 * @brief Experiment configuration: one JSON document covering the chain
 *        file, controller gains, learner thresholds, sensor/noise settings,
 *        trajectory generation, and the phase schedule. Every field has a
 *        default, so a config may specify only what it changes.
 */
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semidyn/adaptive.hpp"
#include "semidyn/common.hpp"
#include "semidyn/plant.hpp"
#include "semidyn/sensors.hpp"
#include "semidyn/trajectory.hpp"

namespace semidyn {

/// One contiguous stretch of the run with fixed learner/transform gating.
struct PhaseSpec {
  double start = 0.0;
  double end = 0.0;
  bool np_learn = false;     ///< residual model ingests samples
  bool np_output = false;    ///< residual model torque reaches the command
  bool p_learn = false;      ///< parametric estimate adapts
  bool transform_on = false; ///< residual model is re-aligned after each adaptation step
};

struct GainSettings {
  Eigen::VectorXd lambda;  ///< tracking-error gain diagonal (1/s)
  Eigen::VectorXd kd;      ///< feedback gain diagonal (N m s/rad)
  double r_weight = 1.0;   ///< prediction-error weight (R = r_weight * I)
  double lambda0 = 1.5;    ///< forgetting-rate ceiling (1/s)
  double k0 = 0.1;         ///< gain-bound coefficient; norm bound = lambda0/k0
  double filter_pole = 20.0; ///< torque/regressor low-pass pole (rad/s)
  double p0 = 0.01;        ///< initial adaptation gain (P = p0 * I)
  double adapt_deadzone = 0.0; ///< learning-side tracking-error dead zone (rad/s)
  double r_normalization = 0.0; ///< prediction-weight normalization: R/(1+k|W|^2)
  double projection_radius = 0.0; ///< estimate box half-width, in units of |initial| (0 = off)
};

struct GmmSettings {
  double nu_create = 0.01; ///< novelty likelihood threshold for new components
  double sp_min = 0.1;     ///< prune: accumulated posterior mass floor
  long age_min = 200;      ///< prune: minimum updates before judging a component
  double sigma_scale = 1.0;///< scale on the warmup-estimated initial covariance
  int warmup = 300;        ///< samples used to estimate the initial covariance
};

struct BaselineSettings {
  int features = 400;      ///< random Fourier feature count
  double bandwidth = 3.0;  ///< kernel bandwidth in standardized input units
  double reg = 1e-2;       ///< Tikhonov regularization
};

struct TrajectorySettings {
  double omega = 2.0 * M_PI / 10.0; ///< base frequency (one cycle per 10 s)
  int harmonics = 5;
  double coeff_scale = 0.35;
  int count = 5;          ///< trajectories in the repeating sequence
  int cycles = 1;         ///< cycles of each before moving on
  TrajectoryLimits limits;
  Eigen::VectorXd offset; ///< shared start posture; sized at load time
};

struct UnmodeledSettings {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd bias;
};

struct VirtualSettings {
  int trajectory_count = 7;
  int train_stride = 3;      ///< every third sample trains the models
  double pi_switch_scale = 0.5;
};

struct SineSettings {
  double x_min = -1.0;
  double x_max = 7.0;
  int grid = 1000;
  int train_points = 4000;
  double scale_after = 0.2;  ///< the function becomes scale_after * sin(x)
  double nu_create = 0.02;
  double sigma_x = 0.35;
  double sigma_y = 0.2;
};

struct RunConfig {
  std::string chain_file = "models/kuka7.json";
  double dt = 1e-3;
  int learn_stride = 10;  ///< parametric learning at every 10th control step
  int gmm_stride = 3;     ///< residual model ingests every 3rd control step
  int log_stride = 10;
  int transform_stride = 1; ///< mixture re-alignment every Nth learning tick
  int plot_joint = 2;     ///< 1-based joint highlighted in plot data
  double delta_clamp = 50.0; ///< per-entry bound on one transform increment
  double pi_init_scale = 0.5; ///< closed-loop runs start at this fraction of the true parameters
  GainSettings gains;
  GmmSettings gmm;
  BaselineSettings baseline;
  SensorSettings sensors;
  TrajectorySettings trajectory;
  UnmodeledSettings unmodeled;
  VirtualSettings virt;
  SineSettings sine;
  std::vector<PhaseSpec> phases;
};

namespace detail {

/// Accepts either a scalar (broadcast) or an n-element array.
inline Eigen::VectorXd vector_or_scalar(const nlohmann::json& j, int n, double fallback) {
  if (j.is_null()) return Eigen::VectorXd::Constant(n, fallback);
  if (j.is_number()) return Eigen::VectorXd::Constant(n, j.get<double>());
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != n) {
      throw ContractViolation("config: array field has wrong joint count");
    }
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = j[i].get<double>();
    return v;
  }
  throw ContractViolation("config: expected number or array");
}

inline nlohmann::json field(const nlohmann::json& j, const char* key) {
  return j.contains(key) ? j[key] : nlohmann::json();
}

}  // namespace detail

/// The published error gains: 20 on the proximal four joints, 10 on the
/// distal ones, shrunk proportionally for smaller chains.
inline Eigen::VectorXd default_lambda(int dof) {
  Eigen::VectorXd v(dof);
  for (int i = 0; i < dof; ++i) v[i] = (i < 4) ? 20.0 : 10.0;
  return v;
}

inline Eigen::VectorXd default_kd(int dof) {
  Eigen::VectorXd v(dof);
  for (int i = 0; i < dof; ++i) v[i] = (i < 4) ? 5.0 : 2.0;
  return v;
}

inline std::vector<PhaseSpec> default_phases() {
  return {
      PhaseSpec{0.0, 90.0, true, false, false, false},
      PhaseSpec{90.0, 180.0, true, true, false, false},
      PhaseSpec{180.0, 360.0, false, true, true, true},
      PhaseSpec{360.0, 600.0, true, true, true, true},
  };
}

/**
 * In the no-transform variant the re-alignment is dropped and the phase that
 * froze the residual learner to isolate the transform becomes identical to
 * the final phase: both components simply learn side by side.
 */
inline std::vector<PhaseSpec> apply_transform_variant(std::vector<PhaseSpec> phases,
                                                      bool transform_enabled) {
  for (auto& p : phases) {
    if (!transform_enabled) {
      if (p.transform_on) p.np_learn = true;
      p.transform_on = false;
    }
  }
  return phases;
}

inline void validate_phases(const std::vector<PhaseSpec>& phases) {
  if (phases.empty()) {
    throw ContractViolation("config: phase list must not be empty");
  }
  double cursor = 0.0;
  for (const auto& p : phases) {
    if (p.start != cursor || p.end <= p.start) {
      throw ContractViolation("config: phases must be contiguous from 0 with positive length");
    }
    cursor = p.end;
  }
}

/// Builds a RunConfig from a parsed document; `dof` sizes the per-joint
/// defaults and is taken from the chain file by the caller.
inline RunConfig run_config_from_json(const nlohmann::json& doc, int dof) {
  RunConfig cfg;
  cfg.chain_file = doc.value("chain", cfg.chain_file);
  cfg.dt = doc.value("dt", cfg.dt);
  cfg.learn_stride = doc.value("learn_stride", cfg.learn_stride);
  cfg.gmm_stride = doc.value("gmm_stride", cfg.gmm_stride);
  cfg.log_stride = doc.value("log_stride", cfg.log_stride);
  cfg.transform_stride = doc.value("transform_stride", cfg.transform_stride);
  cfg.plot_joint = doc.value("plot_joint", cfg.plot_joint);
  cfg.delta_clamp = doc.value("delta_clamp", cfg.delta_clamp);
  cfg.pi_init_scale = doc.value("pi_init_scale", cfg.pi_init_scale);
  if (cfg.dt <= 0.0 || cfg.learn_stride < 1 || cfg.gmm_stride < 1 || cfg.log_stride < 1 ||
      cfg.transform_stride < 1) {
    throw ContractViolation("config: rates must be positive");
  }
  if (cfg.plot_joint < 1 || cfg.plot_joint > dof) {
    throw ContractViolation("config: plot_joint out of range");
  }

  const nlohmann::json gains = detail::field(doc, "gains");
  cfg.gains.lambda = detail::vector_or_scalar(detail::field(gains, "lambda"), dof, 0.0);
  if (gains.is_null() || !gains.contains("lambda")) cfg.gains.lambda = default_lambda(dof);
  cfg.gains.kd = detail::vector_or_scalar(detail::field(gains, "kd"), dof, 0.0);
  if (gains.is_null() || !gains.contains("kd")) cfg.gains.kd = default_kd(dof);
  if (!gains.is_null()) {
    cfg.gains.r_weight = gains.value("r_weight", cfg.gains.r_weight);
    cfg.gains.lambda0 = gains.value("lambda0", cfg.gains.lambda0);
    cfg.gains.k0 = gains.value("k0", cfg.gains.k0);
    cfg.gains.filter_pole = gains.value("filter_pole", cfg.gains.filter_pole);
    cfg.gains.adapt_deadzone = gains.value("adapt_deadzone", cfg.gains.adapt_deadzone);
    cfg.gains.p0 = gains.value("p0", cfg.gains.p0);
    cfg.gains.r_normalization = gains.value("r_normalization", cfg.gains.r_normalization);
    cfg.gains.projection_radius = gains.value("projection_radius", cfg.gains.projection_radius);
    if (cfg.gains.r_normalization < 0.0 || cfg.gains.projection_radius < 0.0) {
      throw ContractViolation("config: normalization and projection must be non-negative");
    }
  }

  const nlohmann::json gmm = detail::field(doc, "gmm");
  if (!gmm.is_null()) {
    cfg.gmm.nu_create = gmm.value("nu_create", cfg.gmm.nu_create);
    cfg.gmm.sp_min = gmm.value("sp_min", cfg.gmm.sp_min);
    cfg.gmm.age_min = gmm.value("age_min", cfg.gmm.age_min);
    cfg.gmm.sigma_scale = gmm.value("sigma_scale", cfg.gmm.sigma_scale);
    cfg.gmm.warmup = gmm.value("warmup", cfg.gmm.warmup);
  }

  const nlohmann::json base = detail::field(doc, "baseline");
  if (!base.is_null()) {
    cfg.baseline.features = base.value("features", cfg.baseline.features);
    cfg.baseline.bandwidth = base.value("bandwidth", cfg.baseline.bandwidth);
    cfg.baseline.reg = base.value("reg", cfg.baseline.reg);
  }

  const nlohmann::json sensors = detail::field(doc, "sensors");
  if (!sensors.is_null()) {
    cfg.sensors.sigma_q = sensors.value("sigma_q", cfg.sensors.sigma_q);
    cfg.sensors.kalman_process = sensors.value("kalman_process", cfg.sensors.kalman_process);
    cfg.sensors.pll_bandwidth = sensors.value("pll_bandwidth", cfg.sensors.pll_bandwidth);
    cfg.sensors.exact = sensors.value("exact", cfg.sensors.exact);
  }

  const nlohmann::json traj = detail::field(doc, "trajectory");
  cfg.trajectory.offset = detail::vector_or_scalar(detail::field(traj, "offset"), dof, 0.0);
  if (!traj.is_null()) {
    cfg.trajectory.omega = traj.value("omega", cfg.trajectory.omega);
    cfg.trajectory.harmonics = traj.value("harmonics", cfg.trajectory.harmonics);
    cfg.trajectory.coeff_scale = traj.value("coeff_scale", cfg.trajectory.coeff_scale);
    cfg.trajectory.count = traj.value("count", cfg.trajectory.count);
    cfg.trajectory.cycles = traj.value("cycles", cfg.trajectory.cycles);
    cfg.trajectory.limits.q_abs = traj.value("q_limit", cfg.trajectory.limits.q_abs);
    cfg.trajectory.limits.dq_abs = traj.value("dq_limit", cfg.trajectory.limits.dq_abs);
    cfg.trajectory.limits.ddq_abs = traj.value("ddq_limit", cfg.trajectory.limits.ddq_abs);
  }

  const nlohmann::json un = detail::field(doc, "unmodeled");
  cfg.unmodeled.alpha = detail::vector_or_scalar(detail::field(un, "alpha"), dof, 0.0);
  cfg.unmodeled.beta = detail::vector_or_scalar(detail::field(un, "beta"), dof, 5.0);
  cfg.unmodeled.gamma = detail::vector_or_scalar(detail::field(un, "gamma"), dof, 0.0);
  cfg.unmodeled.bias = detail::vector_or_scalar(detail::field(un, "bias"), dof, 0.0);

  const nlohmann::json virt = detail::field(doc, "virtual");
  if (!virt.is_null()) {
    cfg.virt.trajectory_count = virt.value("trajectory_count", cfg.virt.trajectory_count);
    cfg.virt.train_stride = virt.value("train_stride", cfg.virt.train_stride);
    cfg.virt.pi_switch_scale = virt.value("pi_switch_scale", cfg.virt.pi_switch_scale);
  }

  const nlohmann::json sine = detail::field(doc, "sine");
  if (!sine.is_null()) {
    cfg.sine.x_min = sine.value("x_min", cfg.sine.x_min);
    cfg.sine.x_max = sine.value("x_max", cfg.sine.x_max);
    cfg.sine.grid = sine.value("grid", cfg.sine.grid);
    cfg.sine.train_points = sine.value("train_points", cfg.sine.train_points);
    cfg.sine.scale_after = sine.value("scale_after", cfg.sine.scale_after);
    cfg.sine.nu_create = sine.value("nu_create", cfg.sine.nu_create);
    cfg.sine.sigma_x = sine.value("sigma_x", cfg.sine.sigma_x);
    cfg.sine.sigma_y = sine.value("sigma_y", cfg.sine.sigma_y);
  }

  if (doc.contains("phases")) {
    cfg.phases.clear();
    for (const auto& jp : doc["phases"]) {
      PhaseSpec p;
      p.start = jp.value("start", 0.0);
      p.end = jp.at("end").get<double>();
      p.np_learn = jp.value("np_learn", false);
      p.np_output = jp.value("np_output", false);
      p.p_learn = jp.value("p_learn", false);
      p.transform_on = jp.value("transform", false);
      cfg.phases.push_back(p);
    }
    // Allow configs to give only end times; starts chain together.
    for (std::size_t i = 1; i < cfg.phases.size(); ++i) {
      if (cfg.phases[i].start == 0.0) cfg.phases[i].start = cfg.phases[i - 1].end;
    }
  } else {
    cfg.phases = default_phases();
  }
  validate_phases(cfg.phases);
  return cfg;
}

/// Reads the config document and the chain file it points at.
struct LoadedConfig {
  RunConfig run;
  nlohmann::json raw;
};

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ContractViolation("config: cannot open " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation("config: parse failure in " + path + ": " + e.what());
  }
  return doc;
}

}  // namespace semidyn
