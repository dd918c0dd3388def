/**
 * @file experiment.hpp
 * @brief The experiment runners: a deterministic closed-loop engine for the
 *        phased study, the open-loop virtual-model study, and the scalar
 *        sine illustration. Each writes run/summary CSVs, a mixture
 *        checkpoint, and figure-ready plot data under one output directory.
 */
#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semidyn/adaptive.hpp"
#include "semidyn/config.hpp"
#include "semidyn/gmm.hpp"
#include "semidyn/gmm_io.hpp"
#include "semidyn/log.hpp"
#include "semidyn/metrics.hpp"
#include "semidyn/model_io.hpp"
#include "semidyn/plant.hpp"
#include "semidyn/regressor.hpp"
#include "semidyn/rrls.hpp"
#include "semidyn/sensors.hpp"
#include "semidyn/trajectory.hpp"
#include "semidyn/transform.hpp"

namespace semidyn {

/// One summary.csv line: a named scalar, optionally attached to a phase
/// and/or joint (0 = not applicable).
struct SummaryRow {
  std::string section;
  std::string metric;
  int phase = 0;
  int joint = 0;
  double value = 0.0;
};

inline void write_summary(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw ContractViolation("write_summary: cannot open " + path);
  }
  out << "section,metric,phase,joint,value\n";
  for (const auto& r : rows) {
    out << r.section << "," << r.metric << "," << r.phase << "," << r.joint << ","
        << format_double(r.value) << "\n";
  }
}

/**
 * Incremental residual learner with a warmup window. The first `warmup`
 * samples only estimate the initial per-dimension covariance (scaled
 * diagonal of the sample variance); the model is then created and the
 * buffered samples are replayed into it, after which ingestion is purely
 * incremental with pruning after every update.
 */
class ResidualLearner {
 public:
  ResidualLearner(int input_dim, int output_dim, const GmmSettings& settings)
      : in_dim_(input_dim), out_dim_(output_dim), settings_(settings) {
    if (input_dim <= 0 || output_dim <= 0 || settings.warmup < 2) {
      throw ContractViolation("ResidualLearner: bad dimensions or warmup length");
    }
  }

  bool ready() const { return model_.has_value(); }
  int components() const {
    return model_ ? static_cast<int>(model_->components().size()) : 0;
  }
  const MixtureModel& model() const {
    if (!model_) {
      throw ContractViolation("ResidualLearner::model: not warmed up yet");
    }
    return *model_;
  }
  void replace(MixtureModel m) { model_ = std::move(m); }

  void ingest(const Eigen::VectorXd& sample) {
    if (sample.size() != in_dim_ + out_dim_) {
      throw ContractViolation("ResidualLearner::ingest: sample dimension mismatch");
    }
    if (!model_) {
      buffer_.push_back(sample);
      if (static_cast<int>(buffer_.size()) >= settings_.warmup) build_from_buffer();
      return;
    }
    model_->update(sample);
    model_->prune();
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& x_in) const {
    if (!model_ || model_->components().empty()) {
      return Eigen::VectorXd::Zero(out_dim_);
    }
    return model_->predict(x_in).output;
  }

 private:
  void build_from_buffer() {
    const int d = in_dim_ + out_dim_;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& x : buffer_) mean += x;
    mean /= static_cast<double>(buffer_.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& x : buffer_) var += (x - mean).array().square().matrix();
    var /= static_cast<double>(buffer_.size() - 1);

    // Guard dimensions the warmup window barely moved: floor each standard
    // deviation at a fraction of the largest one.
    const double sd_floor = std::max(1e-6, 0.05 * std::sqrt(var.maxCoeff()));
    Eigen::VectorXd sigma = var.cwiseSqrt().cwiseMax(sd_floor);
    Eigen::MatrixXd sigma_init =
        (settings_.sigma_scale * sigma.array().square()).matrix().asDiagonal();

    model_.emplace(in_dim_, out_dim_, std::move(sigma_init), settings_.nu_create,
                   settings_.sp_min, settings_.age_min);
    for (const auto& x : buffer_) {
      model_->update(x);
      model_->prune();
    }
    buffer_.clear();
    buffer_.shrink_to_fit();
  }

  int in_dim_;
  int out_dim_;
  GmmSettings settings_;
  std::vector<Eigen::VectorXd> buffer_;
  std::optional<MixtureModel> model_;
};

/// Everything a closed-loop run reports back to callers (tests, CLI).
struct ClosedLoopResult {
  std::vector<SummaryRow> summary;
  Eigen::VectorXd pi_hat;
  int final_components = 0;
  std::vector<int> components_at_phase_end;          // one per phase
  std::vector<std::pair<double, double>> prediction_error;  // (t, ||e||)
  double p_norm_max = 0.0;
  double p_min_eig = std::numeric_limits<double>::infinity();
  int transform_failures = 0;
  bool diverged = false;
  double end_time = 0.0;
};

/**
 * The deterministic closed-loop engine. One control tick: sense, resolve
 * reference rates, compute the commanded torque from the parametric
 * feedforward, the residual prediction, and velocity feedback; at the
 * learning cadence filter torque/regressor and adapt the parameters (with
 * the residual model re-aligned immediately after each accepted parameter
 * step); at the ingestion cadence feed the residual learner; at the log
 * cadence emit a row and accumulate phase metrics. Integration is
 * semi-implicit Euler on the simulated plant.
 *
 * Everything random flows from the seed through fixed stream ids, so a rerun
 * with the same config and seed reproduces run.csv byte for byte.
 */
inline ClosedLoopResult run_closed_loop(const RunConfig& cfg, const ChainModel& cm,
                                        std::uint64_t seed, const std::string& out_dir,
                                        bool transform_enabled) {
  namespace fs = std::filesystem;
  const KinematicChain& chain = cm.chain;
  const int n = chain.dof();
  const int p = chain.param_dim();
  const std::vector<PhaseSpec> phases = apply_transform_variant(cfg.phases, transform_enabled);
  validate_phases(phases);
  const double duration = phases.back().end;
  const long total_steps = std::lround(duration / cfg.dt);

  fs::create_directories(fs::path(out_dir) / "plotdata");

  Plant plant(chain, cm.pi_reference,
              UnmodeledForce{cfg.unmodeled.alpha, cfg.unmodeled.beta, cfg.unmodeled.gamma,
                             cfg.unmodeled.bias},
              cfg.dt);

  Rng traj_rng(mix_seed(seed, 1));
  std::vector<FourierTrajectory> parts;
  parts.reserve(cfg.trajectory.count);
  for (int k = 0; k < cfg.trajectory.count; ++k) {
    parts.push_back(sample_trajectory(n, cfg.trajectory.omega, cfg.trajectory.harmonics,
                                      cfg.trajectory.coeff_scale, cfg.trajectory.offset,
                                      cfg.trajectory.limits, traj_rng));
  }
  const TrajectorySequence traj(std::move(parts), cfg.trajectory.cycles);

  SensorChain sensors(n, cfg.sensors, cfg.dt);
  Rng noise_rng(mix_seed(seed, 2));

  AdaptiveGains gains;
  gains.lambda = cfg.gains.lambda;
  gains.kd = cfg.gains.kd;
  gains.r_weight = cfg.gains.r_weight * Eigen::MatrixXd::Identity(n, n);
  gains.lambda0 = cfg.gains.lambda0;
  gains.k0 = cfg.gains.k0;
  gains.filter_pole = cfg.gains.filter_pole;
  gains.adapt_deadzone = cfg.gains.adapt_deadzone;
  gains.validate(n);
  const Eigen::MatrixXd& r_mat = gains.r_weight;

  ParametricState par =
      ParametricState::init(cfg.pi_init_scale * cm.pi_reference, cfg.gains.p0, n);
  ResidualLearner learner(3 * n, n, cfg.gmm);

  RunLogWriter log((fs::path(out_dir) / "run.csv").string(), n);
  std::ofstream contrib(fs::path(out_dir) / "plotdata" / "torque_contributions.csv");
  contrib << "t,tau_meas,tau_param,tau_np,tau_fb\n";
  std::ofstream comp_file(fs::path(out_dir) / "plotdata" / "components.csv");
  comp_file << "t,n_components\n";
  std::ofstream pi_file(fs::path(out_dir) / "plotdata" / "pi_hat.csv");
  pi_file << "t";
  for (int k = 1; k <= p; ++k) pi_file << ",pi_" << k;
  pi_file << "\n";
  std::ofstream err_file(fs::path(out_dir) / "plotdata" / "prediction_error.csv");
  err_file << "t,error_norm\n";

  struct PhaseTrackers {
    NmseTracker q, dq, tau;
    explicit PhaseTrackers(int dof) : q(dof), dq(dof), tau(dof) {}
  };
  std::vector<PhaseTrackers> trackers;
  trackers.reserve(phases.size());
  for (std::size_t k = 0; k < phases.size(); ++k) trackers.emplace_back(n);

  ClosedLoopResult res;
  res.components_at_phase_end.assign(phases.size(), 0);

  PlantState state{traj.eval(0.0).q, Eigen::VectorXd::Zero(n)};
  Eigen::VectorXd prev_ddq = Eigen::VectorXd::Zero(n);
  // Parameter vector the mixture is currently consistent with; re-alignment
  // transforms close the gap to the live estimate.
  Eigen::VectorXd pi_anchor = par.pi_hat;

  // Projection box for the estimate: weakly excited directions otherwise
  // integrate measurement junk without opposition, and inflated inertia or
  // friction entries raise the feedforward's velocity sensitivity until the
  // discrete loop at the small-inertia wrist joints turns unstable. The box
  // is centered on the initial estimate with a per-type floor so near-zero
  // entries still get adaptation room. Radius 0 disables projection.
  Eigen::VectorXd pi_lo, pi_hi;
  if (cfg.gains.projection_radius > 0.0) {
    Eigen::VectorXd half(p);
    for (int k = 0; k < p; ++k) {
      const int off = k % 12;
      double floor_k = 0.25;  // first moments, friction
      if (off == pi_layout::kMass) {
        floor_k = 0.5;
      } else if (off >= pi_layout::kInertia && off < pi_layout::kCoulomb) {
        floor_k = 0.02;
      }
      half[k] = cfg.gains.projection_radius * std::max(std::abs(par.pi_hat[k]), floor_k);
    }
    pi_lo = par.pi_hat - half;
    pi_hi = par.pi_hat + half;
  }
  const double dt_learn = cfg.dt * static_cast<double>(cfg.learn_stride);
  const int plot_j = cfg.plot_joint - 1;
  std::size_t phase_idx = 0;
  long learn_ticks = 0;

  for (long i = 0; i < total_steps; ++i) {
    const double t = static_cast<double>(i) * cfg.dt;
    while (phase_idx + 1 < phases.size() && t >= phases[phase_idx].end) {
      res.components_at_phase_end[phase_idx] = learner.components();
      ++phase_idx;
    }
    const PhaseSpec& ph = phases[phase_idx];

    const TrajectoryPoint des = traj.eval(t);
    const SensorReading sense = sensors.step(state.q, state.dq, prev_ddq, noise_rng);
    const ResolvedRates rr =
        resolved_rates(sense.q_meas, sense.dq_est, des.q, des.dq, des.ddq, gains.lambda);
    const RegressorMatrix y_dir =
        regressor(chain, sense.q_meas, sense.dq_est, rr.dq_r, rr.ddq_r);
    const Eigen::VectorXd tau_model = y_dir.values * par.pi_hat;

    const bool learn_tick = (i % cfg.learn_stride == 0);
    const bool gmm_tick = (i % cfg.gmm_stride == 0);
    const bool log_tick = (i % cfg.log_stride == 0);

    RegressorMatrix w_now;
    if (learn_tick || gmm_tick || log_tick) {
      w_now = regressor_single(chain, JointState{sense.q_meas, sense.dq_est, sense.ddq_est});
    }

    Eigen::VectorXd x_in(3 * n);
    x_in << sense.q_meas, sense.dq_est, sense.ddq_est;
    // The residual feedforward is queried along the desired trajectory (the
    // noise-free reference the controller is steering toward); training pairs
    // below use the measured state.
    Eigen::VectorXd tau_np = Eigen::VectorXd::Zero(n);
    if (ph.np_output && learner.ready()) {
      Eigen::VectorXd x_des(3 * n);
      x_des << des.q, des.dq, des.ddq;
      tau_np = learner.predict(x_des);
    }
    const Eigen::VectorXd tau_fb = -gains.kd.cwiseProduct(rr.s);
    const Eigen::VectorXd tau_cmd = control_law(tau_model, tau_np, gains.kd, rr.s);
    // The simulated torque sensor reads the commanded value: the plant
    // realizes exactly the acceleration this torque implies, so the usual
    // identity "measured torque = inverse dynamics at the realized motion
    // plus unmodeled forces" holds by construction.
    const Eigen::VectorXd& tau_meas = tau_cmd;

    if (learn_tick) {
      par.filter = filter_step(par.filter, tau_meas, w_now, gains.filter_pole, dt_learn);
      const Eigen::VectorXd e = prediction_error(par.filter, par.pi_hat);
      res.prediction_error.emplace_back(t, e.norm());
      if (learn_ticks % 10 == 0) {
        err_file << format_double(t) << "," << format_double(e.norm()) << "\n";
      }
      if (ph.p_learn) {
        // Optional magnitude normalization of the prediction-error weight:
        // the discrete update contracts only while dt |P W'RW| stays below 2,
        // and the filtered regressor's squared norm is the cheap upper proxy
        // for that product, so the weight is scaled down when the regressor
        // runs hot. Zero normalization reproduces the plain law.
        const double r_scale =
            1.0 / (1.0 + cfg.gains.r_normalization * par.filter.w.squaredNorm());
        const Eigen::MatrixXd r_t = r_scale * r_mat;
        GainUpdate gu = bgf_gain_update(par.p_gain, par.filter.w, r_t, gains.lambda0,
                                        gains.k0, dt_learn, par.power_vec);
        par.p_gain = std::move(gu.p);
        CompositeUpdate cu =
            composite_update(par, y_dir, par.filter.w, deadzone(rr.s, gains.adapt_deadzone),
                             e, r_t, dt_learn);
        par = std::move(cu.state);
        if (cfg.gains.projection_radius > 0.0) {
          par.pi_hat = par.pi_hat.cwiseMax(pi_lo).cwiseMin(pi_hi);
        }
      }
      // Mixture re-alignment runs on its own cadence against the accumulated
      // estimate motion since the last alignment; the transform map composes
      // exactly, so batching ticks changes nothing but the work schedule.
      if (ph.transform_on && learner.ready() &&
          learn_ticks % cfg.transform_stride == 0) {
        const ParamDelta delta = ParamDelta::clamped(par.pi_hat - pi_anchor, cfg.delta_clamp);
        if (!delta.is_zero()) {
          ModelTransformResult tr = transform_model(learner.model(), delta, chain);
          res.transform_failures += tr.failed;
          learner.replace(std::move(tr.model));
          pi_anchor += delta.delta;
        }
      }
      if (learn_ticks % 10 == 0) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(par.p_gain,
                                                                Eigen::EigenvaluesOnly);
        res.p_norm_max = std::max(res.p_norm_max, es.eigenvalues().maxCoeff());
        res.p_min_eig = std::min(res.p_min_eig, es.eigenvalues().minCoeff());
      }
      ++learn_ticks;
    }

    if (gmm_tick && ph.np_learn) {
      Eigen::VectorXd sample(4 * n);
      sample << x_in, tau_meas - w_now.values * par.pi_hat;
      learner.ingest(sample);
    }

    if (log_tick) {
      const Eigen::VectorXd tau_param_now = w_now.values * par.pi_hat;
      LogRow row{t,        sense.q_meas, des.q,        sense.dq_est, des.dq,
                 tau_meas, tau_param_now, tau_np,       tau_fb,       learner.components()};
      log.append(row);
      trackers[phase_idx].q.add(sense.q_meas, des.q, des.q);
      trackers[phase_idx].dq.add(sense.dq_est, des.dq, des.dq);
      trackers[phase_idx].tau.add(tau_meas, tau_param_now + tau_np, tau_meas);
      contrib << format_double(t) << "," << format_double(tau_meas[plot_j]) << ","
              << format_double(tau_param_now[plot_j]) << "," << format_double(tau_np[plot_j])
              << "," << format_double(tau_fb[plot_j]) << "\n";
    }
    if (i % 1000 == 0) {
      comp_file << format_double(t) << "," << learner.components() << "\n";
      pi_file << format_double(t);
      for (int k = 0; k < p; ++k) pi_file << "," << format_double(par.pi_hat[k]);
      pi_file << "\n";
    }

    try {
      Plant::StepResult sr = plant.advance(state, tau_cmd);
      state = std::move(sr.state);
      prev_ddq = std::move(sr.ddq);
    } catch (const SimulationDivergence&) {
      res.diverged = true;
      res.end_time = t;
      break;
    }
  }
  if (!res.diverged) res.end_time = duration;
  for (std::size_t k = phase_idx; k < phases.size(); ++k) {
    res.components_at_phase_end[k] = learner.components();
  }
  res.final_components = learner.components();
  res.pi_hat = par.pi_hat;

  const char* metric_names[3] = {"nmse_q", "nmse_dq", "nmse_tau"};
  for (std::size_t k = 0; k < phases.size(); ++k) {
    if (trackers[k].q.count() == 0) continue;
    const NmseTracker* metric_trackers[3] = {&trackers[k].q, &trackers[k].dq,
                                             &trackers[k].tau};
    for (int m = 0; m < 3; ++m) {
      const Eigen::VectorXd v = metric_trackers[m]->value();
      for (int j = 0; j < n; ++j) {
        res.summary.push_back(
            {"phased", metric_names[m], static_cast<int>(k + 1), j + 1, v[j]});
      }
    }
    res.summary.push_back({"components", "end_of_phase", static_cast<int>(k + 1), 0,
                           static_cast<double>(res.components_at_phase_end[k])});
  }
  // Components added once parameter adaptation begins (growth the transform
  // is supposed to prevent): final count minus the count entering the first
  // adapting phase.
  for (std::size_t k = 0; k < phases.size(); ++k) {
    if (phases[k].p_learn) {
      const int before = (k == 0) ? 0 : res.components_at_phase_end[k - 1];
      res.summary.push_back({"components", "added_during_adaptation", 0, 0,
                             static_cast<double>(res.final_components - before)});
      break;
    }
  }
  res.summary.push_back({"diagnostics", "p_norm_max", 0, 0, res.p_norm_max});
  res.summary.push_back({"diagnostics", "p_min_eig", 0, 0, res.p_min_eig});
  res.summary.push_back(
      {"diagnostics", "transform_failures", 0, 0, static_cast<double>(res.transform_failures)});
  res.summary.push_back({"diagnostics", "diverged", 0, 0, res.diverged ? 1.0 : 0.0});
  res.summary.push_back({"diagnostics", "end_time", 0, 0, res.end_time});
  write_summary((fs::path(out_dir) / "summary.csv").string(), res.summary);
  if (learner.ready()) {
    save_mixture(learner.model(), (fs::path(out_dir) / "mixture.ckpt").string());
  }
  return res;
}

/// Loads the chain named by the config and runs the phased study.
inline ClosedLoopResult run_phased_experiment(const RunConfig& cfg, std::uint64_t seed,
                                              const std::string& out_dir,
                                              bool transform_enabled) {
  const ChainModel cm = load_chain_model(cfg.chain_file);
  return run_closed_loop(cfg, cm, seed, out_dir, transform_enabled);
}

/// Per-condition, per-joint normalized errors from the virtual-model study.
struct VirtualResult {
  std::vector<SummaryRow> summary;
  Eigen::VectorXd baseline_before, baseline_after;
  Eigen::VectorXd gmm_before, gmm_after_raw, gmm_after_transformed;
  int components = 0;
  int transform_failures = 0;
};

/**
 * Open-loop study of the non-stationary-residual problem. A reference model
 * generates torque over a bank of excitation trajectories; both learners are
 * trained on the full-dynamics residual (parametric part zeroed) from every
 * `train_stride`-th sample; the parametric estimate then jumps to
 * `pi_switch_scale` of the truth and the combined predictors are compared
 * against the same data, with and without re-aligning the mixture.
 */
inline VirtualResult run_virtual_experiment(const RunConfig& cfg, std::uint64_t seed,
                                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  const ChainModel cm = load_chain_model(cfg.chain_file);
  const KinematicChain& chain = cm.chain;
  const int n = chain.dof();
  fs::create_directories(fs::path(out_dir) / "plotdata");

  Rng traj_rng(mix_seed(seed, 1));
  std::vector<FourierTrajectory> parts;
  parts.reserve(cfg.virt.trajectory_count);
  for (int k = 0; k < cfg.virt.trajectory_count; ++k) {
    parts.push_back(sample_trajectory(n, cfg.trajectory.omega, cfg.trajectory.harmonics,
                                      cfg.trajectory.coeff_scale, cfg.trajectory.offset,
                                      cfg.trajectory.limits, traj_rng));
  }
  const TrajectorySequence traj(std::move(parts), cfg.trajectory.cycles);
  const long samples = std::lround(traj.total_duration() / cfg.dt);

  // Build the dataset: state straight from the trajectory bank, torque from
  // the reference model.
  Eigen::MatrixXd xs(samples, 3 * n);
  Eigen::MatrixXd taus(samples, n);
  for (long i = 0; i < samples; ++i) {
    const TrajectoryPoint pt = traj.eval(static_cast<double>(i) * cfg.dt);
    xs.row(i).segment(0, n) = pt.q.transpose();
    xs.row(i).segment(n, n) = pt.dq.transpose();
    xs.row(i).segment(2 * n, n) = pt.ddq.transpose();
    taus.row(i) =
        inverse_dynamics(chain, cm.pi_reference, JointState{pt.q, pt.dq, pt.ddq}).transpose();
  }

  // Standardize baseline inputs so one kernel bandwidth covers position,
  // velocity, and acceleration scales.
  const Eigen::RowVectorXd x_mean = xs.colwise().mean();
  const Eigen::RowVectorXd x_sd =
      ((xs.rowwise() - x_mean).array().square().colwise().sum() /
       static_cast<double>(samples - 1))
          .sqrt()
          .cwiseMax(1e-9);
  const auto standardized = [&](long i) -> Eigen::VectorXd {
    return ((xs.row(i) - x_mean).array() / x_sd.array()).transpose();
  };

  ResidualLearner learner(3 * n, n, cfg.gmm);
  const RandomFourierFeatures features(3 * n, cfg.baseline.features, cfg.baseline.bandwidth,
                                       mix_seed(seed, 3));
  RrlsModel baseline(cfg.baseline.features, n, cfg.baseline.reg);

  for (long i = 0; i < samples; i += cfg.virt.train_stride) {
    Eigen::VectorXd sample(4 * n);
    sample << xs.row(i).transpose(), taus.row(i).transpose();
    learner.ingest(sample);
    baseline.update(features(standardized(i)), taus.row(i).transpose());
  }
  if (!learner.ready()) {
    throw ContractViolation("run_virtual_experiment: too few samples for warmup");
  }

  // Parameter switch and mixture re-alignment.
  const Eigen::VectorXd pi_after = cfg.virt.pi_switch_scale * cm.pi_reference;
  const ParamDelta delta{pi_after};
  const ModelTransformResult transformed = transform_model(learner.model(), delta, chain);

  NmseTracker t_base_before(n), t_base_after(n), t_gmm_before(n), t_gmm_raw(n), t_gmm_tr(n);
  RunLogWriter log((fs::path(out_dir) / "run.csv").string(), n);
  for (long i = 0; i < samples; ++i) {
    const Eigen::VectorXd x = xs.row(i).transpose();
    const Eigen::VectorXd tau = taus.row(i).transpose();
    const JointState st{x.segment(0, n), x.segment(n, n), x.segment(2 * n, n)};
    const Eigen::VectorXd tau_param = inverse_dynamics(chain, pi_after, st);
    const Eigen::VectorXd rrls_pred = baseline.predict(features(standardized(i)));
    const Eigen::VectorXd gmr_pred = learner.model().predict(x).output;
    const Eigen::VectorXd gmr_tr_pred = transformed.model.predict(x).output;

    t_base_before.add(tau, rrls_pred, tau);
    t_base_after.add(tau, tau_param + rrls_pred, tau);
    t_gmm_before.add(tau, gmr_pred, tau);
    t_gmm_raw.add(tau, tau_param + gmr_pred, tau);
    t_gmm_tr.add(tau, tau_param + gmr_tr_pred, tau);

    if (i % cfg.log_stride == 0) {
      LogRow row{static_cast<double>(i) * cfg.dt,
                 st.q,
                 st.q,
                 st.dq,
                 st.dq,
                 tau,
                 tau_param,
                 gmr_tr_pred,
                 Eigen::VectorXd::Zero(n),
                 static_cast<int>(transformed.model.components().size())};
      log.append(row);
    }
  }

  VirtualResult res;
  res.baseline_before = t_base_before.value();
  res.baseline_after = t_base_after.value();
  res.gmm_before = t_gmm_before.value();
  res.gmm_after_raw = t_gmm_raw.value();
  res.gmm_after_transformed = t_gmm_tr.value();
  res.components = static_cast<int>(transformed.model.components().size());
  res.transform_failures = transformed.failed;

  const std::pair<const char*, const Eigen::VectorXd*> conditions[5] = {
      {"baseline_before", &res.baseline_before},
      {"baseline_after", &res.baseline_after},
      {"gmm_before", &res.gmm_before},
      {"gmm_after_untransformed", &res.gmm_after_raw},
      {"gmm_after_transformed", &res.gmm_after_transformed}};
  std::ofstream bars(fs::path(out_dir) / "plotdata" / "bars.csv");
  bars << "condition,joint,nmse\n";
  for (const auto& [name, vec] : conditions) {
    for (int j = 0; j < n; ++j) {
      res.summary.push_back({"virtual", name, 0, j + 1, (*vec)[j]});
      bars << name << "," << (j + 1) << "," << format_double((*vec)[j]) << "\n";
    }
  }
  res.summary.push_back(
      {"virtual", "components", 0, 0, static_cast<double>(res.components)});
  res.summary.push_back(
      {"virtual", "transform_failures", 0, 0, static_cast<double>(res.transform_failures)});
  write_summary((fs::path(out_dir) / "summary.csv").string(), res.summary);
  save_mixture(transformed.model, (fs::path(out_dir) / "mixture.ckpt").string());
  return res;
}

/// Normalized grid errors of the scalar illustration.
struct SineResult {
  std::vector<SummaryRow> summary;
  double nmse_raw = 0.0;        ///< untransformed mixture vs the scaled target
  double nmse_mean_only = 0.0;  ///< means re-aligned, covariances untouched
  double nmse_full = 0.0;       ///< means and covariances re-aligned
  int components = 0;
};

/**
 * Scalar illustration of the re-alignment: fit a mixture to y = sin(x),
 * scale the underlying function to `scale_after` * sin(x) (a known
 * parameter change in the model y = a sin(x)), and compare the untouched,
 * mean-shifted, and fully transformed mixtures on a dense grid.
 */
inline SineResult run_sine_demo(const RunConfig& cfg, std::uint64_t seed,
                                const std::string& out_dir) {
  namespace fs = std::filesystem;
  const SineSettings& s = cfg.sine;
  fs::create_directories(fs::path(out_dir) / "plotdata");
  if (!(s.x_max > s.x_min) || s.grid < 2 || s.train_points < 2) {
    throw ContractViolation("run_sine_demo: bad grid or range");
  }

  Eigen::MatrixXd sigma_init(2, 2);
  sigma_init << s.sigma_x * s.sigma_x, 0.0, 0.0, s.sigma_y * s.sigma_y;
  MixtureModel model(1, 1, sigma_init, s.nu_create, cfg.gmm.sp_min, cfg.gmm.age_min);

  Rng rng(mix_seed(seed, 4));
  for (int i = 0; i < s.train_points; ++i) {
    const double x = rng.uniform(s.x_min, s.x_max);
    Eigen::VectorXd sample(2);
    sample << x, std::sin(x);
    model.update(sample);
  }
  model.prune();

  // The function y = a sin(x) changes from a = 1 to a = scale_after; the
  // explained change per component, at its mean, is delta * sin(mu_x) with
  // input sensitivity delta * cos(mu_x).
  const double delta = 1.0 - s.scale_after;
  const auto apply = [&](const MixtureModel& m, bool mean_only) {
    std::vector<GaussianComponent> comps;
    comps.reserve(m.components().size());
    for (const auto& c : m.components()) {
      const Eigen::VectorXd shift = Eigen::VectorXd::Constant(1, delta * std::sin(c.mean[0]));
      const Eigen::MatrixXd jac = Eigen::MatrixXd::Constant(1, 1, delta * std::cos(c.mean[0]));
      comps.push_back(transform_component_generic(c, 1, shift, jac, mean_only).component);
    }
    return m.with_components(std::move(comps));
  };
  const MixtureModel mean_only_model = apply(model, true);
  const MixtureModel full_model = apply(model, false);

  const auto grid_x = [&](int i) {
    return s.x_min + (s.x_max - s.x_min) * static_cast<double>(i) /
                         static_cast<double>(s.grid - 1);
  };
  double sq_raw = 0.0, sq_mean = 0.0, sq_full = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::ofstream curve(fs::path(out_dir) / "plotdata" / "curve.csv");
  curve << "x,target,raw,mean_only,full\n";
  for (int i = 0; i < s.grid; ++i) {
    const double x = grid_x(i);
    const Eigen::VectorXd xin = Eigen::VectorXd::Constant(1, x);
    const double target = s.scale_after * std::sin(x);
    const double raw = model.predict(xin).output[0];
    const double mean_only = mean_only_model.predict(xin).output[0];
    const double full = full_model.predict(xin).output[0];
    sq_raw += (raw - target) * (raw - target);
    sq_mean += (mean_only - target) * (mean_only - target);
    sq_full += (full - target) * (full - target);
    lo = std::min(lo, target);
    hi = std::max(hi, target);
    curve << format_double(x) << "," << format_double(target) << "," << format_double(raw)
          << "," << format_double(mean_only) << "," << format_double(full) << "\n";
  }

  SineResult res;
  res.nmse_raw = nmse(sq_raw, s.grid, lo, hi);
  res.nmse_mean_only = nmse(sq_mean, s.grid, lo, hi);
  res.nmse_full = nmse(sq_full, s.grid, lo, hi);
  res.components = static_cast<int>(model.components().size());

  const std::pair<const char*, const MixtureModel*> panels[3] = {
      {"raw", &model}, {"mean_only", &mean_only_model}, {"full", &full_model}};
  for (const auto& [name, m] : panels) {
    std::ofstream f(fs::path(out_dir) / "plotdata" / (std::string("components_") + name + ".csv"));
    f << "prior,mu_x,mu_y,s_xx,s_xy,s_yy\n";
    for (const auto& c : m->components()) {
      f << format_double(c.prior) << "," << format_double(c.mean[0]) << ","
        << format_double(c.mean[1]) << "," << format_double(c.cov(0, 0)) << ","
        << format_double(c.cov(0, 1)) << "," << format_double(c.cov(1, 1)) << "\n";
    }
  }

  res.summary.push_back({"sine", "nmse_raw", 0, 0, res.nmse_raw});
  res.summary.push_back({"sine", "nmse_mean_only", 0, 0, res.nmse_mean_only});
  res.summary.push_back({"sine", "nmse_full", 0, 0, res.nmse_full});
  res.summary.push_back({"sine", "components", 0, 0, static_cast<double>(res.components)});
  write_summary((fs::path(out_dir) / "summary.csv").string(), res.summary);
  save_mixture(full_model, (fs::path(out_dir) / "mixture.ckpt").string());
  return res;
}

}  // namespace semidyn
