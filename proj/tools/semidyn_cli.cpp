/**
 * Experiment driver. Subcommands:
 *   virtual-exp  open-loop study: parametric switch with/without mixture re-alignment
 *   phased-exp   closed-loop phased learning study
 *   sine-demo    scalar mixture re-alignment illustration
 *   validate     quick self-checks of the core identities (no files written)
 *
 * Every run is fully determined by --config and --seed.
 */
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "semidyn/experiment.hpp"

namespace {

// Small planar two-link fixture for the self-checks.
semidyn::KinematicChain check_chain() {
  semidyn::RevoluteJoint j1;
  j1.axis = Eigen::Vector3d::UnitZ();
  j1.origin_rotation = Eigen::Matrix3d::Identity();
  j1.origin_translation = Eigen::Vector3d::Zero();
  semidyn::RevoluteJoint j2 = j1;
  j2.origin_translation = Eigen::Vector3d(0.45, 0.0, 0.0);
  return semidyn::KinematicChain({j1, j2}, Eigen::Vector3d(0.0, -9.81, 0.0));
}

Eigen::VectorXd check_params() {
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(24);
  pi << 1.8, 0.36, -0.054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.14, 0.25, 0.4,
        1.1, 0.176, 0.022, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.05, 0.18, 0.22;
  return pi;
}

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_config = true) {
  auto* c = cmd->add_option("--config", args.config, "JSON configuration file");
  if (need_config) c->required();
  cmd->add_option("--seed", args.seed, "random seed (u64)");
  cmd->add_option("--out", args.out, "output directory");
}

semidyn::RunConfig load_config(const std::string& path) {
  const nlohmann::json doc = semidyn::read_json_file(path);
  const std::string chain_file = doc.value("chain", std::string("models/kuka7.json"));
  const semidyn::ChainModel cm = semidyn::load_chain_model(chain_file);
  return semidyn::run_config_from_json(doc, cm.chain.dof());
}

int run_validate() {
  using namespace semidyn;
  int failures = 0;
  const auto report = [&](const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
    if (!ok) ++failures;
  };

  // Torque factorization matches the reference recursion on random states.
  {
    bool ok = true;
    try {
      const KinematicChain chain = check_chain();
      const Eigen::VectorXd pi = check_params();
      Rng rng(12345);
      for (int i = 0; i < 50 && ok; ++i) {
        Eigen::VectorXd q(2), dq(2), ddq(2);
        for (int j = 0; j < 2; ++j) {
          q[j] = rng.uniform(-2.0, 2.0);
          dq[j] = rng.uniform(-2.0, 2.0);
          ddq[j] = rng.uniform(-4.0, 4.0);
        }
        const JointState st{q, dq, ddq};
        const Eigen::VectorXd direct = inverse_dynamics(chain, pi, st);
        const Eigen::VectorXd via_matrix = regressor_single(chain, st).values * pi;
        ok = (direct - via_matrix).norm() <= 1e-8 * std::max(1.0, direct.norm());
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "  error: %s\n", e.what());
      ok = false;
    }
    report("torque factorization matches reference recursion", ok);
  }

  // Mixture re-alignment is exact for a pure parameter change.
  {
    bool ok = true;
    try {
      const KinematicChain chain = check_chain();
      const Eigen::VectorXd pi = check_params();
      Rng rng(777);
      Eigen::VectorXd mean(8);
      for (int k = 0; k < 6; ++k) mean[k] = rng.uniform(-1.0, 1.0);
      const JointState st{mean.segment(0, 2), mean.segment(2, 2), mean.segment(4, 2)};
      mean.tail(2) = inverse_dynamics(chain, pi, st);
      GaussianComponent comp;
      comp.mean = mean;
      comp.cov = 0.05 * Eigen::MatrixXd::Identity(8, 8);
      comp.prior = 1.0;
      comp.sp = 2.0;
      comp.age = 10;
      const Eigen::VectorXd delta_vec = 0.4 * pi;
      const ComponentTransformResult tr =
          transform_component(comp, ParamDelta{delta_vec}, chain);
      const Eigen::VectorXd expected =
          mean.tail(2) - inverse_dynamics(chain, delta_vec, st);
      ok = tr.transformed && (tr.component.mean.tail(2) - expected).norm() <= 1e-9;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "  error: %s\n", e.what());
      ok = false;
    }
    report("mixture re-alignment shifts the torque block exactly", ok);
  }

  // Zero parameter change leaves the mixture bit-identical.
  {
    bool ok = true;
    try {
      const KinematicChain chain = check_chain();
      GaussianComponent comp;
      comp.mean = Eigen::VectorXd::LinSpaced(8, -1.0, 1.0);
      comp.cov = Eigen::MatrixXd::Identity(8, 8);
      comp.prior = 1.0;
      comp.sp = 1.0;
      comp.age = 1;
      const ComponentTransformResult tr =
          transform_component(comp, ParamDelta{Eigen::VectorXd::Zero(24)}, chain);
      ok = tr.transformed && tr.component.mean == comp.mean && tr.component.cov == comp.cov;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "  error: %s\n", e.what());
      ok = false;
    }
    report("zero parameter change is a bit-exact no-op", ok);
  }

  std::printf("%s\n", failures == 0 ? "all checks passed" : "CHECKS FAILED");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semidyn: simultaneous parametric/nonparametric dynamics learning"};
  app.require_subcommand(1);

  CommonArgs virt_args, phased_args, sine_args;
  std::string phased_transform = "on";

  auto* virt = app.add_subcommand("virtual-exp", "open-loop parameter-switch study");
  add_common(virt, virt_args);

  auto* phased = app.add_subcommand("phased-exp", "closed-loop phased learning study");
  add_common(phased, phased_args);
  phased->add_option("--transform", phased_transform, "mixture re-alignment: on|off")
      ->check(CLI::IsMember({"on", "off"}));

  auto* sine = app.add_subcommand("sine-demo", "scalar re-alignment illustration");
  add_common(sine, sine_args);

  app.add_subcommand("validate", "run quick built-in identity checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (virt->parsed()) {
      const semidyn::RunConfig cfg = load_config(virt_args.config);
      const semidyn::VirtualResult res =
          semidyn::run_virtual_experiment(cfg, virt_args.seed, virt_args.out);
      std::printf("virtual-exp done: %d components, outputs in %s\n", res.components,
                  virt_args.out.c_str());
    } else if (phased->parsed()) {
      const semidyn::RunConfig cfg = load_config(phased_args.config);
      const semidyn::ClosedLoopResult res = semidyn::run_phased_experiment(
          cfg, phased_args.seed, phased_args.out, phased_transform == "on");
      std::printf("phased-exp done (%s): %d components, %s, outputs in %s\n",
                  phased_transform == "on" ? "transform on" : "transform off",
                  res.final_components, res.diverged ? "DIVERGED" : "completed",
                  phased_args.out.c_str());
      if (res.diverged) return 2;
    } else if (sine->parsed()) {
      const semidyn::RunConfig cfg = load_config(sine_args.config);
      const semidyn::SineResult res =
          semidyn::run_sine_demo(cfg, sine_args.seed, sine_args.out);
      std::printf("sine-demo done: nmse raw %.3g, mean-only %.3g, full %.3g\n",
                  res.nmse_raw, res.nmse_mean_only, res.nmse_full);
    } else {
      return run_validate();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
