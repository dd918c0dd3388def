// Regressor assembly vs the dynamics it linearizes, plus derivative checks.
#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "semidyn/regressor.hpp"

using namespace semidyn;
using oracles::TwoLinkPlanar;

namespace {

struct RandomState {
  Eigen::VectorXd q, dq, ddq;
};

RandomState draw_state(int n, Rng& rng) {
  return RandomState{oracles::random_vector(n, -2.5, 2.5, rng),
                     oracles::random_vector(n, -3.0, 3.0, rng),
                     oracles::random_vector(n, -6.0, 6.0, rng)};
}

}  // namespace

TEST(Regressor, SingleVelocityMatchesInverseDynamics) {
  Rng rng(801);
  for (int dof : {2, 4, 7}) {
    const KinematicChain chain = oracles::random_chain(dof, rng);
    for (int trial = 0; trial < 60; ++trial) {
      const Eigen::VectorXd pi = oracles::random_physical_params(dof, rng);
      const auto st = draw_state(dof, rng);
      const JointState state{st.q, st.dq, st.ddq};
      const Eigen::VectorXd via_matrix = regressor_single(chain, state).values * pi;
      const Eigen::VectorXd direct = inverse_dynamics(chain, pi, state);
      const double tol = 1e-8 * std::max(1.0, direct.norm());
      EXPECT_LT((via_matrix - direct).norm(), tol) << "dof " << dof << " trial " << trial;
    }
  }
}

TEST(Regressor, TwoVelocityMatchesClosedForm) {
  const TwoLinkPlanar ref;
  const KinematicChain chain = ref.chain();
  const Eigen::VectorXd pi = ref.params();
  Rng rng(802);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Vector2d q, dq, dq_r, ddq_r;
    for (int i = 0; i < 2; ++i) {
      q[i] = rng.uniform(-3.0, 3.0);
      dq[i] = rng.uniform(-4.0, 4.0);
      dq_r[i] = rng.uniform(-4.0, 4.0);
      ddq_r[i] = rng.uniform(-8.0, 8.0);
    }
    const Eigen::VectorXd got = regressor(chain, q, dq, dq_r, ddq_r).values * pi;
    const Eigen::Vector2d want = ref.two_velocity_torque(q, dq, dq_r, ddq_r);
    EXPECT_LT((got - Eigen::VectorXd(want)).norm(), 1e-9 * std::max(1.0, want.norm()))
        << "trial " << trial;
  }
}

// The Christoffel Coriolis matrix is symmetric in its velocity arguments:
// C(q, a) b == C(q, b) a. Extracted here from pure velocity products.
TEST(Regressor, CoriolisVelocitySymmetry) {
  Rng rng(803);
  const KinematicChain chain = oracles::random_chain(5, rng);
  const Eigen::VectorXd pi = oracles::random_physical_params(5, rng);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
  auto coriolis = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b) {
    Eigen::VectorXd tau = regressor_torque(chain, pi, q, a, b, zero);
    tau -= regressor_torque(chain, pi, q, zero, zero, zero);  // gravity
    for (int i = 0; i < 5; ++i) {                             // friction in dq_r = b
      tau[i] -= pi[12 * i + pi_layout::kCoulomb] * std::tanh(b[i] / kCoulombSmoothing) +
                pi[12 * i + pi_layout::kViscous] * b[i];
    }
    return tau;
  };
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::VectorXd q = oracles::random_vector(5, -2.5, 2.5, rng);
    const Eigen::VectorXd a = oracles::random_vector(5, -3.0, 3.0, rng);
    const Eigen::VectorXd b = oracles::random_vector(5, -3.0, 3.0, rng);
    const Eigen::VectorXd ab = coriolis(q, a, b);
    const Eigen::VectorXd ba = coriolis(q, b, a);
    EXPECT_LT((ab - ba).norm(), 1e-9 * std::max(1.0, ab.norm())) << "trial " << trial;
  }
}

TEST(Regressor, DirectTorqueMatchesMatrixProduct) {
  Rng rng(804);
  const KinematicChain chain = oracles::random_chain(6, rng);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd pi = oracles::random_physical_params(6, rng);
    const Eigen::VectorXd q = oracles::random_vector(6, -2.5, 2.5, rng);
    const Eigen::VectorXd dq = oracles::random_vector(6, -3.0, 3.0, rng);
    const Eigen::VectorXd dq_r = oracles::random_vector(6, -3.0, 3.0, rng);
    const Eigen::VectorXd ddq_r = oracles::random_vector(6, -6.0, 6.0, rng);
    const Eigen::VectorXd direct = regressor_torque(chain, pi, q, dq, dq_r, ddq_r);
    const Eigen::VectorXd product = regressor(chain, q, dq, dq_r, ddq_r).values * pi;
    EXPECT_LT((direct - product).norm(), 1e-10 * std::max(1.0, direct.norm()));
  }
}

TEST(Regressor, ZeroStateLeavesOnlyGravityColumns) {
  Rng rng(805);
  const KinematicChain chain = oracles::random_chain(4, rng);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  const Eigen::MatrixXd y = regressor(chain, zero, zero, zero, zero).values;
  for (int link = 0; link < 4; ++link) {
    const int base = 12 * link;
    // Mass and first-moment columns carry gravity and must not all vanish.
    EXPECT_GT(y.middleCols(base, 4).cwiseAbs().maxCoeff(), 1e-6);
    // Rotational inertia and friction columns vanish at rest.
    EXPECT_LT(y.middleCols(base + 4, 8).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Regressor, FrictionColumns) {
  Rng rng(806);
  const KinematicChain chain = oracles::random_chain(3, rng);
  const Eigen::VectorXd q = oracles::random_vector(3, -2.0, 2.0, rng);
  const Eigen::VectorXd dq = oracles::random_vector(3, -2.0, 2.0, rng);
  const Eigen::VectorXd dq_r = oracles::random_vector(3, -2.0, 2.0, rng);
  const Eigen::VectorXd ddq_r = oracles::random_vector(3, -2.0, 2.0, rng);
  const Eigen::MatrixXd y = regressor(chain, q, dq, dq_r, ddq_r).values;
  for (int i = 0; i < 3; ++i) {
    for (int r = 0; r < 3; ++r) {
      const double coul = r == i ? std::tanh(dq_r[i] / kCoulombSmoothing) : 0.0;
      const double visc = r == i ? dq_r[i] : 0.0;
      EXPECT_NEAR(y(r, 12 * i + pi_layout::kCoulomb), coul, 1e-14);
      EXPECT_NEAR(y(r, 12 * i + pi_layout::kViscous), visc, 1e-14);
    }
  }
}

TEST(RegressorPartials, MatchesHigherOrderDifferenceOracle) {
  Rng rng(807);
  const KinematicChain chain = oracles::random_chain(4, rng);
  for (int trial = 0; trial < 25; ++trial) {
    // Parameter deltas of mixed sign, like real estimation updates.
    Eigen::VectorXd delta = oracles::random_physical_params(4, rng);
    delta -= oracles::random_physical_params(4, rng);
    const auto st = draw_state(4, rng);
    const JointState state{st.q, st.dq, st.ddq};
    const RegressorPartials got = regressor_param_product_partials(chain, state, delta);

    // Independent oracle: five-point (4th order) stencil with a different
    // step, on the matrix-product evaluation path.
    auto product = [&](const JointState& s) -> Eigen::VectorXd {
      return regressor_single(chain, s).values * delta;
    };
    auto oracle_block = [&](int block) {
      Eigen::MatrixXd d(4, 4);
      for (int k = 0; k < 4; ++k) {
        JointState s = state;
        auto& vec = block == 0 ? s.q : (block == 1 ? s.dq : s.ddq);
        const double x = vec[k];
        const double h = 2e-5 * std::max(1.0, std::abs(x));
        vec[k] = x + h;
        const Eigen::VectorXd p1 = product(s);
        vec[k] = x + 2.0 * h;
        const Eigen::VectorXd p2 = product(s);
        vec[k] = x - h;
        const Eigen::VectorXd m1 = product(s);
        vec[k] = x - 2.0 * h;
        const Eigen::VectorXd m2 = product(s);
        vec[k] = x;
        d.col(k) = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
      }
      return d;
    };
    const Eigen::MatrixXd dq_o = oracle_block(0);
    const Eigen::MatrixXd ddq_o = oracle_block(1);
    const Eigen::MatrixXd dddq_o = oracle_block(2);
    const double scale = std::max({1.0, dq_o.norm(), ddq_o.norm(), dddq_o.norm()});
    EXPECT_LT((got.wrt_q - dq_o).norm() / scale, 1e-6) << "trial " << trial;
    EXPECT_LT((got.wrt_dq - ddq_o).norm() / scale, 1e-6) << "trial " << trial;
    EXPECT_LT((got.wrt_ddq - dddq_o).norm() / scale, 1e-6) << "trial " << trial;
  }
}

// The acceleration block of the partials is exactly the inertia matrix
// assembled from the delta parameters alone.
TEST(RegressorPartials, AccelerationBlockIsDeltaMassMatrix) {
  Rng rng(808);
  const KinematicChain chain = oracles::random_chain(5, rng);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd delta = oracles::random_physical_params(5, rng);
    delta -= oracles::random_physical_params(5, rng);
    const auto st = draw_state(5, rng);
    const JointState state{st.q, st.dq, st.ddq};
    const RegressorPartials got = regressor_param_product_partials(chain, state, delta);
    const Eigen::MatrixXd mass = mass_matrix(chain, delta, state.q);
    EXPECT_LT((got.wrt_ddq - mass).norm() / std::max(1.0, mass.norm()), 1e-6)
        << "trial " << trial;
  }
}
