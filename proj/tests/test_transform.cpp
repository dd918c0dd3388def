#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "semidyn/regressor.hpp"
#include "semidyn/transform.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Random symmetric positive-definite matrix with eigenvalues >= jitter.
MatrixXd random_spd(int n, double jitter, semidyn::Rng& rng) {
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  MatrixXd s = a * a.transpose() + jitter * MatrixXd::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

semidyn::GaussianComponent make_component(const VectorXd& mean, double jitter,
                                          semidyn::Rng& rng) {
  semidyn::GaussianComponent c;
  c.prior = 1.0;
  c.mean = mean;
  c.cov = random_spd(static_cast<int>(mean.size()), jitter, rng);
  c.sp = 3.5;
  c.age = 7;
  return c;
}

/// Joint-space mean (q, dq, ddq, tau) for the planar two-link fixture.
VectorXd two_link_mean() {
  VectorXd mean(8);
  mean << 0.4, -0.3, 0.5, 0.8, -0.6, 0.25, 1.0, -2.0;
  return mean;
}

TEST(ParamDelta, ClampsAndValidates) {
  VectorXd raw(3);
  raw << 0.5, -2.0, 1.5;
  const semidyn::ParamDelta d = semidyn::ParamDelta::clamped(raw, 1.0);
  EXPECT_DOUBLE_EQ(d.delta[0], 0.5);
  EXPECT_DOUBLE_EQ(d.delta[1], -1.0);
  EXPECT_DOUBLE_EQ(d.delta[2], 1.0);
  EXPECT_FALSE(d.is_zero());
  EXPECT_TRUE(semidyn::ParamDelta::clamped(VectorXd::Zero(4), 1.0).is_zero());

  VectorXd bad = raw;
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(semidyn::ParamDelta::clamped(bad, 1.0), semidyn::ContractViolation);
  EXPECT_THROW(semidyn::ParamDelta::clamped(raw, 0.0), semidyn::ContractViolation);
}

TEST(ResidualTarget, SubtractsAndValidates) {
  VectorXd meas(2), param(2);
  meas << 3.0, -1.0;
  param << 1.0, 1.0;
  const VectorXd r = semidyn::residual_target(meas, param);
  EXPECT_DOUBLE_EQ(r[0], 2.0);
  EXPECT_DOUBLE_EQ(r[1], -2.0);
  EXPECT_THROW(semidyn::residual_target(meas, VectorXd::Zero(3)),
               semidyn::ContractViolation);
}

TEST(ComponentTransform, ZeroDeltaIsBitIdentical) {
  const semidyn::KinematicChain chain = oracles::TwoLinkPlanar{}.chain();
  semidyn::Rng rng(11);
  const semidyn::GaussianComponent c = make_component(two_link_mean(), 0.5, rng);
  const semidyn::ParamDelta zero{VectorXd::Zero(chain.param_dim())};

  const auto res = semidyn::transform_component(c, zero, chain);
  EXPECT_TRUE(res.transformed);
  EXPECT_DOUBLE_EQ(res.floor_perturbation, 0.0);
  EXPECT_TRUE((res.component.mean.array() == c.mean.array()).all());
  EXPECT_TRUE((res.component.cov.array() == c.cov.array()).all());
}

TEST(ComponentTransform, MeanShiftMatchesRegressorProduct) {
  const oracles::TwoLinkPlanar fixture;
  const semidyn::KinematicChain chain = fixture.chain();
  semidyn::Rng rng(12);
  const semidyn::GaussianComponent c = make_component(two_link_mean(), 0.5, rng);

  const semidyn::ParamDelta delta{0.4 * fixture.params()};
  const auto res = semidyn::transform_component(c, delta, chain);
  ASSERT_TRUE(res.transformed);

  // The output-block shift must equal the torque the parameter increment
  // explains at the component mean, i.e. the regressor-matrix product.
  const semidyn::JointState state{c.mean.segment(0, 2), c.mean.segment(2, 2),
                                  c.mean.segment(4, 2)};
  const VectorXd predicted = semidyn::regressor_single(chain, state).values * delta.delta;
  EXPECT_LT((res.component.mean.tail(2) - (c.mean.tail(2) - predicted)).cwiseAbs().maxCoeff(),
            1e-9);
  // Input blocks are not touched at all.
  EXPECT_TRUE((res.component.mean.head(6).array() == c.mean.head(6).array()).all());
  EXPECT_DOUBLE_EQ(res.component.prior, c.prior);
  EXPECT_DOUBLE_EQ(res.component.sp, c.sp);
  EXPECT_EQ(res.component.age, c.age);
}

TEST(ComponentTransform, CovarianceMatchesDenseCongruence) {
  const oracles::TwoLinkPlanar fixture;
  const semidyn::KinematicChain chain = fixture.chain();
  semidyn::Rng rng(13);
  const semidyn::GaussianComponent c = make_component(two_link_mean(), 5.0, rng);

  const semidyn::ParamDelta delta{0.5 * fixture.params()};
  const auto res = semidyn::transform_component(c, delta, chain);
  ASSERT_TRUE(res.transformed);
  // Well-conditioned covariance: only rounding-level symmetrization, no repair.
  EXPECT_LT(res.floor_perturbation, 1e-12);

  // Reference: assemble the full unit-determinant congruence map densely and
  // push the covariance through it with plain matrix products.
  const semidyn::JointState state{c.mean.segment(0, 2), c.mean.segment(2, 2),
                                  c.mean.segment(4, 2)};
  const semidyn::RegressorPartials part =
      semidyn::regressor_param_product_partials(chain, state, delta.delta);
  MatrixXd jac(2, 6);
  jac << part.wrt_q, part.wrt_dq, part.wrt_ddq;
  MatrixXd l = MatrixXd::Identity(8, 8);
  l.block(6, 0, 2, 6) = -jac;
  const MatrixXd dense = l * c.cov * l.transpose();

  EXPECT_LT((res.component.cov - dense).cwiseAbs().maxCoeff(),
            1e-9 * (1.0 + dense.cwiseAbs().maxCoeff()));
  // The map has unit determinant, so the covariance volume is preserved.
  EXPECT_NEAR(res.component.cov.determinant(), c.cov.determinant(),
              1e-6 * std::abs(c.cov.determinant()));
}

TEST(ComponentTransform, CompositionMatchesCombinedDelta) {
  const oracles::TwoLinkPlanar fixture;
  const semidyn::KinematicChain chain = fixture.chain();
  semidyn::Rng rng(14);
  const semidyn::GaussianComponent c = make_component(two_link_mean(), 5.0, rng);

  VectorXd d1(chain.param_dim()), d2(chain.param_dim());
  for (int i = 0; i < d1.size(); ++i) {
    d1[i] = 0.3 * rng.normal();
    d2[i] = 0.3 * rng.normal();
  }
  const auto once = semidyn::transform_component(c, semidyn::ParamDelta{d1 + d2}, chain);
  const auto first = semidyn::transform_component(c, semidyn::ParamDelta{d1}, chain);
  const auto second =
      semidyn::transform_component(first.component, semidyn::ParamDelta{d2}, chain);
  ASSERT_TRUE(once.transformed && first.transformed && second.transformed);

  // Successive corrections must compose to the combined correction: the shift
  // is linear in the parameter increment and the input blocks of the mean are
  // left untouched, so both paths evaluate the model at the same state.
  EXPECT_LT((second.component.mean - once.component.mean).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((second.component.cov - once.component.cov).cwiseAbs().maxCoeff(),
            1e-8 * (1.0 + once.component.cov.cwiseAbs().maxCoeff()));
}

TEST(ComponentTransform, MeanOnlyVariantLeavesCovariance) {
  semidyn::Rng rng(15);
  const semidyn::GaussianComponent c = make_component(two_link_mean(), 0.5, rng);
  VectorXd shift(2);
  shift << 0.7, -0.2;
  const MatrixXd jac = MatrixXd::Constant(2, 6, 0.3);

  const auto res = semidyn::transform_component_generic(c, 6, shift, jac, /*mean_only=*/true);
  EXPECT_TRUE(res.transformed);
  EXPECT_TRUE((res.component.cov.array() == c.cov.array()).all());
  EXPECT_DOUBLE_EQ(res.component.mean[6], c.mean[6] - 0.7);
  EXPECT_DOUBLE_EQ(res.component.mean[7], c.mean[7] + 0.2);
}

TEST(ComponentTransform, ScalarSlopeIsShiftedBySensitivity) {
  // One-dimensional regression picture: a component whose conditional mean has
  // slope cov_xy / cov_xx. Removing a model term with local slope j must leave
  // the residual slope (old - j), and the covariance volume must not change.
  semidyn::GaussianComponent c;
  c.prior = 1.0;
  c.sp = 1.0;
  c.age = 0;
  c.mean = (VectorXd(2) << 1.2, 0.9).finished();
  c.cov = (MatrixXd(2, 2) << 0.5, 0.3, 0.3, 0.4).finished();

  const VectorXd shift = VectorXd::Constant(1, 0.25);
  const MatrixXd jac = MatrixXd::Constant(1, 1, 0.8);
  const auto res = semidyn::transform_component_generic(c, 1, shift, jac);
  ASSERT_TRUE(res.transformed);

  EXPECT_NEAR(res.component.mean[0], 1.2, 1e-15);
  EXPECT_NEAR(res.component.mean[1], 0.65, 1e-15);
  EXPECT_NEAR(res.component.cov(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(res.component.cov(0, 1), 0.3 - 0.5 * 0.8, 1e-15);
  EXPECT_NEAR(res.component.cov(1, 1), 0.4 - 2.0 * 0.3 * 0.8 + 0.5 * 0.64, 1e-15);

  const double old_slope = 0.3 / 0.5;
  const double new_slope = res.component.cov(0, 1) / res.component.cov(0, 0);
  EXPECT_NEAR(new_slope, old_slope - 0.8, 1e-14);
  EXPECT_NEAR(res.component.cov.determinant(), c.cov.determinant(), 1e-14);
}

TEST(ComponentTransform, FailureLeavesComponentUntouched) {
  const oracles::TwoLinkPlanar fixture;
  const semidyn::KinematicChain chain = fixture.chain();
  semidyn::Rng rng(16);
  VectorXd mean = two_link_mean();
  mean[0] = std::numeric_limits<double>::quiet_NaN();
  const semidyn::GaussianComponent c = make_component(mean, 0.5, rng);

  const semidyn::ParamDelta delta{0.4 * fixture.params()};
  const auto res = semidyn::transform_component(c, delta, chain);
  EXPECT_FALSE(res.transformed);
  EXPECT_TRUE(std::isnan(res.component.mean[0]));
  EXPECT_TRUE((res.component.mean.tail(7).array() == c.mean.tail(7).array()).all());
  EXPECT_TRUE((res.component.cov.array() == c.cov.array()).all());
}

TEST(ComponentTransform, RejectsWrongDimensions) {
  const semidyn::KinematicChain chain = oracles::TwoLinkPlanar{}.chain();
  semidyn::Rng rng(17);
  const semidyn::GaussianComponent c = make_component(VectorXd::Zero(5), 0.5, rng);
  const semidyn::ParamDelta delta{VectorXd::Zero(chain.param_dim())};
  EXPECT_THROW(semidyn::transform_component(c, delta, chain), semidyn::ContractViolation);

  const semidyn::GaussianComponent ok = make_component(two_link_mean(), 0.5, rng);
  EXPECT_THROW(
      semidyn::transform_component_generic(ok, 6, VectorXd::Zero(3), MatrixXd::Zero(2, 6)),
      semidyn::ContractViolation);
}

TEST(ModelTransform, PreservesBookkeeping) {
  const oracles::TwoLinkPlanar fixture;
  const semidyn::KinematicChain chain = fixture.chain();
  semidyn::Rng rng(18);

  std::vector<semidyn::GaussianComponent> comps;
  const double priors[3] = {0.5, 0.3, 0.2};
  for (int k = 0; k < 3; ++k) {
    VectorXd mean = two_link_mean();
    mean.head(6) += 0.2 * k * VectorXd::Ones(6);
    semidyn::GaussianComponent c = make_component(mean, 1.0, rng);
    c.prior = priors[k];
    c.sp = 1.0 + k;
    c.age = 10 * k;
    comps.push_back(c);
  }
  const semidyn::MixtureModel base(6, 2, MatrixXd::Identity(8, 8), 0.01, 0.1, 100);
  const semidyn::MixtureModel model = base.with_components(comps);

  const semidyn::ParamDelta delta{0.4 * fixture.params()};
  const auto res = semidyn::transform_model(model, delta, chain);
  EXPECT_EQ(res.failed, 0);
  ASSERT_EQ(res.model.components().size(), model.components().size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const auto& before = model.components()[k];
    const auto& after = res.model.components()[k];
    EXPECT_DOUBLE_EQ(after.prior, before.prior);
    EXPECT_DOUBLE_EQ(after.sp, before.sp);
    EXPECT_EQ(after.age, before.age);
    EXPECT_TRUE((after.mean.head(6).array() == before.mean.head(6).array()).all());
    EXPECT_GT((after.mean.tail(2) - before.mean.tail(2)).norm(), 1e-6);
  }

  // A zero increment must return the model unchanged without touching it.
  const semidyn::ParamDelta zero{VectorXd::Zero(chain.param_dim())};
  const auto same = semidyn::transform_model(model, zero, chain);
  EXPECT_EQ(same.failed, 0);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    EXPECT_TRUE((same.model.components()[k].mean.array() ==
                 model.components()[k].mean.array())
                    .all());
    EXPECT_TRUE((same.model.components()[k].cov.array() ==
                 model.components()[k].cov.array())
                    .all());
  }
}

TEST(ModelTransform, CountsFailedComponents) {
  const oracles::TwoLinkPlanar fixture;
  const semidyn::KinematicChain chain = fixture.chain();
  semidyn::Rng rng(19);

  std::vector<semidyn::GaussianComponent> comps;
  comps.push_back(make_component(two_link_mean(), 1.0, rng));
  VectorXd broken = two_link_mean();
  broken[2] = std::numeric_limits<double>::infinity();
  comps.push_back(make_component(broken, 1.0, rng));
  for (auto& c : comps) c.prior = 0.5;

  const semidyn::MixtureModel base(6, 2, MatrixXd::Identity(8, 8), 0.01, 0.1, 100);
  const semidyn::MixtureModel model = base.with_components(comps);

  const semidyn::ParamDelta delta{0.4 * fixture.params()};
  const auto res = semidyn::transform_model(model, delta, chain);
  EXPECT_EQ(res.failed, 1);
  ASSERT_EQ(res.model.components().size(), 2u);
  EXPECT_GT((res.model.components()[0].mean.tail(2) -
             model.components()[0].mean.tail(2))
                .norm(),
            1e-6);
  EXPECT_TRUE(std::isinf(res.model.components()[1].mean[2]));
}

}  // namespace
