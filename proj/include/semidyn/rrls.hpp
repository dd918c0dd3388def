/**
 * @file rrls.hpp
 * @brief Recursive regularized least squares over random Fourier features —
 *        the fixed-capacity baseline the mixture model is compared against.
 */
#pragma once

#include "semidyn/common.hpp"

namespace semidyn {

/// Random Fourier feature map phi(x) = sqrt(2/D) cos(W x + b) approximating
/// a Gaussian kernel with the given bandwidth (frequencies ~ N(0, 1/bw^2)).
class RandomFourierFeatures {
 public:
  RandomFourierFeatures(int input_dim, int n_features, double bandwidth, std::uint64_t seed)
      : freq_(n_features, input_dim), phase_(n_features) {
    if (input_dim <= 0 || n_features <= 0 || bandwidth <= 0.0) {
      throw ContractViolation("RandomFourierFeatures: dims and bandwidth must be positive");
    }
    Rng rng(seed);
    for (int i = 0; i < n_features; ++i) {
      for (int j = 0; j < input_dim; ++j) freq_(i, j) = rng.normal() / bandwidth;
      phase_[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
    scale_ = std::sqrt(2.0 / n_features);
  }

  int size() const { return static_cast<int>(phase_.size()); }
  int input_dim() const { return static_cast<int>(freq_.cols()); }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    if (x.size() != freq_.cols()) {
      throw ContractViolation("RandomFourierFeatures: input dimension mismatch");
    }
    return scale_ * ((freq_ * x + phase_).array().cos()).matrix();
  }

 private:
  Eigen::MatrixXd freq_;
  Eigen::VectorXd phase_;
  double scale_;
};

/// Standard exponentially-weighted-free RLS with Tikhonov prior
/// P0 = I / reg; rank-one updates, multi-output weights.
class RrlsModel {
 public:
  RrlsModel(int n_features, int output_dim, double reg)
      : p_(Eigen::MatrixXd::Identity(n_features, n_features) / reg),
        weights_(Eigen::MatrixXd::Zero(n_features, output_dim)) {
    if (n_features <= 0 || output_dim <= 0 || reg <= 0.0) {
      throw ContractViolation("RrlsModel: dims and regularization must be positive");
    }
  }

  void update(const Eigen::VectorXd& phi, const Eigen::VectorXd& y) {
    if (phi.size() != p_.rows() || y.size() != weights_.cols()) {
      throw ContractViolation("RrlsModel::update: dimension mismatch");
    }
    const Eigen::VectorXd pphi = p_ * phi;
    const double denom = 1.0 + phi.dot(pphi);
    const Eigen::VectorXd gain = pphi / denom;
    weights_ += gain * (y - weights_.transpose() * phi).transpose();
    p_ -= gain * pphi.transpose();
    p_ = 0.5 * (p_ + p_.transpose());
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& phi) const {
    if (phi.size() != weights_.rows()) {
      throw ContractViolation("RrlsModel::predict: dimension mismatch");
    }
    return weights_.transpose() * phi;
  }

 private:
  Eigen::MatrixXd p_;
  Eigen::MatrixXd weights_;
};

}  // namespace semidyn
