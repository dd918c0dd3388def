/**
 * @file metrics.hpp
 * @brief Range-normalized mean squared error, accumulated per joint over
 *        concatenated sample streams.
 */
#pragma once

#include <limits>

#include "semidyn/common.hpp"

namespace semidyn {

/// Per-joint normalized MSE: (sum of squared errors / N) / (max - min).
inline double nmse(double sum_sq, long count, double lo, double hi) {
  if (count <= 0) {
    throw ContractViolation("nmse: needs at least one sample");
  }
  if (!(hi > lo)) {
    throw DegenerateNormalizer("nmse: normalizer range is empty");
  }
  return (sum_sq / static_cast<double>(count)) / (hi - lo);
}

/**
 * Accumulates squared error between two joint-space series and the value
 * range of a (possibly different) normalizing series. Position and velocity
 * metrics normalize by the desired-trajectory range; the torque metric
 * normalizes by the measured-torque range, so the range source is passed
 * separately on every sample.
 */
class NmseTracker {
 public:
  explicit NmseTracker(int dof)
      : sum_sq_(Eigen::VectorXd::Zero(dof)),
        lo_(Eigen::VectorXd::Constant(dof, std::numeric_limits<double>::infinity())),
        hi_(Eigen::VectorXd::Constant(dof, -std::numeric_limits<double>::infinity())) {
    if (dof <= 0) {
      throw ContractViolation("NmseTracker: dof must be positive");
    }
  }

  void add(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted,
           const Eigen::VectorXd& range_sample) {
    if (actual.size() != sum_sq_.size() || predicted.size() != sum_sq_.size() ||
        range_sample.size() != sum_sq_.size()) {
      throw ContractViolation("NmseTracker::add: dimension mismatch");
    }
    sum_sq_ += (actual - predicted).array().square().matrix();
    lo_ = lo_.cwiseMin(range_sample);
    hi_ = hi_.cwiseMax(range_sample);
    ++count_;
  }

  long count() const { return count_; }
  const Eigen::VectorXd& range_low() const { return lo_; }
  const Eigen::VectorXd& range_high() const { return hi_; }

  /// Per-joint nMSE over everything accumulated so far.
  Eigen::VectorXd value() const {
    Eigen::VectorXd out(sum_sq_.size());
    for (int j = 0; j < sum_sq_.size(); ++j) {
      out[j] = nmse(sum_sq_[j], count_, lo_[j], hi_[j]);
    }
    return out;
  }

 private:
  Eigen::VectorXd sum_sq_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
  long count_ = 0;
};

}  // namespace semidyn
