/**
 * @file gmm.hpp
 * @brief Incremental Gaussian mixture over joint input-output space with
 *        conditional (regression) prediction.
 *
 * The mixture grows online: a sample that no existing component explains
 * above the novelty threshold spawns a new component at the sample with the
 * configured initial covariance; otherwise every component takes a
 * posterior-weighted incremental EM step. Components that stay inert for
 * long enough are pruned. Prediction conditions the mixture on the input
 * block and returns the responsibility-weighted conditional mean of the
 * output block.
 *
 * All density evaluations run in log space through cached Cholesky factors;
 * factors are refreshed eagerly whenever a component mutates, so prediction
 * is const and pure.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "semidyn/common.hpp"

namespace semidyn {

/// One mixture component over the stacked (input, output) space.
struct GaussianComponent {
  double prior = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double sp = 0.0;  // accumulated posterior mass
  long age = 0;     // update events witnessed since creation
};

/// Conditional-prediction result: the blended output-block estimate plus the
/// per-component responsibilities (in storage order). Components whose input
/// marginal could not be factorized are skipped and counted.
struct GmrResult {
  Eigen::VectorXd output;
  Eigen::VectorXd responsibilities;
  int skipped = 0;
};

/// Eigenvalue floor applied to every component covariance.
inline constexpr double kCovarianceEigenFloor = 1e-9;

/// Posterior weights below this are numerically inert and skip the moment
/// update (the induced mean shift is below double rounding).
inline constexpr double kNegligibleResponsibility = 1e-12;

/// Symmetrize and clamp a covariance to the PSD cone with a floored minimum
/// eigenvalue. Returns the Frobenius norm of the applied perturbation
/// (zero when the matrix already satisfies the floor).
inline double floor_covariance(Eigen::MatrixXd& cov, double floor = kCovarianceEigenFloor) {
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  const double asym = (cov - sym).norm();
  Eigen::LLT<Eigen::MatrixXd> probe(
      sym - floor * Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
  if (probe.info() == Eigen::Success) {
    cov = std::move(sym);
    return asym;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::MatrixXd repaired = eig.eigenvectors() *
                             eig.eigenvalues().cwiseMax(floor).asDiagonal() *
                             eig.eigenvectors().transpose();
  repaired = 0.5 * (repaired + repaired.transpose());
  const double perturbation = (repaired - cov).norm();
  cov = std::move(repaired);
  return perturbation;
}

class MixtureModel {
 public:
  /**
   * @param input_dim   dimension of the conditioning block (first entries)
   * @param output_dim  dimension of the predicted block (last entries)
   * @param sigma_init  covariance for newly created components
   * @param nu_create   novelty threshold: a sample whose density is below
   *                    nu_create times every component's peak density
   *                    spawns a new component
   * @param sp_min      prune when accumulated posterior mass stays below this
   * @param age_min     ... after at least this many update events
   */
  MixtureModel(int input_dim, int output_dim, Eigen::MatrixXd sigma_init, double nu_create,
               double sp_min, long age_min)
      : in_dim_(input_dim),
        out_dim_(output_dim),
        nu_create_(nu_create),
        sp_min_(sp_min),
        age_min_(age_min) {
    if (input_dim <= 0 || output_dim <= 0) {
      throw ContractViolation("MixtureModel: dimensions must be positive");
    }
    if (nu_create <= 0.0 || nu_create >= 1.0) {
      throw ContractViolation("MixtureModel: nu_create must lie in (0, 1)");
    }
    if (sp_min < 0.0 || age_min < 0) {
      throw ContractViolation("MixtureModel: prune thresholds must be non-negative");
    }
    set_sigma_init(std::move(sigma_init));
  }

  int dim() const { return in_dim_ + out_dim_; }
  int input_dim() const { return in_dim_; }
  int output_dim() const { return out_dim_; }
  double nu_create() const { return nu_create_; }
  double sp_min() const { return sp_min_; }
  long age_min() const { return age_min_; }
  const Eigen::MatrixXd& sigma_init() const { return sigma_init_; }
  const std::vector<GaussianComponent>& components() const { return components_; }
  int size() const { return static_cast<int>(components_.size()); }

  /// Replace the creation covariance (e.g. once a warm-up window has been
  /// collected). Existing components are untouched.
  void set_sigma_init(Eigen::MatrixXd sigma) {
    if (sigma.rows() != dim() || sigma.cols() != dim()) {
      throw ContractViolation("MixtureModel: sigma_init must be dim x dim");
    }
    if (!sigma.allFinite()) {
      throw ContractViolation("MixtureModel: sigma_init must be finite");
    }
    floor_covariance(sigma);
    sigma_init_ = std::move(sigma);
  }

  /// Same mixture configuration, different component set. Covariances are
  /// floored on ingestion; factor caches are rebuilt.
  MixtureModel with_components(std::vector<GaussianComponent> comps) const {
    MixtureModel out(*this);
    out.components_ = std::move(comps);
    out.caches_.assign(out.components_.size(), FactorCache{});
    for (size_t j = 0; j < out.components_.size(); ++j) {
      auto& c = out.components_[j];
      if (c.mean.size() != dim() || c.cov.rows() != dim() || c.cov.cols() != dim()) {
        throw ContractViolation("MixtureModel: component dimension mismatch");
      }
      floor_covariance(c.cov);
      out.refresh_cache(j);
    }
    out.normalize_priors();
    return out;
  }

  /**
   * @brief One online update with a joint (input, output) sample.
   *
   * Ages every component, then either creates a new component (novelty) or
   * applies the posterior-weighted incremental EM step to all components.
   */
  void update(const Eigen::VectorXd& x) {
    if (x.size() != dim()) {
      throw ContractViolation("MixtureModel::update: sample dimension mismatch");
    }
    if (!x.allFinite()) {
      throw ContractViolation("MixtureModel::update: sample must be finite");
    }
    for (auto& c : components_) ++c.age;

    if (components_.empty()) {
      create(x);
      return;
    }

    // Novelty: the sample lies outside every component's nu_create density
    // shell, i.e. min Mahalanobis^2 > -2 ln(nu_create).
    const double mahal_limit = -2.0 * std::log(nu_create_);
    std::vector<double> log_like(components_.size());
    double best_mahal = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < components_.size(); ++j) {
      const double m2 = mahalanobis2_full(j, x);
      best_mahal = std::min(best_mahal, m2);
      log_like[j] = -0.5 * (m2 + caches_[j].logdet_full + dim() * kLog2Pi);
    }
    if (best_mahal > mahal_limit) {
      create(x);
      return;
    }

    // Posterior over components, computed in log space.
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(components_.size());
    for (size_t j = 0; j < components_.size(); ++j) {
      terms[j] = std::log(components_[j].prior) + log_like[j];
      max_term = std::max(max_term, terms[j]);
    }
    double total = 0.0;
    for (double& t : terms) {
      t = std::exp(t - max_term);
      total += t;
    }

    for (size_t j = 0; j < components_.size(); ++j) {
      const double post = terms[j] / total;
      auto& c = components_[j];
      c.sp += post;
      if (post < kNegligibleResponsibility) continue;  // numerically inert
      // Exact recursion for the posterior-weighted scatter: with
      // omega = post / sp_new,
      //   Sigma' = (1-omega) (Sigma + dmean dmean') + omega (x-mean')(x-mean')'
      // matches the batch posterior-weighted ML covariance at every step
      // and keeps Sigma in the PSD cone (convex combination of PSD terms).
      const double omega = post / c.sp;
      const Eigen::VectorXd dmean = omega * (x - c.mean);
      c.mean += dmean;
      const Eigen::VectorXd centered = x - c.mean;
      c.cov = (1.0 - omega) * (c.cov + dmean * dmean.transpose()) +
              omega * centered * centered.transpose();
      floor_covariance(c.cov);
      refresh_cache(j);
    }
    normalize_priors();
  }

  /// Remove components whose posterior mass stayed below sp_min for at
  /// least age_min update events. Returns the number removed.
  int prune() {
    const size_t before = components_.size();
    size_t keep = 0;
    for (size_t j = 0; j < components_.size(); ++j) {
      const bool drop = components_[j].age >= age_min_ && components_[j].sp < sp_min_;
      if (!drop) {
        if (keep != j) {
          components_[keep] = std::move(components_[j]);
          caches_[keep] = std::move(caches_[j]);
        }
        ++keep;
      }
    }
    components_.resize(keep);
    caches_.resize(keep);
    if (keep != before) normalize_priors();
    return static_cast<int>(before - keep);
  }

  /**
   * @brief Conditional prediction of the output block given an input.
   *
   * Empty model: returns a zero output and empty responsibilities, so
   * downstream torque blending treats "no model yet" as "no correction".
   * Components are accumulated in descending responsibility order, which
   * makes the result invariant under component reordering.
   */
  GmrResult predict(const Eigen::VectorXd& x_in) const {
    if (x_in.size() != in_dim_) {
      throw ContractViolation("MixtureModel::predict: input dimension mismatch");
    }
    GmrResult out;
    out.output = Eigen::VectorXd::Zero(out_dim_);
    out.responsibilities = Eigen::VectorXd::Zero(size());
    if (components_.empty()) return out;

    struct Entry {
      double log_post;
      int index;
    };
    std::vector<Entry> entries;
    entries.reserve(components_.size());
    for (size_t j = 0; j < components_.size(); ++j) {
      if (!caches_[j].input_ok) {
        ++out.skipped;
        continue;
      }
      const auto& c = components_[j];
      const auto& cache = caches_[j];
      const Eigen::VectorXd centered = x_in - c.mean.head(in_dim_);
      const double m2 = cache.llt_input.matrixL().solve(centered).squaredNorm();
      entries.push_back(Entry{std::log(c.prior) -
                                  0.5 * (m2 + cache.logdet_input + in_dim_ * kLog2Pi),
                              static_cast<int>(j)});
    }
    if (entries.empty()) return out;

    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.log_post > b.log_post || (a.log_post == b.log_post && a.index < b.index);
    });
    double denom = 0.0;
    const double top = entries.front().log_post;
    for (auto& e : entries) denom += std::exp(e.log_post - top);

    for (const auto& e : entries) {
      const double resp = std::exp(e.log_post - top) / denom;
      out.responsibilities[e.index] = resp;
      const auto& c = components_[static_cast<size_t>(e.index)];
      const auto& cache = caches_[static_cast<size_t>(e.index)];
      const Eigen::VectorXd centered = x_in - c.mean.head(in_dim_);
      const Eigen::VectorXd cond =
          c.mean.tail(out_dim_) +
          c.cov.bottomLeftCorner(out_dim_, in_dim_) * cache.llt_input.solve(centered);
      out.output += resp * cond;
    }
    return out;
  }

  /// Joint-space log density of a sample under the mixture (diagnostics).
  double log_likelihood(const Eigen::VectorXd& x) const {
    if (x.size() != dim() || components_.empty()) {
      throw ContractViolation("MixtureModel::log_likelihood: bad input or empty model");
    }
    double top = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(components_.size());
    for (size_t j = 0; j < components_.size(); ++j) {
      terms[j] = std::log(components_[j].prior) -
                 0.5 * (mahalanobis2_full(j, x) + caches_[j].logdet_full + dim() * kLog2Pi);
      top = std::max(top, terms[j]);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - top);
    return top + std::log(sum);
  }

 private:
  static constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

  struct FactorCache {
    Eigen::LLT<Eigen::MatrixXd> llt_full;
    Eigen::LLT<Eigen::MatrixXd> llt_input;
    double logdet_full = 0.0;
    double logdet_input = 0.0;
    bool input_ok = false;
  };

  void create(const Eigen::VectorXd& x) {
    GaussianComponent c;
    c.mean = x;
    c.cov = sigma_init_;
    c.sp = 1.0;
    c.age = 0;
    components_.push_back(std::move(c));
    caches_.emplace_back();
    refresh_cache(components_.size() - 1);
    normalize_priors();
  }

  void normalize_priors() {
    double total = 0.0;
    for (const auto& c : components_) total += c.sp;
    if (total <= 0.0) return;
    for (auto& c : components_) c.prior = c.sp / total;
  }

  void refresh_cache(size_t j) {
    auto& cache = caches_[j];
    const auto& cov = components_[j].cov;
    cache.llt_full.compute(cov);
    // The floored covariance is PD, so the full factorization succeeds; the
    // input marginal can still be near-singular in pathological cases.
    cache.logdet_full =
        2.0 * Eigen::MatrixXd(cache.llt_full.matrixL()).diagonal().array().log().sum();
    cache.llt_input.compute(cov.topLeftCorner(in_dim_, in_dim_));
    cache.input_ok = cache.llt_input.info() == Eigen::Success;
    if (cache.input_ok) {
      cache.logdet_input =
          2.0 * Eigen::MatrixXd(cache.llt_input.matrixL()).diagonal().array().log().sum();
    }
  }

  double mahalanobis2_full(size_t j, const Eigen::VectorXd& x) const {
    return caches_[j].llt_full.matrixL().solve(x - components_[j].mean).squaredNorm();
  }

  int in_dim_;
  int out_dim_;
  double nu_create_;
  double sp_min_;
  long age_min_;
  Eigen::MatrixXd sigma_init_;
  std::vector<GaussianComponent> components_;
  std::vector<FactorCache> caches_;
};

}  // namespace semidyn
