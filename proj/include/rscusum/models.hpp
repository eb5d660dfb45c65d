#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rscusum/errors.hpp"

namespace rscusum {

/// Unnormalized statistical model: everything downstream (Hyvarinen scores,
/// Fisher divergences, MALA, detectors) works off the gradient and Laplacian
/// of log p, so the normalizing constant never has to exist.
///
/// log_density is defined up to an additive constant per model. It is needed
/// only where density *ratios* within one model matter (MALA acceptance,
/// mixture responsibilities).
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual Eigen::Index dim() const = 0;

  /// log p(x) up to an additive constant.
  virtual double log_density(const Eigen::VectorXd& x) const = 0;

  /// grad_x log p(x).
  virtual Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const = 0;

  /// sum_i d^2/dx_i^2 log p(x).
  virtual double laplacian_log_density(const Eigen::VectorXd& x) const = 0;

  /// Hyvarinen score 0.5*||grad log p||^2 + laplacian(log p), assembled from
  /// the two operations above so the identity holds to floating-point
  /// assembly order for every model.
  double hyvarinen_score(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd g = grad_log_density(x);
    return 0.5 * g.squaredNorm() + laplacian_log_density(x);
  }

  /// True when log_density includes the normalizing constant (Gaussians and
  /// mixtures of them). Likelihood-ratio detectors require this.
  virtual bool has_normalized_log_density() const { return false; }

  virtual std::string kind() const = 0;

 protected:
  void check_input(const Eigen::VectorXd& x) const {
    if (x.size() != dim())
      throw input_error("model of dimension " + std::to_string(dim()) +
                        " evaluated at a vector of length " +
                        std::to_string(x.size()));
    if (!x.allFinite()) throw input_error("evaluation point is not finite");
  }
};

using ScoreModelPtr = std::shared_ptr<const ScoreModel>;

/// Multivariate normal with precomputed precision matrices.
class GaussianModel : public ScoreModel {
 public:
  /// Throws numeric_error if cov is not symmetric positive-definite
  /// (eigenvalues must exceed 1e-10) or if the computed inverse fails
  /// cov_inv * cov = I within 1e-8 elementwise.
  GaussianModel(Eigen::VectorXd mu, Eigen::MatrixXd cov);

  Eigen::Index dim() const override { return mu_.size(); }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  double laplacian_log_density(const Eigen::VectorXd& x) const override;
  bool has_normalized_log_density() const override { return true; }
  std::string kind() const override { return "gaussian"; }

  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::MatrixXd& cov_inv() const { return cov_inv_; }
  const Eigen::MatrixXd& cov_inv_sq() const { return cov_inv_sq_; }
  const Eigen::MatrixXd& chol_lower() const { return chol_lower_; }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd cov_inv_;
  Eigen::MatrixXd cov_inv_sq_;
  Eigen::MatrixXd chol_lower_;
  double trace_inv_ = 0.0;
  double log_norm_const_ = 0.0;  // -0.5*logdet(cov) - d/2*log(2*pi)
};

/// Quartic exponential family member. The density is
///   p(x) proportional to exp(-tau * E(x - mu*1))
/// with energy E(y) = sum_i y_i^4 + sum_{i<j} y_i^2 y_j^2. The normalizer
/// depends on tau and is never computed.
class QuarticExpModel : public ScoreModel {
 public:
  QuarticExpModel(double tau, double mu, Eigen::Index d);

  Eigen::Index dim() const override { return d_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  double laplacian_log_density(const Eigen::VectorXd& x) const override;
  std::string kind() const override { return "quartic_exp"; }

  double tau() const { return tau_; }
  double mu() const { return mu_; }

 private:
  double tau_;
  double mu_;
  Eigen::Index d_;
};

/// Gauss-Bernoulli restricted Boltzmann machine over visible units x.
/// Free energy F(x) = 0.5*||x - b||^2 - sum_j softplus((W^T x)_j + c_j),
/// log p(x) = -F(x) up to the unknown log-partition.
class GaussBernoulliRbm : public ScoreModel {
 public:
  GaussBernoulliRbm(Eigen::MatrixXd W, Eigen::VectorXd b, Eigen::VectorXd c);

  Eigen::Index dim() const override { return b_.size(); }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  double laplacian_log_density(const Eigen::VectorXd& x) const override;
  std::string kind() const override { return "rbm"; }

  /// Closed-form Hyvarinen score
  ///   sum_i [ 0.5*(x_i - b_i - (W phi)_i)^2 ] + sum_j colsq_j phi_j(1-phi_j)
  ///   - d_x,   phi_j = sigmoid((W^T x)_j + c_j).
  /// Independent of the generic assembly path; kept for cross-checking.
  double hyvarinen_score_closed_form(const Eigen::VectorXd& x) const;

  /// Hidden-unit activation probabilities sigmoid(W^T x + c).
  Eigen::VectorXd hidden_activation(const Eigen::VectorXd& x) const;

  const Eigen::MatrixXd& W() const { return W_; }
  const Eigen::VectorXd& b() const { return b_; }
  const Eigen::VectorXd& c() const { return c_; }
  Eigen::Index hidden_dim() const { return c_.size(); }

 private:
  Eigen::MatrixXd W_;  // d_x by d_h
  Eigen::VectorXd b_;  // visible bias
  Eigen::VectorXd c_;  // hidden bias
  Eigen::VectorXd col_sq_;  // per-hidden-unit sum_i W_ij^2
};

/// Convex combination of basis models. Responsibilities u_i(x) are computed
/// through log-sum-exp so tail points do not underflow.
class MixtureModel : public ScoreModel {
 public:
  MixtureModel(std::vector<ScoreModelPtr> basis, Eigen::VectorXd weights);

  Eigen::Index dim() const override { return basis_.front()->dim(); }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  double laplacian_log_density(const Eigen::VectorXd& x) const override;
  bool has_normalized_log_density() const override;
  std::string kind() const override { return "mixture"; }

  /// Responsibilities u_i(x) = w_i p_i(x) / sum_j w_j p_j(x).
  /// Throws numeric_error naming x when every component underflows.
  Eigen::VectorXd responsibilities(const Eigen::VectorXd& x) const;

  const std::vector<ScoreModelPtr>& basis() const { return basis_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int size() const { return static_cast<int>(basis_.size()); }

 private:
  std::vector<ScoreModelPtr> basis_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd log_weights_;
};

// Numerically stable primitives shared across the models.
double stable_softplus(double v);
double stable_sigmoid(double v);
double log_sum_exp(const Eigen::VectorXd& v);

}  // namespace rscusum
