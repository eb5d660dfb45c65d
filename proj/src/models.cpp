#include "rscusum/models.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace rscusum {

double stable_softplus(double v) {
  // log(1 + e^v) without overflowing the exp
  if (v > 0.0) return v + std::log1p(std::exp(-v));
  return std::log1p(std::exp(v));
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a NaN), caller decides
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

namespace {

void throw_nonfinite(const char* op, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << op << " produced a non-finite value at coordinate " << i;
      throw numeric_error(os.str());
    }
  }
}

void throw_nonfinite_scalar(const char* op, double v) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << op << " produced a non-finite value";
    throw numeric_error(os.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GaussianModel

GaussianModel::GaussianModel(Eigen::VectorXd mu, Eigen::MatrixXd cov)
    : mu_(std::move(mu)), cov_(std::move(cov)) {
  const Eigen::Index d = mu_.size();
  if (d < 1) throw input_error("gaussian: empty mean vector");
  if (cov_.rows() != d || cov_.cols() != d)
    throw input_error("gaussian: covariance shape does not match mean length");
  if (!mu_.allFinite() || !cov_.allFinite())
    throw input_error("gaussian: parameters must be finite");

  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw numeric_error("gaussian: covariance is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 1e-10)
    throw numeric_error("gaussian: covariance is not positive-definite");

  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw numeric_error("gaussian: Cholesky factorization failed");
  chol_lower_ = llt.matrixL();

  cov_inv_ = llt.solve(Eigen::MatrixXd::Identity(d, d));
  if ((cov_inv_ * cov_ - Eigen::MatrixXd::Identity(d, d))
          .cwiseAbs()
          .maxCoeff() > 1e-8)
    throw numeric_error("gaussian: inverse check cov_inv*cov = I failed");
  cov_inv_sq_ = cov_inv_ * cov_inv_;
  trace_inv_ = cov_inv_.trace();

  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    log_det += 2.0 * std::log(chol_lower_(i, i));
  log_norm_const_ = -0.5 * log_det - 0.5 * d * std::log(2.0 * M_PI);
}

double GaussianModel::log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  const Eigen::VectorXd y = x - mu_;
  return -0.5 * y.dot(cov_inv_ * y) + log_norm_const_;
}

Eigen::VectorXd GaussianModel::grad_log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd g = -(cov_inv_ * (x - mu_));
  throw_nonfinite("gaussian gradient", g);
  return g;
}

double GaussianModel::laplacian_log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  return -trace_inv_;
}

// ---------------------------------------------------------------------------
// QuarticExpModel

QuarticExpModel::QuarticExpModel(double tau, double mu, Eigen::Index d)
    : tau_(tau), mu_(mu), d_(d) {
  if (!(tau > 0.0)) throw input_error("quartic_exp: tau must be positive");
  if (d < 1) throw input_error("quartic_exp: dimension must be >= 1");
  if (!std::isfinite(tau) || !std::isfinite(mu))
    throw input_error("quartic_exp: parameters must be finite");
}

double QuarticExpModel::log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  // E(y) = sum_i y_i^4 + sum_{i<j} y_i^2 y_j^2
  //      = 0.5*(sum y_i^4 + (sum y_i^2)^2)
  const Eigen::ArrayXd y = x.array() - mu_;
  const Eigen::ArrayXd y2 = y.square();
  const double s = y2.sum();
  const double q = y2.square().sum();
  return -tau_ * 0.5 * (q + s * s);
}

Eigen::VectorXd QuarticExpModel::grad_log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  const Eigen::ArrayXd y = x.array() - mu_;
  const Eigen::ArrayXd y2 = y.square();
  const double s = y2.sum();
  // d/dy_k: 4 y_k^3 + 2 y_k (s - y_k^2)
  Eigen::VectorXd g = (-tau_ * (4.0 * y * y2 + 2.0 * y * (s - y2))).matrix();
  throw_nonfinite("quartic_exp gradient", g);
  return g;
}

double QuarticExpModel::laplacian_log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  const Eigen::ArrayXd y = x.array() - mu_;
  const Eigen::ArrayXd y2 = y.square();
  const double s = y2.sum();
  // sum_k [12 y_k^2 + 2 (s - y_k^2)] = (10 + 2d) s
  const double lap = -tau_ * (10.0 + 2.0 * static_cast<double>(d_)) * s;
  throw_nonfinite_scalar("quartic_exp laplacian", lap);
  return lap;
}

// ---------------------------------------------------------------------------
// GaussBernoulliRbm

GaussBernoulliRbm::GaussBernoulliRbm(Eigen::MatrixXd W, Eigen::VectorXd b,
                                     Eigen::VectorXd c)
    : W_(std::move(W)), b_(std::move(b)), c_(std::move(c)) {
  if (b_.size() < 1 || c_.size() < 1)
    throw input_error("rbm: visible and hidden dimensions must be >= 1");
  if (W_.rows() != b_.size() || W_.cols() != c_.size())
    throw input_error("rbm: W must be d_x by d_h to match the bias vectors");
  if (!W_.allFinite() || !b_.allFinite() || !c_.allFinite())
    throw input_error("rbm: parameters must be finite");
  col_sq_ = W_.colwise().squaredNorm();
}

Eigen::VectorXd GaussBernoulliRbm::hidden_activation(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = W_.transpose() * x + c_;
  for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = stable_sigmoid(a[j]);
  return a;
}

double GaussBernoulliRbm::log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  const Eigen::VectorXd a = W_.transpose() * x + c_;
  double sp = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) sp += stable_softplus(a[j]);
  return -0.5 * (x - b_).squaredNorm() + sp;
}

Eigen::VectorXd GaussBernoulliRbm::grad_log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd g = -(x - b_) + W_ * hidden_activation(x);
  throw_nonfinite("rbm gradient", g);
  return g;
}

double GaussBernoulliRbm::laplacian_log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  const Eigen::VectorXd phi = hidden_activation(x);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < phi.size(); ++j)
    acc += col_sq_[j] * phi[j] * (1.0 - phi[j]);
  const double lap = acc - static_cast<double>(dim());
  throw_nonfinite_scalar("rbm laplacian", lap);
  return lap;
}

double GaussBernoulliRbm::hyvarinen_score_closed_form(const Eigen::VectorXd& x) const {
  check_input(x);
  const Eigen::VectorXd phi = hidden_activation(x);
  const Eigen::VectorXd resid = x - b_ - W_ * phi;
  double score = 0.5 * resid.squaredNorm() - static_cast<double>(dim());
  for (Eigen::Index j = 0; j < phi.size(); ++j)
    score += col_sq_[j] * phi[j] * (1.0 - phi[j]);
  throw_nonfinite_scalar("rbm hyvarinen score", score);
  return score;
}

// ---------------------------------------------------------------------------
// MixtureModel

MixtureModel::MixtureModel(std::vector<ScoreModelPtr> basis,
                           Eigen::VectorXd weights)
    : basis_(std::move(basis)), weights_(std::move(weights)) {
  if (basis_.empty()) throw input_error("mixture: needs at least one component");
  if (weights_.size() != static_cast<Eigen::Index>(basis_.size()))
    throw input_error("mixture: weight count does not match component count");
  if (weights_.minCoeff() < 0.0)
    throw input_error("mixture: weights must be non-negative");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw input_error("mixture: weights must sum to 1 within 1e-12");
  const Eigen::Index d = basis_.front()->dim();
  for (const auto& m : basis_)
    if (m->dim() != d)
      throw input_error("mixture: components must share one dimension");
  log_weights_.resize(weights_.size());
  for (Eigen::Index i = 0; i < weights_.size(); ++i)
    log_weights_[i] =
        weights_[i] > 0.0 ? std::log(weights_[i])
                          : -std::numeric_limits<double>::infinity();
}

bool MixtureModel::has_normalized_log_density() const {
  for (const auto& m : basis_)
    if (!m->has_normalized_log_density()) return false;
  return true;
}

double MixtureModel::log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd lp(size());
  for (int i = 0; i < size(); ++i)
    lp[i] = log_weights_[i] + basis_[i]->log_density(x);
  return log_sum_exp(lp);
}

Eigen::VectorXd MixtureModel::responsibilities(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd lp(size());
  for (int i = 0; i < size(); ++i)
    lp[i] = log_weights_[i] + basis_[i]->log_density(x);
  const double lse = log_sum_exp(lp);
  if (!std::isfinite(lse)) {
    std::ostringstream os;
    os << "mixture: every component underflowed at x = [" << x.transpose()
       << "]";
    throw numeric_error(os.str());
  }
  Eigen::VectorXd u(size());
  for (int i = 0; i < size(); ++i) u[i] = std::exp(lp[i] - lse);
  return u;
}

Eigen::VectorXd MixtureModel::grad_log_density(const Eigen::VectorXd& x) const {
  if (size() == 1) return basis_.front()->grad_log_density(x);
  const Eigen::VectorXd u = responsibilities(x);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int i = 0; i < size(); ++i) {
    if (u[i] == 0.0) continue;
    g += u[i] * basis_[i]->grad_log_density(x);
  }
  throw_nonfinite("mixture gradient", g);
  return g;
}

double MixtureModel::laplacian_log_density(const Eigen::VectorXd& x) const {
  if (size() == 1) return basis_.front()->laplacian_log_density(x);
  // laplacian(log s) = sum_i u_i (laplacian(log p_i) + ||g_i||^2) - ||sum_i u_i g_i||^2
  const Eigen::VectorXd u = responsibilities(x);
  Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(dim());
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) {
    if (u[i] == 0.0) continue;
    const Eigen::VectorXd gi = basis_[i]->grad_log_density(x);
    acc += u[i] * (basis_[i]->laplacian_log_density(x) + gi.squaredNorm());
    mean_grad += u[i] * gi;
  }
  const double lap = acc - mean_grad.squaredNorm();
  throw_nonfinite_scalar("mixture laplacian", lap);
  return lap;
}

}  // namespace rscusum
