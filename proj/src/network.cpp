#include "rscusum/network.hpp"

#include <cmath>

#include "rscusum/rng.hpp"

namespace rscusum {

BetaNetwork::BetaNetwork(Eigen::Index input_dim, int m, std::uint64_t seed,
                         std::vector<int> hidden) {
  if (input_dim < 1) throw input_error("beta network: input_dim must be >= 1");
  if (m < 1) throw input_error("beta network: m must be >= 1");
  widths_.push_back(input_dim);
  for (int h : hidden) {
    if (h < 1) throw input_error("beta network: hidden widths must be >= 1");
    widths_.push_back(h);
  }
  widths_.push_back(m);

  Rng rng(seed);
  const std::size_t L = widths_.size() - 1;
  W_.resize(L);
  b_.resize(L);
  mW_.resize(L);
  vW_.resize(L);
  mb_.resize(L);
  vb_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const Eigen::Index out = widths_[l + 1];
    const Eigen::Index in = widths_[l];
    // He init on hidden layers; the output layer starts near zero so the
    // softmax opens flat across the basis.
    const double scale = (l + 1 == L)
                             ? 1e-2 * std::sqrt(2.0 / static_cast<double>(in))
                             : std::sqrt(2.0 / static_cast<double>(in));
    W_[l].resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) W_[l](r, c) = scale * rng.normal();
    b_[l] = Eigen::VectorXd::Zero(out);
    mW_[l] = Eigen::MatrixXd::Zero(out, in);
    vW_[l] = Eigen::MatrixXd::Zero(out, in);
    mb_[l] = Eigen::VectorXd::Zero(out);
    vb_[l] = Eigen::VectorXd::Zero(out);
  }
}

void BetaNetwork::set_layer(std::size_t l, Eigen::MatrixXd W, Eigen::VectorXd b) {
  if (l >= W_.size()) throw input_error("beta network: layer index out of range");
  if (W.rows() != W_[l].rows() || W.cols() != W_[l].cols() ||
      b.size() != b_[l].size())
    throw input_error("beta network: layer shape mismatch");
  W_[l] = std::move(W);
  b_[l] = std::move(b);
}

void BetaNetwork::forward(const Eigen::MatrixXd& X,
                          std::vector<Eigen::MatrixXd>& acts,
                          std::vector<Eigen::MatrixXd>& pre,
                          Eigen::MatrixXd& soft) const {
  const std::size_t L = W_.size();
  acts.assign(L + 1, Eigen::MatrixXd());
  pre.assign(L, Eigen::MatrixXd());
  acts[0] = X;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = (acts[l] * W_[l].transpose()).rowwise() + b_[l].transpose();
    acts[l + 1] = (l + 1 < L) ? pre[l].cwiseMax(0.0) : pre[l];
  }
  // row-wise softmax with max subtraction
  const Eigen::MatrixXd& logits = acts[L];
  soft.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    soft.row(i) = (e / e.sum()).matrix();
  }
}

Eigen::MatrixXd BetaNetwork::beta(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim())
    throw input_error("beta network: input dimension mismatch");
  std::vector<Eigen::MatrixXd> acts, pre;
  Eigen::MatrixXd soft;
  forward(X, acts, pre, soft);
  return soft;
}

Eigen::VectorXd BetaNetwork::beta_at(const Eigen::VectorXd& x) const {
  return beta(x.transpose()).row(0).transpose();
}

double BetaNetwork::loss_and_gradient(const Eigen::MatrixXd& X,
                                      const std::vector<Eigen::MatrixXd>& basis_grads,
                                      const Eigen::MatrixXd& target,
                                      std::vector<Eigen::MatrixXd>* grad_W,
                                      std::vector<Eigen::VectorXd>* grad_b) const {
  const Eigen::Index N = X.rows();
  const int m = n_outputs();
  if (static_cast<int>(basis_grads.size()) != m)
    throw input_error("beta network: need one gradient matrix per basis model");
  for (const auto& G : basis_grads)
    if (G.rows() != N || G.cols() != target.cols())
      throw input_error("beta network: basis gradient shape mismatch");
  if (target.rows() != N)
    throw input_error("beta network: target shape mismatch");

  std::vector<Eigen::MatrixXd> acts, pre;
  Eigen::MatrixXd B;
  forward(X, acts, pre, B);

  // Residual field r_i = sum_j B_ij g_j(x_i) - t_i, assembled batch-wise.
  Eigen::MatrixXd r = -target;
  for (int j = 0; j < m; ++j)
    r += B.col(j).asDiagonal() * basis_grads[static_cast<std::size_t>(j)];
  const double loss = r.rowwise().squaredNorm().mean();

  if (!grad_W && !grad_b) return loss;

  // dL/dbeta_ij = (2/N) r_i . g_j(x_i)
  Eigen::MatrixXd q(N, m);
  for (int j = 0; j < m; ++j)
    q.col(j) =
        (r.array() * basis_grads[static_cast<std::size_t>(j)].array())
            .rowwise()
            .sum() *
        (2.0 / static_cast<double>(N));

  // Softmax Jacobian: dL/dlogit_ik = B_ik (q_ik - sum_j B_ij q_ij)
  const Eigen::VectorXd row_dot = (B.array() * q.array()).rowwise().sum();
  Eigen::MatrixXd dZ =
      (B.array() * (q.array().colwise() - row_dot.array())).matrix();

  const std::size_t L = W_.size();
  grad_W->assign(L, Eigen::MatrixXd());
  grad_b->assign(L, Eigen::VectorXd());
  for (std::size_t l = L; l-- > 0;) {
    (*grad_W)[l] = dZ.transpose() * acts[l];
    (*grad_b)[l] = dZ.colwise().sum().transpose();
    if (l > 0) {
      const Eigen::MatrixXd dA = dZ * W_[l];
      dZ = ((pre[l - 1].array() > 0.0).cast<double>() * dA.array()).matrix();
    }
  }
  return loss;
}

void BetaNetwork::adam_step(const std::vector<Eigen::MatrixXd>& grad_W,
                            const std::vector<Eigen::VectorXd>& grad_b, long t,
                            const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t l = 0; l < W_.size(); ++l) {
    mW_[l] = cfg.beta1 * mW_[l] + (1.0 - cfg.beta1) * grad_W[l];
    vW_[l] = cfg.beta2 * vW_[l] + (1.0 - cfg.beta2) * grad_W[l].cwiseProduct(grad_W[l]);
    W_[l].array() -= cfg.lr * (mW_[l].array() / c1) /
                     ((vW_[l].array() / c2).sqrt() + cfg.eps);
    mb_[l] = cfg.beta1 * mb_[l] + (1.0 - cfg.beta1) * grad_b[l];
    vb_[l] = cfg.beta2 * vb_[l] + (1.0 - cfg.beta2) * grad_b[l].cwiseProduct(grad_b[l]);
    b_[l].array() -= cfg.lr * (mb_[l].array() / c1) /
                     ((vb_[l].array() / c2).sqrt() + cfg.eps);
  }
}

Eigen::Index BetaNetwork::n_parameters() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < W_.size(); ++l) n += W_[l].size() + b_[l].size();
  return n;
}

Eigen::VectorXd BetaNetwork::parameters() const {
  Eigen::VectorXd flat(n_parameters());
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    for (Eigen::Index c = 0; c < W_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < W_[l].rows(); ++r) flat[at++] = W_[l](r, c);
    for (Eigen::Index i = 0; i < b_[l].size(); ++i) flat[at++] = b_[l][i];
  }
  return flat;
}

void BetaNetwork::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != n_parameters())
    throw input_error("beta network: flat parameter length mismatch");
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    for (Eigen::Index c = 0; c < W_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < W_[l].rows(); ++r) W_[l](r, c) = flat[at++];
    for (Eigen::Index i = 0; i < b_[l].size(); ++i) b_[l][i] = flat[at++];
  }
}

}  // namespace rscusum
