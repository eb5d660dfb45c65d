#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rscusum/errors.hpp"

namespace rscusum {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Softmax-output MLP producing simplex weights beta(x) over m basis models.
/// Hidden layers use ReLU; widths default to [input -> 128 -> 64 -> m].
/// Everything (forward, backward, Adam) is hand-rolled so the gradients can
/// be validated against finite differences.
class BetaNetwork {
 public:
  BetaNetwork(Eigen::Index input_dim, int m, std::uint64_t seed,
              std::vector<int> hidden = {128, 64});

  Eigen::Index input_dim() const { return widths_.front(); }
  int n_outputs() const { return static_cast<int>(widths_.back()); }

  /// Row-wise simplex weights for a batch X (N x d) -> (N x m).
  Eigen::MatrixXd beta(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd beta_at(const Eigen::VectorXd& x) const;

  /// Mean squared field-matching loss over the batch:
  ///   L = (1/N) sum_i || sum_j beta_j(x_i) basis_grad[j].row(i) - target.row(i) ||^2
  /// basis_grads holds one (N x d) matrix per basis model. When grad_out is
  /// non-null the full parameter gradient is written there.
  double loss_and_gradient(const Eigen::MatrixXd& X,
                           const std::vector<Eigen::MatrixXd>& basis_grads,
                           const Eigen::MatrixXd& target,
                           std::vector<Eigen::MatrixXd>* grad_W,
                           std::vector<Eigen::VectorXd>* grad_b) const;

  double loss(const Eigen::MatrixXd& X,
              const std::vector<Eigen::MatrixXd>& basis_grads,
              const Eigen::MatrixXd& target) const {
    return loss_and_gradient(X, basis_grads, target, nullptr, nullptr);
  }

  /// One Adam update with bias correction; t counts updates from 1.
  void adam_step(const std::vector<Eigen::MatrixXd>& grad_W,
                 const std::vector<Eigen::VectorXd>& grad_b, long t,
                 const AdamConfig& cfg);

  // Flat parameter access for finite-difference checks and serialization.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  Eigen::Index n_parameters() const;

  const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }
  const std::vector<Eigen::Index>& widths() const { return widths_; }
  void set_layer(std::size_t l, Eigen::MatrixXd W, Eigen::VectorXd b);

 private:
  std::vector<Eigen::Index> widths_;
  std::vector<Eigen::MatrixXd> W_;  // layer l: widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> b_;
  // Adam state
  std::vector<Eigen::MatrixXd> mW_, vW_;
  std::vector<Eigen::VectorXd> mb_, vb_;

  // Forward pass keeping pre-activations for backprop.
  void forward(const Eigen::MatrixXd& X, std::vector<Eigen::MatrixXd>& acts,
               std::vector<Eigen::MatrixXd>& pre, Eigen::MatrixXd& soft) const;
};

}  // namespace rscusum
