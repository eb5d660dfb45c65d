#include <doctest.h>

#include <cmath>

#include "rscusum/network.hpp"
#include "rscusum/rng.hpp"

using namespace rscusum;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct TinyProblem {
  MatrixXd X;
  std::vector<MatrixXd> basis_grads;
  MatrixXd target;
};

TinyProblem random_problem(int n, int d, int m, std::uint64_t seed) {
  Rng rng(seed);
  TinyProblem p;
  p.X.resize(n, d);
  p.target.resize(n, d);
  for (int i = 0; i < n; ++i) {
    p.X.row(i) = rng.normal_vector(d).transpose();
    p.target.row(i) = rng.normal_vector(d).transpose();
  }
  for (int j = 0; j < m; ++j) {
    MatrixXd G(n, d);
    for (int i = 0; i < n; ++i) G.row(i) = rng.normal_vector(d).transpose();
    p.basis_grads.push_back(std::move(G));
  }
  return p;
}

}  // namespace

TEST_CASE("softmax rows form a simplex") {
  BetaNetwork net(3, 5, 11);
  Rng rng(2);
  MatrixXd X(40, 3);
  for (int i = 0; i < 40; ++i) X.row(i) = (5.0 * rng.normal_vector(3)).transpose();
  const MatrixXd B = net.beta(X);
  for (int i = 0; i < 40; ++i) {
    CHECK(B.row(i).minCoeff() >= 0.0);
    CHECK(B.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("single-output network is constantly 1") {
  BetaNetwork net(2, 1, 3);
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const VectorXd beta = net.beta_at(rng.normal_vector(2));
    CHECK(beta.size() == 1);
    CHECK(beta[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  // full-size layers on a 10-sample batch, every parameter within 1e-4 rel
  BetaNetwork net(2, 4, 19, {16, 8});
  const TinyProblem p = random_problem(10, 2, 4, 5);

  std::vector<MatrixXd> gW;
  std::vector<VectorXd> gb;
  net.loss_and_gradient(p.X, p.basis_grads, p.target, &gW, &gb);

  // flatten analytic gradient in the same order as parameters()
  VectorXd flat_grad(net.n_parameters());
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < gW.size(); ++l) {
    for (Eigen::Index c = 0; c < gW[l].cols(); ++c)
      for (Eigen::Index r = 0; r < gW[l].rows(); ++r) flat_grad[at++] = gW[l](r, c);
    for (Eigen::Index i = 0; i < gb[l].size(); ++i) flat_grad[at++] = gb[l][i];
  }

  const VectorXd theta = net.parameters();
  const double grad_scale = flat_grad.cwiseAbs().maxCoeff();
  const double h = 1e-5;
  int checked = 0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    net.set_parameters(tp);
    const double lp = net.loss(p.X, p.basis_grads, p.target);
    net.set_parameters(tm);
    const double lm = net.loss(p.X, p.basis_grads, p.target);
    const double fd = (lp - lm) / (2.0 * h);
    // relative to the gradient scale so dead-ReLU entries do not divide by 0
    const double denom =
        std::max({std::abs(fd), std::abs(flat_grad[k]), 1e-3 * grad_scale});
    CHECK(std::abs(flat_grad[k] - fd) / denom < 1e-4);
    ++checked;
  }
  net.set_parameters(theta);
  CHECK(checked == net.n_parameters());
}

TEST_CASE("adam drives a trivial matching problem to zero loss") {
  // two basis fields, target equal to the first: beta must go to (1, 0)
  const int n = 64;
  Rng rng(6);
  TinyProblem p = random_problem(n, 2, 2, 7);
  p.target = p.basis_grads[0];

  BetaNetwork net(2, 2, 23, {8});
  AdamConfig adam;
  adam.lr = 5e-2;
  std::vector<MatrixXd> gW;
  std::vector<VectorXd> gb;
  double loss = 0.0;
  for (int t = 1; t <= 400; ++t) {
    loss = net.loss_and_gradient(p.X, p.basis_grads, p.target, &gW, &gb);
    net.adam_step(gW, gb, t, adam);
  }
  CHECK(loss < 1e-3);
  const MatrixXd B = net.beta(p.X);
  CHECK(B.col(0).minCoeff() > 0.95);
}

TEST_CASE("parameter round trip") {
  BetaNetwork a(3, 4, 31, {6, 5});
  BetaNetwork b(3, 4, 99, {6, 5});
  b.set_parameters(a.parameters());
  Rng rng(8);
  const VectorXd x = rng.normal_vector(3);
  CHECK((a.beta_at(x) - b.beta_at(x)).cwiseAbs().maxCoeff() == 0.0);
}
