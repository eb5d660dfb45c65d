#pragma once

#include <vector>

#include <Eigen/Core>

#include "rscusum/models.hpp"

namespace rscusum {

/// Monte Carlo divergence value with its sampling uncertainty attached, so
/// downstream tests can use statistically honest tolerances.
struct DivergenceEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
};

/// Fisher divergence D_F(P || Q) = E_{X~P} ||grad log p(X) - grad log q(X)||^2
/// estimated over samples drawn from P by the caller.
DivergenceEstimate fisher_divergence_mc(const ScoreModel& p_model,
                                        const ScoreModel& q_model,
                                        const std::vector<Eigen::VectorXd>& samples);

/// Exact Fisher divergence between two Gaussians. The score difference is the
/// affine map A x + a with A = Vq^-1 - Vp^-1, so the expectation reduces to
/// the Gaussian second-moment identity tr(A Vp A^T) + ||A mu_p + a||^2.
double fisher_divergence_gaussian(const GaussianModel& p, const GaussianModel& q);

/// Exact KL divergence between two Gaussians.
double kl_gaussian(const GaussianModel& p, const GaussianModel& q);

}  // namespace rscusum
