#include "rscusum/divergence.hpp"

#include <cmath>

namespace rscusum {

DivergenceEstimate fisher_divergence_mc(const ScoreModel& p_model,
                                        const ScoreModel& q_model,
                                        const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty())
    throw input_error("fisher_divergence_mc: sample set is empty");
  if (p_model.dim() != q_model.dim())
    throw input_error("fisher_divergence_mc: model dimensions differ");

  const long n = static_cast<long>(samples.size());
  double mean = 0.0;
  double m2 = 0.0;  // Welford
  long k = 0;
  for (const auto& x : samples) {
    const double v =
        (p_model.grad_log_density(x) - q_model.grad_log_density(x)).squaredNorm();
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  DivergenceEstimate est;
  est.value = mean;
  est.n_samples = n;
  est.std_error =
      n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n))
            : 0.0;
  return est;
}

double fisher_divergence_gaussian(const GaussianModel& p, const GaussianModel& q) {
  if (p.dim() != q.dim())
    throw input_error("fisher_divergence_gaussian: dimensions differ");
  const Eigen::MatrixXd A = q.cov_inv() - p.cov_inv();
  const Eigen::VectorXd a = p.cov_inv() * p.mu() - q.cov_inv() * q.mu();
  const Eigen::VectorXd m = A * p.mu() + a;
  return (A * p.cov() * A.transpose()).trace() + m.squaredNorm();
}

double kl_gaussian(const GaussianModel& p, const GaussianModel& q) {
  if (p.dim() != q.dim()) throw input_error("kl_gaussian: dimensions differ");
  const Eigen::Index d = p.dim();
  const Eigen::VectorXd dmu = q.mu() - p.mu();
  const double trace_term = (q.cov_inv() * p.cov()).trace();
  const double maha = dmu.dot(q.cov_inv() * dmu);
  double log_det_ratio = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    log_det_ratio += 2.0 * (std::log(q.chol_lower()(i, i)) -
                            std::log(p.chol_lower()(i, i)));
  return 0.5 * (trace_term + maha - static_cast<double>(d) + log_det_ratio);
}

}  // namespace rscusum
