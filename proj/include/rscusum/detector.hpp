#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rscusum/models.hpp"

namespace rscusum {

enum class DetectorKind { cusum, scusum, rscusum };

std::string to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(const std::string& s);

/// Online detector configuration. For the score-based kinds the statistic is
/// driven by z_lambda(x) = lambda * (S_H(x, pre) - S_H(x, post)); "scusum"
/// and "rscusum" share one code path and differ only in what the post slot
/// holds (true post-change law vs least favorable distribution). "cusum"
/// uses the log-likelihood ratio and therefore requires normalized
/// log-densities on both models.
struct DetectorConfig {
  DetectorKind kind = DetectorKind::rscusum;
  ScoreModelPtr pre;
  ScoreModelPtr post_or_lfd;
  double lambda = 1.0;  // score-based kinds only, must be > 0
  double tau = 1.0;     // stopping threshold, must be > 0

  /// Throws input_error when the invariants do not hold.
  void validate() const;
};

/// Running statistic for one stream. z follows the reflected recursion
/// Z(n) = max(Z(n-1) + z_lambda(X_n), 0) and never goes negative;
/// stopped_at is set once, at the first n with Z(n) >= tau.
struct DetectorState {
  double z = 0.0;
  std::int64_t n = 0;
  std::optional<std::int64_t> stopped_at;
};

/// z_lambda(x) for the score-based kinds, the log-likelihood ratio for cusum.
double instantaneous_score(const DetectorConfig& cfg, const Eigen::VectorXd& x);

/// One observation. Throws usage_error if the detector already stopped.
DetectorState step(const DetectorState& state, const DetectorConfig& cfg,
                   const Eigen::VectorXd& x);

/// First n with Z(n) >= tau, or nullopt when the stream ends first.
std::optional<std::int64_t> run_detector(const DetectorConfig& cfg,
                                         const std::vector<Eigen::VectorXd>& stream);

/// Analytic threshold rule: tau = log(gamma) guarantees ARL >= gamma.
double threshold_for_arl(double gamma);

/// Calibrated multiplier. status:
///   root_found        -- empirical h-hat changes sign, Brent root returned
///   no_root_degenerate-- h-hat < 0 (or identically 0) across the bracket;
///                        lambda_star is pinned at lambda_max with a warning
///   bracket_exhausted -- no usable sign structure located in the scan
struct LambdaCalibration {
  double lambda_star = 0.0;
  double residual = 0.0;               // h-hat(lambda_star)
  std::pair<double, double> bracket{0.0, 0.0};
  std::string status = "bracket_exhausted";
  bool warning = false;
};

/// Empirical root of h-hat(lambda) = mean_i exp(z_lambda(X_i)) - 1 over past
/// pre-change samples. Evaluated in log space (log-sum-exp over
/// lambda * score-diff) so large multipliers do not overflow; the bracket
/// scan covers lambda in {2^-10, ..., lambda_max} before Brent refinement,
/// and the largest sign-change bracket wins.
LambdaCalibration calibrate_lambda(const std::vector<Eigen::VectorXd>& pre_samples,
                                   const ScoreModel& pre,
                                   const ScoreModel& post_or_lfd,
                                   double tol = 1e-8, double lambda_max = 64.0);

/// Same calibration on precomputed score differences
/// s_i = S_H(x_i, pre) - S_H(x_i, post).
LambdaCalibration calibrate_lambda_from_diffs(const Eigen::VectorXd& score_diffs,
                                              double tol = 1e-8,
                                              double lambda_max = 64.0);

}  // namespace rscusum
