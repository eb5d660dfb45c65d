#include "rscusum/detector.hpp"

#include <algorithm>
#include <cmath>

namespace rscusum {

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::cusum: return "cusum";
    case DetectorKind::scusum: return "scusum";
    case DetectorKind::rscusum: return "rscusum";
  }
  return "unknown";
}

DetectorKind detector_kind_from_string(const std::string& s) {
  if (s == "cusum") return DetectorKind::cusum;
  if (s == "scusum") return DetectorKind::scusum;
  if (s == "rscusum") return DetectorKind::rscusum;
  throw input_error("unknown detector kind '" + s + "'");
}

void DetectorConfig::validate() const {
  if (!pre || !post_or_lfd)
    throw input_error("detector config: both models must be set");
  if (pre->dim() != post_or_lfd->dim())
    throw input_error("detector config: model dimensions differ");
  if (!(tau > 0.0) && tau != 0.0)
    throw input_error("detector config: tau must be >= 0");
  if (kind == DetectorKind::cusum) {
    if (!pre->has_normalized_log_density() ||
        !post_or_lfd->has_normalized_log_density())
      throw input_error(
          "detector config: cusum needs normalized log-densities; "
          "use scusum/rscusum for unnormalized models");
  } else if (!(lambda > 0.0)) {
    throw input_error("detector config: lambda must be > 0 for score-based kinds");
  }
}

double instantaneous_score(const DetectorConfig& cfg, const Eigen::VectorXd& x) {
  if (cfg.kind == DetectorKind::cusum)
    return cfg.post_or_lfd->log_density(x) - cfg.pre->log_density(x);
  return cfg.lambda *
         (cfg.pre->hyvarinen_score(x) - cfg.post_or_lfd->hyvarinen_score(x));
}

DetectorState step(const DetectorState& state, const DetectorConfig& cfg,
                   const Eigen::VectorXd& x) {
  if (state.stopped_at)
    throw usage_error("detector already stopped at n = " +
                      std::to_string(*state.stopped_at));
  DetectorState next;
  next.z = std::max(state.z + instantaneous_score(cfg, x), 0.0);
  next.n = state.n + 1;
  if (next.z >= cfg.tau) next.stopped_at = next.n;
  return next;
}

std::optional<std::int64_t> run_detector(const DetectorConfig& cfg,
                                         const std::vector<Eigen::VectorXd>& stream) {
  if (stream.empty()) throw input_error("run_detector: empty stream");
  cfg.validate();
  DetectorState state;
  for (const auto& x : stream) {
    state = step(state, cfg, x);
    if (state.stopped_at) return state.stopped_at;
  }
  return std::nullopt;
}

double threshold_for_arl(double gamma) {
  if (!(gamma >= 1.0)) throw input_error("threshold_for_arl: gamma must be >= 1");
  return std::log(gamma);
}

namespace {

// log of mean exp(lambda * s_i), computed against the running max so the
// exponentials never overflow.
double log_mean_exp_scaled(const Eigen::VectorXd& s, double lambda) {
  const Eigen::ArrayXd z = lambda * s.array();
  const double m = z.maxCoeff();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) acc += std::exp(z[i] - m);
  return m + std::log(acc / static_cast<double>(z.size()));
}

// Brent root refinement on g(lambda) = log mean exp(lambda s). Stops when
// |h-hat| = |expm1(g)| <= tol.
double brent_root(const Eigen::VectorXd& s, double a, double b, double fa,
                  double fb, double tol) {
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < 200; ++iter) {
    if (fb * fc > 0.0) {
      c = a;
      fc = fa;
      e = d = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * 1e-16 * std::abs(b) + 1e-15;
    const double xm = 0.5 * (c - b);
    if (std::abs(std::expm1(fb)) <= tol || std::abs(xm) <= tol1) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      const double sr = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * sr;
        q = 1.0 - sr;
      } else {
        q = fa / fc;
        const double r = fb / fc;
        p = sr * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (sr - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = log_mean_exp_scaled(s, b);
  }
  return b;
}

}  // namespace

LambdaCalibration calibrate_lambda_from_diffs(const Eigen::VectorXd& s,
                                              double tol, double lambda_max) {
  if (s.size() < 100)
    throw input_error("calibrate_lambda: need at least 100 pre-change samples");

  LambdaCalibration out;

  // Identically-zero score differences (pre = post): h-hat(lambda) = 0 for
  // every lambda, no usable root.
  if (s.cwiseAbs().maxCoeff() < 1e-14) {
    out.status = "no_root_degenerate";
    out.lambda_star = lambda_max;
    out.residual = 0.0;
    out.warning = true;
    return out;
  }

  // Scan lambda = 2^-10 ... lambda_max for a sign change of
  // g(lambda) = log mean exp(lambda s); keep the largest bracket found.
  std::vector<double> grid;
  for (double l = std::pow(2.0, -10); l < lambda_max; l *= 2.0) grid.push_back(l);
  grid.push_back(lambda_max);

  double lo = 0.0, hi = 0.0, glo = 0.0, ghi = 0.0;
  bool bracketed = false;
  bool any_negative = false;
  double prev = grid.front();
  double gprev = log_mean_exp_scaled(s, prev);
  if (gprev < 0.0) any_negative = true;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = grid[i];
    const double gcur = log_mean_exp_scaled(s, cur);
    if (gcur < 0.0) any_negative = true;
    if (gprev < 0.0 && gcur >= 0.0) {
      lo = prev; hi = cur; glo = gprev; ghi = gcur;
      bracketed = true;  // keep scanning; the last bracket wins
    }
    prev = cur;
    gprev = gcur;
  }

  if (!bracketed) {
    if (any_negative) {
      // h-hat stays negative through lambda_max: degenerate case, any
      // multiplier keeps E[exp(z)] <= 1.
      out.status = "no_root_degenerate";
      out.lambda_star = lambda_max;
      out.residual = std::expm1(log_mean_exp_scaled(s, lambda_max));
      out.warning = true;
    } else {
      out.status = "bracket_exhausted";
      out.lambda_star = 0.0;
      out.residual = std::expm1(log_mean_exp_scaled(s, grid.front()));
      out.warning = true;
    }
    out.bracket = {grid.front(), lambda_max};
    return out;
  }

  const double root = brent_root(s, lo, hi, glo, ghi, tol);
  out.lambda_star = root;
  out.residual = std::expm1(log_mean_exp_scaled(s, root));
  out.bracket = {lo, hi};
  out.status = "root_found";
  out.warning = false;
  return out;
}

LambdaCalibration calibrate_lambda(const std::vector<Eigen::VectorXd>& pre_samples,
                                   const ScoreModel& pre,
                                   const ScoreModel& post_or_lfd, double tol,
                                   double lambda_max) {
  if (pre_samples.size() < 100)
    throw input_error("calibrate_lambda: need at least 100 pre-change samples");
  Eigen::VectorXd s(static_cast<Eigen::Index>(pre_samples.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const auto& x = pre_samples[static_cast<std::size_t>(i)];
    s[i] = pre.hyvarinen_score(x) - post_or_lfd.hyvarinen_score(x);
  }
  return calibrate_lambda_from_diffs(s, tol, lambda_max);
}

}  // namespace rscusum
