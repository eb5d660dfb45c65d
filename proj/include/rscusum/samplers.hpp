#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rscusum/models.hpp"
#include "rscusum/rng.hpp"

namespace rscusum {

constexpr std::int64_t kNoChange = std::numeric_limits<std::int64_t>::max();

/// One data stream: pre-change law up to index nu-1, post-change law from nu
/// on (1-based). nu = kNoChange produces a pure pre-change stream.
struct StreamSpec {
  ScoreModelPtr pre_model;
  ScoreModelPtr post_model;
  std::int64_t nu = 1;
  std::int64_t length = 1;
  std::uint64_t seed = 0;
};

struct MalaConfig {
  double step_size = 0.0;   // 0 means use the 0.1 * d^(-1/3) default
  int n_steps = 1;          // chain iterations per emitted sample
  int burn_in = 500;
  Eigen::VectorXd init;     // empty means start at the origin

  static MalaConfig defaults_for_dim(Eigen::Index d) {
    MalaConfig cfg;
    cfg.step_size = 0.1 * std::pow(static_cast<double>(d), -1.0 / 3.0);
    cfg.init = Eigen::VectorXd::Zero(d);
    return cfg;
  }
};

struct MalaResult {
  std::vector<Eigen::VectorXd> samples;
  double acceptance_rate = 0.0;
  bool low_acceptance_warning = false;  // acceptance below 0.05 over the run
};

/// Exact i.i.d. Gaussian draws via the precomputed Cholesky factor.
std::vector<Eigen::VectorXd> sample_gaussian(const GaussianModel& model,
                                             long n, std::uint64_t seed);

/// Exact i.i.d. draws from a mixture whose components all admit exact
/// sampling (currently: Gaussian components).
std::vector<Eigen::VectorXd> sample_gaussian_mixture(const MixtureModel& model,
                                                     long n, std::uint64_t seed);

/// Metropolis-adjusted Langevin chain targeting an unnormalized density.
/// Proposal x' = x + (eps^2/2) grad log p(x) + eps * xi with exact MH
/// correction through log-density differences, so normalizers cancel.
MalaResult mala_sample(const ScoreModel& model, const MalaConfig& cfg, long n,
                       std::uint64_t seed);

/// Single MALA transition used by callers that manage their own chains.
/// Returns true when the proposal was accepted; x is updated in place.
bool mala_step(const ScoreModel& model, double step_size, Eigen::VectorXd& x,
               double& log_p_x, Rng& rng);

/// Block Gibbs for the Gauss-Bernoulli RBM: h|x ~ Bernoulli(sigmoid(W^T x + c)),
/// x|h ~ Normal(b + W h, I). Runs n independent chains, `iters` sweeps each,
/// one visible sample per chain, so outputs are i.i.d.
std::vector<Eigen::VectorXd> rbm_gibbs_sample(const GaussBernoulliRbm& model,
                                              long n, int iters,
                                              std::uint64_t seed);

struct SampleOptions {
  int rbm_gibbs_iters = 1000;
  std::optional<MalaConfig> mala;  // overrides the per-dimension default
};

/// i.i.d.-style draws from any supported model, dispatching to the exact
/// sampler when one exists and to MCMC otherwise.
std::vector<Eigen::VectorXd> draw_iid(const ScoreModel& model, long n,
                                      std::uint64_t seed,
                                      const SampleOptions& opt = {});

/// Materialize the full stream for a spec. Deterministic per seed.
std::vector<Eigen::VectorXd> generate_stream(const StreamSpec& spec,
                                             const SampleOptions& opt = {});

}  // namespace rscusum
