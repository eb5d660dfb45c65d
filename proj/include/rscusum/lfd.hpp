#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rscusum/divergence.hpp"
#include "rscusum/models.hpp"
#include "rscusum/network.hpp"
#include "rscusum/samplers.hpp"

namespace rscusum {

/// Finite basis spanning the post-change uncertainty class (its convex hull).
struct UncertaintyClass {
  std::vector<ScoreModelPtr> basis;
  std::string description;

  UncertaintyClass(std::vector<ScoreModelPtr> basis_in, std::string desc = "");
  int size() const { return static_cast<int>(basis.size()); }
  Eigen::Index dim() const { return basis.front()->dim(); }
};

/// Outcome of a least-favorable-distribution search, whichever mode produced
/// it. beta_averages is always a simplex vector of length m; for the vertex
/// modes it is one-hot.
struct LfdResult {
  std::string mode;               // closed_form | basis_scan | simplex | network
  int selected_index = -1;        // argmax of beta_averages
  Eigen::VectorXd weights;        // constant weights handed to detection
  Eigen::VectorXd beta_averages;
  DivergenceEstimate divergence_to_pre;
  ScoreModelPtr lfd_model;
  std::shared_ptr<BetaNetwork> network;  // network mode only
  std::vector<DivergenceEstimate> per_vertex_divergence;  // basis scan only
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> best_loss_history;  // non-increasing by construction
  bool ambiguous = false;   // top-two basis-scan estimates within 3 combined SE
  bool stalled = false;     // optimizer made no progress over a patience window
  bool class_warning = false;  // some vertex indistinguishable from the pre law
};

/// Closed-form LFD for a shared-covariance Gaussian location class: pick the
/// candidate mean closest to the pre-change mean in the norm
/// ||v||_V = sqrt(v^T V^-2 v). Ties break to the lowest index.
LfdResult lfd_gaussian_location(const GaussianModel& theta_star,
                                const std::vector<Eigen::VectorXd>& candidate_means,
                                const Eigen::MatrixXd& V);

/// Vertex scan: Monte Carlo Fisher divergence of every basis element to the
/// pre-change law; argmin wins (lowest index on ties). Sets `ambiguous` when
/// the two best estimates overlap within 3 combined standard errors.
LfdResult lfd_basis_scan(const UncertaintyClass& cls, const ScoreModel& pre,
                         long n_samples, std::uint64_t seed,
                         const SampleOptions& opt = {});

struct SimplexConfig {
  long n_samples = 2000;
  int max_epochs = 400;
  int patience = 100;
  double rel_tol = 1e-6;
  AdamConfig adam{0.05, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 1;
  SampleOptions sampling;
};

/// Constant-weight minimizer of E_P || sum_j beta_j grad log p_j - grad log
/// p_inf ||^2 via Adam on softmax logits, resampling P from the current
/// mixture every epoch.
LfdResult lfd_simplex_optimize(const UncertaintyClass& cls, const ScoreModel& pre,
                               const SimplexConfig& cfg);

struct TrainConfig {
  long n_train = 5000;
  int epochs = 1200;
  AdamConfig adam{1e-2, 0.9, 0.999, 1e-8};
  long n_test = 10000;          // test-set size for beta averages
  int mala_refresh_steps = 20;  // chain steps per epoch refresh
  double mala_step_size = 0.0;  // 0: per-dimension default
  int mala_burn_in = 500;       // epoch-0 burn-in
  std::uint64_t seed = 1;
};

/// Softmax-network mode: trains beta(x) = Softmax(f_NN(x)) against the same
/// field-matching loss, regenerating the training sample from the learned
/// field each epoch with MALA (persistent chains, targeting the mixture with
/// the current average weights). Throws training_error on NaN loss.
LfdResult lfd_network_train(const UncertaintyClass& cls, const ScoreModel& pre,
                            BetaNetwork& net, const TrainConfig& cfg);

/// Model handed to detection: the dominant vertex when its weight is >= 0.99
/// (vertices keep closed-form scores), otherwise the constant-weight mixture.
ScoreModelPtr select_detection_model(const LfdResult& result,
                                     const UncertaintyClass& cls);

/// Mean/SE of the field-matching loss of an arbitrary weight field over given
/// samples. Used to compare constant and x-dependent fields on equal footing.
DivergenceEstimate field_loss(const UncertaintyClass& cls, const ScoreModel& pre,
                              const std::vector<Eigen::VectorXd>& samples,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& beta_fn);

}  // namespace rscusum
