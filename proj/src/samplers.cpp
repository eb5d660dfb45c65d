#include "rscusum/samplers.hpp"

#include <cmath>

namespace rscusum {

std::vector<Eigen::VectorXd> sample_gaussian(const GaussianModel& model,
                                             long n, std::uint64_t seed) {
  if (n < 1) throw input_error("sample_gaussian: n must be >= 1");
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    out.push_back(model.mu() + model.chol_lower() * rng.normal_vector(model.dim()));
  return out;
}

std::vector<Eigen::VectorXd> sample_gaussian_mixture(const MixtureModel& model,
                                                     long n, std::uint64_t seed) {
  if (n < 1) throw input_error("sample_gaussian_mixture: n must be >= 1");
  for (const auto& c : model.basis())
    if (c->kind() != "gaussian")
      throw input_error(
          "sample_gaussian_mixture: every component must be gaussian");
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const int k = rng.categorical(model.weights());
    const auto& g = static_cast<const GaussianModel&>(*model.basis()[k]);
    out.push_back(g.mu() + g.chol_lower() * rng.normal_vector(g.dim()));
  }
  return out;
}

bool mala_step(const ScoreModel& model, double step_size, Eigen::VectorXd& x,
               double& log_p_x, Rng& rng) {
  const double eps = step_size;
  const double half_eps2 = 0.5 * eps * eps;
  const Eigen::VectorXd grad_x = model.grad_log_density(x);
  const Eigen::VectorXd mean_fwd = x + half_eps2 * grad_x;
  const Eigen::VectorXd prop = mean_fwd + eps * rng.normal_vector(x.size());
  const double log_p_prop = model.log_density(prop);
  if (!std::isfinite(log_p_prop)) return false;  // reject off-support moves
  const Eigen::VectorXd mean_bwd = prop + half_eps2 * model.grad_log_density(prop);
  const double log_q_fwd = -(prop - mean_fwd).squaredNorm() / (2.0 * eps * eps);
  const double log_q_bwd = -(x - mean_bwd).squaredNorm() / (2.0 * eps * eps);
  const double log_alpha = log_p_prop - log_p_x + log_q_bwd - log_q_fwd;
  if (std::log(rng.uniform() + 1e-300) < log_alpha) {
    x = prop;
    log_p_x = log_p_prop;
    return true;
  }
  return false;
}

MalaResult mala_sample(const ScoreModel& model, const MalaConfig& cfg_in, long n,
                       std::uint64_t seed) {
  if (n < 1) throw input_error("mala_sample: n must be >= 1");
  MalaConfig cfg = cfg_in;
  if (cfg.step_size <= 0.0)
    cfg.step_size = MalaConfig::defaults_for_dim(model.dim()).step_size;
  if (cfg.n_steps < 1) throw input_error("mala_sample: n_steps must be >= 1");
  if (cfg.init.size() == 0) cfg.init = Eigen::VectorXd::Zero(model.dim());
  if (cfg.init.size() != model.dim())
    throw input_error("mala_sample: init has the wrong dimension");

  Rng rng(seed);
  Eigen::VectorXd x = cfg.init;
  double log_p = model.log_density(x);
  long accepted = 0;
  long proposed = 0;

  for (int i = 0; i < cfg.burn_in; ++i) {
    accepted += mala_step(model, cfg.step_size, x, log_p, rng) ? 1 : 0;
    ++proposed;
  }

  MalaResult res;
  res.samples.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    for (int s = 0; s < cfg.n_steps; ++s) {
      accepted += mala_step(model, cfg.step_size, x, log_p, rng) ? 1 : 0;
      ++proposed;
    }
    res.samples.push_back(x);
  }
  res.acceptance_rate =
      proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed)
                   : 0.0;
  res.low_acceptance_warning = res.acceptance_rate < 0.05;
  return res;
}

namespace {

Eigen::VectorXd rbm_chain(const GaussBernoulliRbm& model, int iters, Rng& rng) {
  const Eigen::Index dx = model.dim();
  const Eigen::Index dh = model.hidden_dim();
  Eigen::VectorXd x = model.b() + rng.normal_vector(dx);
  Eigen::VectorXd h(dh);
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd act = model.W().transpose() * x + model.c();
    for (Eigen::Index j = 0; j < dh; ++j)
      h[j] = rng.uniform() < stable_sigmoid(act[j]) ? 1.0 : 0.0;
    x = model.b() + model.W() * h + rng.normal_vector(dx);
  }
  return x;
}

}  // namespace

std::vector<Eigen::VectorXd> rbm_gibbs_sample(const GaussBernoulliRbm& model,
                                              long n, int iters,
                                              std::uint64_t seed) {
  if (n < 1) throw input_error("rbm_gibbs_sample: n must be >= 1");
  if (iters < 1) throw input_error("rbm_gibbs_sample: iters must be >= 1");
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out[static_cast<std::size_t>(i)] = rbm_chain(model, iters, rng);
  }
  return out;
}

std::vector<Eigen::VectorXd> draw_iid(const ScoreModel& model, long n,
                                      std::uint64_t seed,
                                      const SampleOptions& opt) {
  if (const auto* g = dynamic_cast<const GaussianModel*>(&model))
    return sample_gaussian(*g, n, seed);
  if (const auto* r = dynamic_cast<const GaussBernoulliRbm*>(&model))
    return rbm_gibbs_sample(*r, n, opt.rbm_gibbs_iters, seed);
  if (const auto* mix = dynamic_cast<const MixtureModel*>(&model)) {
    bool all_gaussian = true;
    for (const auto& c : mix->basis())
      if (c->kind() != "gaussian") all_gaussian = false;
    if (all_gaussian) return sample_gaussian_mixture(*mix, n, seed);
  }
  MalaConfig cfg =
      opt.mala.value_or(MalaConfig::defaults_for_dim(model.dim()));
  if (cfg.init.size() == 0) cfg.init = Eigen::VectorXd::Zero(model.dim());
  return mala_sample(model, cfg, n, seed).samples;
}

std::vector<Eigen::VectorXd> generate_stream(const StreamSpec& spec,
                                             const SampleOptions& opt) {
  if (spec.length < 1) throw input_error("generate_stream: length must be >= 1");
  if (spec.nu < 1) throw input_error("generate_stream: nu must be >= 1");
  if (!spec.pre_model) throw input_error("generate_stream: missing pre model");
  if (spec.nu != kNoChange && !spec.post_model)
    throw input_error("generate_stream: missing post model");
  if (spec.post_model && spec.pre_model->dim() != spec.post_model->dim())
    throw input_error("generate_stream: models must share one dimension");

  const long n_pre =
      static_cast<long>(std::min<std::int64_t>(spec.nu - 1, spec.length));
  const long n_post = static_cast<long>(spec.length) - n_pre;

  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(spec.length));
  if (n_pre > 0) {
    auto pre = draw_iid(*spec.pre_model, n_pre, derive_seed(spec.seed, 0), opt);
    out.insert(out.end(), pre.begin(), pre.end());
  }
  if (n_post > 0) {
    auto post =
        draw_iid(*spec.post_model, n_post, derive_seed(spec.seed, 1), opt);
    out.insert(out.end(), post.begin(), post.end());
  }
  return out;
}

}  // namespace rscusum
