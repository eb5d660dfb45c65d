#include "rscusum/lfd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rscusum/rng.hpp"

namespace rscusum {

UncertaintyClass::UncertaintyClass(std::vector<ScoreModelPtr> basis_in,
                                   std::string desc)
    : basis(std::move(basis_in)), description(std::move(desc)) {
  if (basis.empty())
    throw input_error("uncertainty class: needs at least one basis model");
  const Eigen::Index d = basis.front()->dim();
  for (const auto& m : basis)
    if (!m || m->dim() != d)
      throw input_error("uncertainty class: basis models must share one dimension");
}

namespace {

Eigen::VectorXd one_hot(int m, int idx) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  v[idx] = 1.0;
  return v;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

// Basis gradients G_j (n x d) and pre-change gradients T (n x d) for a
// sample batch; the raw material of every field-matching loss.
struct FieldBatch {
  Eigen::MatrixXd X;
  std::vector<Eigen::MatrixXd> basis_grads;
  Eigen::MatrixXd target;
};

FieldBatch make_field_batch(const UncertaintyClass& cls, const ScoreModel& pre,
                            const std::vector<Eigen::VectorXd>& samples) {
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index d = cls.dim();
  FieldBatch fb;
  fb.X.resize(n, d);
  fb.target.resize(n, d);
  fb.basis_grads.assign(cls.basis.size(), Eigen::MatrixXd(n, d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = samples[static_cast<std::size_t>(i)];
    fb.X.row(i) = x.transpose();
    fb.target.row(i) = pre.grad_log_density(x).transpose();
    for (std::size_t j = 0; j < cls.basis.size(); ++j)
      fb.basis_grads[j].row(i) = cls.basis[j]->grad_log_density(x).transpose();
  }
  return fb;
}

// Loss and gradient in the constant-weight case.
double constant_loss_grad(const FieldBatch& fb, const Eigen::VectorXd& beta,
                          Eigen::VectorXd* grad_beta) {
  const Eigen::Index n = fb.X.rows();
  Eigen::MatrixXd r = -fb.target;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    r += beta[j] * fb.basis_grads[static_cast<std::size_t>(j)];
  const double loss = r.rowwise().squaredNorm().mean();
  if (grad_beta) {
    grad_beta->resize(beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j)
      (*grad_beta)[j] =
          2.0 *
          (r.array() * fb.basis_grads[static_cast<std::size_t>(j)].array())
              .sum() /
          static_cast<double>(n);
  }
  return loss;
}

ScoreModelPtr make_mixture(const UncertaintyClass& cls,
                           const Eigen::VectorXd& weights) {
  Eigen::VectorXd w = weights.cwiseMax(0.0);
  w /= w.sum();
  return std::make_shared<MixtureModel>(cls.basis, w);
}

}  // namespace

LfdResult lfd_gaussian_location(const GaussianModel& theta_star,
                                const std::vector<Eigen::VectorXd>& candidate_means,
                                const Eigen::MatrixXd& V) {
  if (candidate_means.empty())
    throw input_error("lfd_gaussian_location: empty candidate list");
  const GaussianModel shared_cov(Eigen::VectorXd::Zero(theta_star.dim()), V);
  const Eigen::MatrixXd& Vinv = shared_cov.cov_inv();

  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidate_means.size(); ++i) {
    const auto& mu = candidate_means[i];
    if (mu.size() != theta_star.dim())
      throw input_error("lfd_gaussian_location: candidate dimension mismatch");
    const double dist = (Vinv * (mu - theta_star.mu())).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(i);
    }
  }

  LfdResult res;
  res.mode = "closed_form";
  res.selected_index = best;
  res.weights = one_hot(static_cast<int>(candidate_means.size()), best);
  res.beta_averages = res.weights;
  auto q1 = std::make_shared<GaussianModel>(candidate_means[static_cast<std::size_t>(best)], V);
  res.lfd_model = q1;
  res.divergence_to_pre = {fisher_divergence_gaussian(*q1, theta_star), 0.0, 1};
  res.class_warning = best_dist < 1e-12;  // pre-change mean sits on a candidate
  return res;
}

LfdResult lfd_basis_scan(const UncertaintyClass& cls, const ScoreModel& pre,
                         long n_samples, std::uint64_t seed,
                         const SampleOptions& opt) {
  if (n_samples < 1) throw input_error("lfd_basis_scan: n_samples must be >= 1");
  if (pre.dim() != cls.dim())
    throw input_error("lfd_basis_scan: pre-change dimension mismatch");

  LfdResult res;
  res.mode = "basis_scan";
  res.per_vertex_divergence.resize(cls.basis.size());
  for (std::size_t i = 0; i < cls.basis.size(); ++i) {
    const auto samples =
        draw_iid(*cls.basis[i], n_samples, derive_seed(seed, i), opt);
    res.per_vertex_divergence[i] =
        fisher_divergence_mc(*cls.basis[i], pre, samples);
    if (res.per_vertex_divergence[i].value <=
        3.0 * res.per_vertex_divergence[i].std_error)
      res.class_warning = true;  // cannot rule out P_i == P_inf
  }

  int best = 0;
  for (int i = 1; i < cls.size(); ++i)
    if (res.per_vertex_divergence[static_cast<std::size_t>(i)].value <
        res.per_vertex_divergence[static_cast<std::size_t>(best)].value)
      best = i;

  if (cls.size() > 1) {
    int second = best == 0 ? 1 : 0;
    for (int i = 0; i < cls.size(); ++i) {
      if (i == best) continue;
      if (res.per_vertex_divergence[static_cast<std::size_t>(i)].value <
          res.per_vertex_divergence[static_cast<std::size_t>(second)].value)
        second = i;
    }
    const auto& a = res.per_vertex_divergence[static_cast<std::size_t>(best)];
    const auto& b = res.per_vertex_divergence[static_cast<std::size_t>(second)];
    const double gap = b.value - a.value;
    const double comb_se =
        std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    res.ambiguous = gap < 3.0 * comb_se;
  }

  res.selected_index = best;
  res.weights = one_hot(cls.size(), best);
  res.beta_averages = res.weights;
  res.lfd_model = cls.basis[static_cast<std::size_t>(best)];
  res.divergence_to_pre = res.per_vertex_divergence[static_cast<std::size_t>(best)];
  return res;
}

LfdResult lfd_simplex_optimize(const UncertaintyClass& cls, const ScoreModel& pre,
                               const SimplexConfig& cfg) {
  if (pre.dim() != cls.dim())
    throw input_error("lfd_simplex_optimize: pre-change dimension mismatch");
  const int m = cls.size();

  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(m);

  LfdResult res;
  res.mode = "simplex";

  double best_loss = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_z = z;
  double prev_loss = std::numeric_limits<double>::quiet_NaN();
  int since_improvement = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const Eigen::VectorXd beta = softmax(z);
    const auto mixture = make_mixture(cls, beta);
    const auto samples = draw_iid(*mixture, cfg.n_samples,
                                  derive_seed(cfg.seed, epoch), cfg.sampling);
    const FieldBatch fb = make_field_batch(cls, pre, samples);

    Eigen::VectorXd grad_beta;
    const double loss = constant_loss_grad(fb, beta, &grad_beta);
    if (!std::isfinite(loss))
      throw training_error("lfd_simplex_optimize: loss diverged at epoch " +
                           std::to_string(epoch));

    if (loss < best_loss - cfg.rel_tol * std::abs(best_loss)) {
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_z = z;
    }
    res.best_loss_history.push_back(best_loss);

    if (epoch > 0 && std::isfinite(prev_loss) &&
        std::abs(loss - prev_loss) <
            cfg.rel_tol * std::max(std::abs(prev_loss), 1e-300))
      break;  // relative loss change converged
    if (since_improvement >= cfg.patience) {
      res.stalled = true;
      break;
    }
    prev_loss = loss;

    // chain rule through the softmax, then Adam on the logits
    const double dot = beta.dot(grad_beta);
    const Eigen::VectorXd grad_z =
        (beta.array() * (grad_beta.array() - dot)).matrix();
    const long t = epoch + 1;
    adam_m = cfg.adam.beta1 * adam_m + (1.0 - cfg.adam.beta1) * grad_z;
    adam_v = cfg.adam.beta2 * adam_v +
             (1.0 - cfg.adam.beta2) * grad_z.cwiseProduct(grad_z).eval();
    const double c1 = 1.0 - std::pow(cfg.adam.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.adam.beta2, static_cast<double>(t));
    z.array() -= cfg.adam.lr * (adam_m.array() / c1) /
                 ((adam_v.array() / c2).sqrt() + cfg.adam.eps);
  }

  const Eigen::VectorXd beta = softmax(best_z);
  res.weights = beta;
  res.beta_averages = beta;
  res.selected_index = 0;
  beta.maxCoeff(&res.selected_index);
  res.final_loss = best_loss;
  res.lfd_model = select_detection_model(res, cls);

  // fresh-sample divergence estimate for the selected model
  const auto mixture = make_mixture(cls, beta);
  const auto eval_samples = draw_iid(
      *mixture, cfg.n_samples, derive_seed(cfg.seed, 0x5eed), cfg.sampling);
  res.divergence_to_pre = fisher_divergence_mc(*mixture, pre, eval_samples);
  return res;
}

LfdResult lfd_network_train(const UncertaintyClass& cls, const ScoreModel& pre,
                            BetaNetwork& net, const TrainConfig& cfg) {
  if (pre.dim() != cls.dim())
    throw input_error("lfd_network_train: pre-change dimension mismatch");
  if (net.input_dim() != cls.dim() || net.n_outputs() != cls.size())
    throw input_error("lfd_network_train: network shape does not match class");

  const int m = cls.size();
  MalaConfig mala = MalaConfig::defaults_for_dim(cls.dim());
  if (cfg.mala_step_size > 0.0) mala.step_size = cfg.mala_step_size;

  // Epoch-0 sample: uniform-weight mixture, full burn-in. Chains persist
  // afterwards and are refreshed in place every epoch.
  Eigen::VectorXd w_bar = Eigen::VectorXd::Constant(m, 1.0 / m);
  auto mixture = make_mixture(cls, w_bar);
  std::vector<Eigen::VectorXd> chains;
  {
    MalaConfig init_cfg = mala;
    init_cfg.burn_in = cfg.mala_burn_in;
    init_cfg.n_steps = 1;
    SampleOptions opt;
    opt.mala = init_cfg;
    chains = draw_iid(*mixture, cfg.n_train, derive_seed(cfg.seed, 0), opt);
  }

  LfdResult res;
  res.mode = "network";
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<Eigen::MatrixXd> gW;
  std::vector<Eigen::VectorXd> gb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) {
      // refresh the persistent chains toward the current field
      mixture = make_mixture(cls, w_bar);
      const std::uint64_t epoch_seed = derive_seed(cfg.seed, 1000 + epoch);
      const long n = static_cast<long>(chains.size());
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) {
        Rng rng(derive_seed(epoch_seed, static_cast<std::uint64_t>(i)));
        auto& x = chains[static_cast<std::size_t>(i)];
        double lp = mixture->log_density(x);
        for (int s = 0; s < cfg.mala_refresh_steps; ++s)
          mala_step(*mixture, mala.step_size, x, lp, rng);
      }
    }

    const FieldBatch fb = make_field_batch(cls, pre, chains);
    const double loss =
        net.loss_and_gradient(fb.X, fb.basis_grads, fb.target, &gW, &gb);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "lfd_network_train: loss diverged (NaN) at epoch " << epoch
         << " with learning rate " << cfg.adam.lr;
      throw training_error(os.str());
    }
    net.adam_step(gW, gb, epoch + 1, cfg.adam);

    best_loss = std::min(best_loss, loss);
    res.best_loss_history.push_back(best_loss);
    w_bar = net.beta(fb.X).colwise().mean().transpose();
  }

  // Fresh test sample from the final field for the reported beta averages.
  mixture = make_mixture(cls, w_bar);
  std::vector<Eigen::VectorXd> test;
  {
    MalaConfig test_cfg = mala;
    test_cfg.burn_in = cfg.mala_burn_in;
    test_cfg.n_steps = 1;
    SampleOptions opt;
    opt.mala = test_cfg;
    test = draw_iid(*mixture, cfg.n_test, derive_seed(cfg.seed, 0xbeef), opt);
  }
  const FieldBatch tb = make_field_batch(cls, pre, test);
  const Eigen::MatrixXd B = net.beta(tb.X);
  res.beta_averages = B.colwise().mean().transpose();
  res.weights = res.beta_averages;
  res.final_loss = net.loss(tb.X, tb.basis_grads, tb.target);
  res.selected_index = 0;
  res.beta_averages.maxCoeff(&res.selected_index);
  res.network = std::make_shared<BetaNetwork>(net);
  res.lfd_model = select_detection_model(res, cls);
  res.divergence_to_pre = fisher_divergence_mc(*mixture, pre, test);
  return res;
}

ScoreModelPtr select_detection_model(const LfdResult& result,
                                     const UncertaintyClass& cls) {
  int idx = 0;
  const double top = result.weights.maxCoeff(&idx);
  if (top >= 0.99) return cls.basis[static_cast<std::size_t>(idx)];
  return make_mixture(cls, result.weights);
}

DivergenceEstimate field_loss(
    const UncertaintyClass& cls, const ScoreModel& pre,
    const std::vector<Eigen::VectorXd>& samples,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& beta_fn) {
  if (samples.empty()) throw input_error("field_loss: empty sample set");
  double mean = 0.0, m2 = 0.0;
  long k = 0;
  for (const auto& x : samples) {
    const Eigen::VectorXd beta = beta_fn(x);
    Eigen::VectorXd field = Eigen::VectorXd::Zero(cls.dim());
    for (int j = 0; j < cls.size(); ++j)
      field += beta[j] * cls.basis[static_cast<std::size_t>(j)]->grad_log_density(x);
    const double v = (field - pre.grad_log_density(x)).squaredNorm();
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  const long n = k;
  return {mean,
          n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n))
                : 0.0,
          n};
}

}  // namespace rscusum
