#include "rscusum/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rscusum/rng.hpp"

namespace rscusum {

namespace {

int resolve_jobs(int n_jobs) {
#ifdef _OPENMP
  if (n_jobs <= 0) return omp_get_max_threads();
  return n_jobs;
#else
  (void)n_jobs;
  return 1;
#endif
}

// Draws one observation at a time so trials can stop early without paying
// for the rest of the stream.
class OnlineSampler {
 public:
  OnlineSampler(const ScoreModel& model, const SampleOptions& opt, Rng& rng)
      : model_(model), opt_(opt) {
    if (const auto* g = dynamic_cast<const GaussianModel*>(&model)) {
      gaussian_ = g;
      return;
    }
    if (const auto* r = dynamic_cast<const GaussBernoulliRbm*>(&model)) {
      rbm_ = r;
      return;
    }
    if (const auto* mix = dynamic_cast<const MixtureModel*>(&model)) {
      bool all_gaussian = true;
      for (const auto& c : mix->basis())
        if (c->kind() != "gaussian") all_gaussian = false;
      if (all_gaussian) {
        mixture_ = mix;
        return;
      }
    }
    // MALA fallback: burn in now, thin per draw.
    mala_cfg_ = opt.mala.value_or(MalaConfig::defaults_for_dim(model.dim()));
    if (mala_cfg_.init.size() == 0)
      mala_cfg_.init = Eigen::VectorXd::Zero(model.dim());
    state_ = mala_cfg_.init;
    log_p_ = model.log_density(state_);
    for (int i = 0; i < mala_cfg_.burn_in; ++i)
      mala_step(model_, mala_cfg_.step_size, state_, log_p_, rng);
  }

  Eigen::VectorXd next(Rng& rng) {
    if (gaussian_)
      return gaussian_->mu() + gaussian_->chol_lower() * rng.normal_vector(gaussian_->dim());
    if (mixture_) {
      const int k = rng.categorical(mixture_->weights());
      const auto& g =
          static_cast<const GaussianModel&>(*mixture_->basis()[static_cast<std::size_t>(k)]);
      return g.mu() + g.chol_lower() * rng.normal_vector(g.dim());
    }
    if (rbm_) {
      const Eigen::Index dx = rbm_->dim();
      const Eigen::Index dh = rbm_->hidden_dim();
      Eigen::VectorXd x = rbm_->b() + rng.normal_vector(dx);
      Eigen::VectorXd h(dh);
      for (int it = 0; it < opt_.rbm_gibbs_iters; ++it) {
        const Eigen::VectorXd act = rbm_->W().transpose() * x + rbm_->c();
        for (Eigen::Index j = 0; j < dh; ++j)
          h[j] = rng.uniform() < stable_sigmoid(act[j]) ? 1.0 : 0.0;
        x = rbm_->b() + rbm_->W() * h + rng.normal_vector(dx);
      }
      return x;
    }
    for (int s = 0; s < std::max(1, mala_cfg_.n_steps); ++s)
      mala_step(model_, mala_cfg_.step_size, state_, log_p_, rng);
    return state_;
  }

 private:
  const ScoreModel& model_;
  SampleOptions opt_;
  const GaussianModel* gaussian_ = nullptr;
  const GaussBernoulliRbm* rbm_ = nullptr;
  const MixtureModel* mixture_ = nullptr;
  MalaConfig mala_cfg_;
  Eigen::VectorXd state_;
  double log_p_ = 0.0;
};

// One stream, one detector; nu = kNoChange means no post phase.
std::optional<std::int64_t> run_trial(const DetectorConfig& cfg,
                                      const ScoreModel& pre,
                                      const ScoreModel* post, std::int64_t nu,
                                      std::int64_t length, std::uint64_t seed,
                                      const SampleOptions& opt) {
  Rng rng(seed);
  OnlineSampler pre_sampler(pre, opt, rng);
  std::optional<OnlineSampler> post_sampler;
  if (post && nu != kNoChange) post_sampler.emplace(*post, opt, rng);

  DetectorState st;
  for (std::int64_t t = 1; t <= length; ++t) {
    const Eigen::VectorXd x =
        (t < nu || !post_sampler) ? pre_sampler.next(rng) : post_sampler->next(rng);
    st = step(st, cfg, x);
    if (st.stopped_at) return st.stopped_at;
  }
  return std::nullopt;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  out.mean = m;
  out.se = v.size() > 1 ? std::sqrt(s2 / static_cast<double>(v.size() - 1) /
                                    static_cast<double>(v.size()))
                        : 0.0;
  return out;
}

}  // namespace

ArlEstimate estimate_arl(const DetectorConfig& cfg, const ScoreModel& pre,
                         int trials, std::int64_t max_len, std::uint64_t base_seed,
                         const SampleOptions& opt, int n_jobs) {
  if (trials < 1) throw input_error("estimate_arl: trials must be >= 1");
  cfg.validate();
  std::vector<double> stops(static_cast<std::size_t>(trials));
  std::vector<char> censored(static_cast<std::size_t>(trials), 0);

  const int jobs = resolve_jobs(n_jobs);
  if (jobs == 1) {
    for (int i = 0; i < trials; ++i) {
      const auto t = run_trial(cfg, pre, nullptr, kNoChange, max_len,
                               derive_seed(base_seed, static_cast<std::uint64_t>(i)), opt);
      stops[static_cast<std::size_t>(i)] = static_cast<double>(t.value_or(max_len));
      censored[static_cast<std::size_t>(i)] = t ? 0 : 1;
    }
  } else {
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 4)
    for (int i = 0; i < trials; ++i) {
      const auto t = run_trial(cfg, pre, nullptr, kNoChange, max_len,
                               derive_seed(base_seed, static_cast<std::uint64_t>(i)), opt);
      stops[static_cast<std::size_t>(i)] = static_cast<double>(t.value_or(max_len));
      censored[static_cast<std::size_t>(i)] = t ? 0 : 1;
    }
  }

  const MeanSe ms = mean_se(stops);
  ArlEstimate est;
  est.mean = ms.mean;
  est.std_error = ms.se;
  est.trials = trials;
  for (char c : censored) est.censored_count += c;
  return est;
}

EddEstimate estimate_edd(const DetectorConfig& cfg, const ScoreModel& pre,
                         const ScoreModel& post_truth, std::int64_t nu, int trials,
                         std::int64_t stream_length, std::uint64_t base_seed,
                         const SampleOptions& opt, int n_jobs) {
  if (trials < 1) throw input_error("estimate_edd: trials must be >= 1");
  if (nu < 1 || nu > stream_length)
    throw input_error("estimate_edd: need 1 <= nu <= stream_length");
  cfg.validate();

  std::vector<double> delays(static_cast<std::size_t>(trials),
                             std::numeric_limits<double>::quiet_NaN());
  const int jobs = resolve_jobs(n_jobs);
  if (jobs == 1) {
    for (int i = 0; i < trials; ++i) {
      const auto t = run_trial(cfg, pre, &post_truth, nu, stream_length,
                               derive_seed(base_seed, static_cast<std::uint64_t>(i)), opt);
      if (t && *t < nu) continue;  // false alarm
      const std::int64_t stop = t.value_or(stream_length + 1);
      delays[static_cast<std::size_t>(i)] =
          static_cast<double>(std::min(stop, stream_length) - nu + 1);
    }
  } else {
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 4)
    for (int i = 0; i < trials; ++i) {
      const auto t = run_trial(cfg, pre, &post_truth, nu, stream_length,
                               derive_seed(base_seed, static_cast<std::uint64_t>(i)), opt);
      if (t && *t < nu) continue;  // false alarm
      const std::int64_t stop = t.value_or(stream_length + 1);
      delays[static_cast<std::size_t>(i)] =
          static_cast<double>(std::min(stop, stream_length) - nu + 1);
    }
  }

  std::vector<double> kept;
  kept.reserve(delays.size());
  int false_alarms = 0;
  for (double d : delays) {
    if (std::isnan(d))
      ++false_alarms;
    else
      kept.push_back(d);
  }
  if (kept.empty())
    throw estimation_error("estimate_edd: every trial false-alarmed before nu");

  const MeanSe ms = mean_se(kept);
  EddEstimate est;
  est.mean = ms.mean;
  est.std_error = ms.se;
  est.false_alarm_count = false_alarms;
  est.trials = trials;
  return est;
}

double calibrate_threshold(const DetectorSpec& det, const ScoreModel& pre,
                           double target_arl, int trials, std::int64_t max_len,
                           std::uint64_t seed, const SampleOptions& opt,
                           int n_jobs) {
  if (!(target_arl >= 1.0))
    throw input_error("calibrate_threshold: target ARL must be >= 1");

  // The reflected statistic does not depend on tau, so one pass per trial
  // records the running-max envelope (new maximum, first time) and the
  // stopping time of *every* threshold comes from a lookup.
  DetectorConfig cfg;
  cfg.kind = det.kind;
  cfg.pre = ScoreModelPtr(&pre, [](const ScoreModel*) {});
  cfg.post_or_lfd = det.post_or_lfd;
  cfg.lambda = det.lambda;
  cfg.tau = std::numeric_limits<double>::infinity();
  cfg.validate();

  using Envelope = std::vector<std::pair<double, std::int64_t>>;
  std::vector<Envelope> envelopes(static_cast<std::size_t>(trials));

  const int jobs = resolve_jobs(n_jobs);
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 4)
  for (int i = 0; i < trials; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    OnlineSampler sampler(pre, opt, rng);
    Envelope env;
    double z = 0.0;
    double running_max = 0.0;
    env.emplace_back(0.0, 1);  // tau = 0 stops at the first sample
    for (std::int64_t t = 1; t <= max_len; ++t) {
      const Eigen::VectorXd x = sampler.next(rng);
      z = std::max(z + instantaneous_score(cfg, x), 0.0);
      if (z > running_max) {
        running_max = z;
        env.emplace_back(z, t);
      }
    }
    envelopes[static_cast<std::size_t>(i)] = std::move(env);
  }

  const auto arl_at = [&](double tau) {
    double acc = 0.0;
    for (const auto& env : envelopes) {
      std::int64_t stop = max_len;  // censored
      for (const auto& [level, time] : env) {
        if (level >= tau) {
          stop = time;
          break;
        }
      }
      acc += static_cast<double>(stop);
    }
    return acc / static_cast<double>(trials);
  };

  double hi = std::log(target_arl) + 1.0;
  while (arl_at(hi) < target_arl && hi < 2e2) hi *= 1.5;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (arl_at(mid) >= target_arl)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

SweepResult edd_vs_arl_sweep(const SweepConfig& cfg) {
  if (cfg.trials < 1) throw input_error("sweep: trials must be >= 1");
  if (!cfg.pre) throw input_error("sweep: missing pre model");
  if (cfg.detectors.empty()) throw input_error("sweep: no detectors");
  if (cfg.posts.empty()) throw input_error("sweep: no post-change truths");
  for (double g : cfg.gammas)
    if (!(g >= 1.0)) throw input_error("sweep: every gamma must be >= 1");

  // Thresholds per (detector, gamma), fixed before the trial loop.
  const std::size_t nd = cfg.detectors.size();
  const std::size_t ng = cfg.gammas.size();
  const std::size_t np = cfg.posts.size();
  std::vector<double> taus(nd * ng);
  for (std::size_t di = 0; di < nd; ++di)
    for (std::size_t gi = 0; gi < ng; ++gi) {
      if (cfg.threshold_rule == ThresholdRule::analytic)
        taus[di * ng + gi] = threshold_for_arl(cfg.gammas[gi]);
      else
        taus[di * ng + gi] = calibrate_threshold(
            cfg.detectors[di], *cfg.pre, cfg.gammas[gi], cfg.calibration_trials,
            cfg.stream_length,
            derive_seed(cfg.base_seed, 0xCA000000ULL + di * 4096 + gi),
            cfg.sampling, cfg.n_jobs);
    }

  const std::size_t n_rows = nd * ng * np * static_cast<std::size_t>(cfg.trials);
  SweepResult result;
  result.nu = cfg.nu;
  result.stream_length = cfg.stream_length;
  result.rows.resize(n_rows);

  const auto run_row = [&](std::size_t idx) {
    const std::size_t trial = idx % static_cast<std::size_t>(cfg.trials);
    std::size_t rest = idx / static_cast<std::size_t>(cfg.trials);
    const std::size_t pi = rest % np;
    rest /= np;
    const std::size_t gi = rest % ng;
    const std::size_t di = rest / ng;

    const DetectorSpec& det = cfg.detectors[di];
    DetectorConfig dcfg;
    dcfg.kind = det.kind;
    dcfg.pre = cfg.pre;
    dcfg.post_or_lfd = det.post_or_lfd;
    dcfg.lambda = det.lambda;
    dcfg.tau = taus[di * ng + gi];

    SweepRow row;
    row.detector = det.name;
    row.true_post = cfg.posts[pi].id;
    row.gamma = cfg.gammas[gi];
    row.tau = dcfg.tau;
    row.trial = static_cast<int>(trial);
    const auto t = run_trial(dcfg, *cfg.pre, cfg.posts[pi].model.get(), cfg.nu,
                             cfg.stream_length, derive_seed(cfg.base_seed, idx),
                             cfg.sampling);
    row.stopping_time = t;
    row.censored = !t.has_value();
    if (t && *t < cfg.nu) {
      row.false_alarm = true;
    } else if (cfg.nu != kNoChange) {
      const std::int64_t stop = t.value_or(cfg.stream_length);
      row.delay = stop - cfg.nu + 1;
    }
    result.rows[idx] = std::move(row);
  };

  const int jobs = resolve_jobs(cfg.n_jobs);
  if (jobs == 1) {
    // serial reference path; the parallel path must reproduce it exactly
    for (std::size_t i = 0; i < n_rows; ++i) run_row(i);
  } else {
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 8)
    for (long i = 0; i < static_cast<long>(n_rows); ++i)
      run_row(static_cast<std::size_t>(i));
  }
  return result;
}

std::vector<double> score_trajectory(const DetectorConfig& cfg,
                                     const std::vector<Eigen::VectorXd>& stream) {
  cfg.validate();
  std::vector<double> path;
  path.reserve(stream.size());
  double z = 0.0;
  for (const auto& x : stream) {
    z = std::max(z + instantaneous_score(cfg, x), 0.0);
    path.push_back(z);
  }
  return path;
}

std::vector<SweepCellSummary> summarize(const SweepResult& result) {
  std::map<std::tuple<std::string, std::string, double>, std::size_t> index;
  std::vector<SweepCellSummary> cells;
  std::vector<std::vector<double>> delays;
  std::vector<std::vector<double>> stops;

  for (const auto& row : result.rows) {
    const auto key = std::make_tuple(row.detector, row.true_post, row.gamma);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cells.size()).first;
      SweepCellSummary c;
      c.detector = row.detector;
      c.true_post = row.true_post;
      c.gamma = row.gamma;
      c.tau = row.tau;
      cells.push_back(c);
      delays.emplace_back();
      stops.emplace_back();
    }
    auto& cell = cells[it->second];
    ++cell.trials;
    if (row.false_alarm) ++cell.false_alarms;
    if (row.censored) ++cell.censored;
    if (row.delay) delays[it->second].push_back(static_cast<double>(*row.delay));
    const std::int64_t cap =
        row.stopping_time ? *row.stopping_time : result.stream_length;
    stops[it->second].push_back(static_cast<double>(cap));
  }

  for (std::size_t i = 0; i < cells.size(); ++i) {
    const MeanSe edd = mean_se(delays[i]);
    cells[i].edd_mean = edd.mean;
    cells[i].edd_std_error = edd.se;
    const MeanSe arl = mean_se(stops[i]);
    cells[i].arl_mean = arl.mean;
    cells[i].arl_std_error = arl.se;
  }
  return cells;
}

namespace {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void export_results(const SweepResult& result, const std::string& csv_path,
                    const std::string& summary_json_path,
                    const std::string& gnuplot_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw io_error("cannot open for writing: " + csv_path);
  csv << "detector,true_post,gamma,tau,trial,stopping_time,delay,censored\n";
  for (const auto& row : result.rows) {
    csv << row.detector << ',' << row.true_post << ',' << format_g17(row.gamma)
        << ',' << format_g17(row.tau) << ',' << row.trial << ',';
    if (row.stopping_time) csv << *row.stopping_time;
    csv << ',';
    if (row.delay) csv << *row.delay;
    csv << ',' << (row.censored ? 1 : 0) << '\n';
  }
  if (!csv) throw io_error("write failed: " + csv_path);
  csv.close();

  if (!summary_json_path.empty()) {
    const auto cells = summarize(result);
    std::ofstream js(summary_json_path);
    if (!js) throw io_error("cannot open for writing: " + summary_json_path);
    js << "{\n  \"nu\": " << result.nu
       << ",\n  \"stream_length\": " << result.stream_length
       << ",\n  \"cells\": [\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      js << "    {\"detector\": \"" << c.detector << "\", \"true_post\": \""
         << c.true_post << "\", \"gamma\": " << format_g17(c.gamma)
         << ", \"tau\": " << format_g17(c.tau) << ", \"trials\": " << c.trials
         << ", \"edd_mean\": " << format_g17(c.edd_mean)
         << ", \"edd_std_error\": " << format_g17(c.edd_std_error)
         << ", \"false_alarms\": " << c.false_alarms
         << ", \"censored\": " << c.censored
         << ", \"arl_mean\": " << format_g17(c.arl_mean)
         << ", \"arl_std_error\": " << format_g17(c.arl_std_error) << "}"
         << (i + 1 < cells.size() ? ",\n" : "\n");
    }
    js << "  ]\n}\n";
    if (!js) throw io_error("write failed: " + summary_json_path);
  }

  if (!gnuplot_path.empty()) {
    const auto cells = summarize(result);
    std::ofstream gp(gnuplot_path);
    if (!gp) throw io_error("cannot open for writing: " + gnuplot_path);
    gp << "# detector true_post gamma log_gamma edd_mean edd_std_error\n";
    for (const auto& c : cells)
      gp << c.detector << ' ' << c.true_post << ' ' << format_g17(c.gamma) << ' '
         << format_g17(std::log(c.gamma)) << ' ' << format_g17(c.edd_mean) << ' '
         << format_g17(c.edd_std_error) << '\n';
    if (!gp) throw io_error("write failed: " + gnuplot_path);
  }
}

SweepResult import_results_csv(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw io_error("cannot open for reading: " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty results file: " + csv_path);

  SweepResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    SweepRow row;
    std::getline(ss, row.detector, ',');
    std::getline(ss, row.true_post, ',');
    std::getline(ss, field, ',');
    row.gamma = std::stod(field);
    std::getline(ss, field, ',');
    row.tau = std::stod(field);
    std::getline(ss, field, ',');
    row.trial = std::stoi(field);
    std::getline(ss, field, ',');
    if (!field.empty()) row.stopping_time = std::stoll(field);
    std::getline(ss, field, ',');
    if (!field.empty()) row.delay = std::stoll(field);
    std::getline(ss, field, ',');
    row.censored = field == "1";
    row.false_alarm =
        row.stopping_time.has_value() && !row.delay.has_value() && !row.censored;
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace rscusum
