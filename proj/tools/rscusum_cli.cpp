// Command-line front end: model I/O, LFD search, lambda calibration, online
// detection, stream synthesis, and benchmark sweeps.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rscusum/harness.hpp"
#include "rscusum/lfd.hpp"
#include "rscusum/manifest.hpp"
#include "rscusum/model_io.hpp"

using namespace rscusum;
using nlohmann::json;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Model reference: either a path string or an inline model object.
ScoreModelPtr resolve_model(const json& j, const std::string& what) {
  if (j.is_string()) return load_model(j.get<std::string>());
  if (j.is_object()) return model_from_json(j);
  throw input_error(what + ": expected a file path or an inline model object");
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw input_error("config " + path + ": " + e.what());
  }
  return j;
}

SampleOptions sampling_from_json(const json& j) {
  SampleOptions opt;
  if (!j.is_object()) return opt;
  if (j.contains("rbm_gibbs_iters"))
    opt.rbm_gibbs_iters = j.at("rbm_gibbs_iters").get<int>();
  if (j.contains("mala_step") || j.contains("mala_burn_in") ||
      j.contains("mala_thin")) {
    MalaConfig m;
    m.step_size = j.value("mala_step", 0.0);
    m.burn_in = j.value("mala_burn_in", 500);
    m.n_steps = j.value("mala_thin", 1);
    opt.mala = m;
  }
  return opt;
}

struct GlobalFlags {
  std::optional<std::uint64_t> seed_override;
  int jobs = 0;
  std::string manifest_path = "manifest.jsonl";
};

void emit_manifest(const GlobalFlags& g, const std::string& subcommand,
                   const std::string& config_path, const json& config_echo,
                   std::uint64_t seed, const std::vector<std::string>& outputs,
                   double wall) {
  RunManifest m;
  m.subcommand = subcommand;
  m.config_path = config_path;
  m.config_echo = config_echo.dump();
  m.seed = seed;
  m.outputs = outputs;
  m.wall_clock_seconds = wall;
  append_manifest(m, g.manifest_path);
}

// ---------------------------------------------------------------------------

int cmd_sample(const GlobalFlags& g, const std::string& pre_path,
               const std::string& post_path, std::int64_t nu, std::int64_t length,
               std::uint64_t seed, const std::string& out,
               const json& sampling_json) {
  const double t0 = now_seconds();
  if (g.seed_override) seed = *g.seed_override;

  StreamSpec spec;
  spec.pre_model = load_model(pre_path);
  spec.post_model = post_path.empty() ? spec.pre_model : load_model(post_path);
  spec.nu = nu <= 0 ? kNoChange : nu;
  spec.length = length;
  spec.seed = seed;
  const auto stream = generate_stream(spec, sampling_from_json(sampling_json));
  save_stream_csv(stream, out);

  json echo = {{"pre", pre_path},       {"post", post_path}, {"nu", nu},
               {"length", length},      {"seed", seed},      {"out", out},
               {"sampling", sampling_json}};
  emit_manifest(g, "sample", "", echo, seed, {out}, now_seconds() - t0);
  std::cout << json{{"written", out}, {"rows", stream.size()}}.dump() << "\n";
  return 0;
}

int cmd_detect(const GlobalFlags& g, const std::string& pre_path,
               const std::string& post_path, const std::string& kind,
               double lambda, double tau, const std::string& stream_path) {
  const double t0 = now_seconds();
  DetectorConfig cfg;
  cfg.kind = detector_kind_from_string(kind);
  cfg.pre = load_model(pre_path);
  cfg.post_or_lfd = load_model(post_path);
  cfg.lambda = lambda;
  cfg.tau = tau;
  cfg.validate();

  const auto stream = load_stream_csv(stream_path);
  if (stream.empty()) throw input_error("stream has no rows: " + stream_path);

  DetectorState st;
  for (const auto& x : stream) {
    st = step(st, cfg, x);
    if (st.stopped_at) break;
  }

  json out;
  if (st.stopped_at)
    out["stopping_time"] = *st.stopped_at;
  else
    out["stopping_time"] = nullptr;
  out["final_stat"] = st.z;
  out["n_processed"] = st.n;
  std::cout << out.dump() << "\n";

  json echo = {{"pre", pre_path},   {"post", post_path}, {"kind", kind},
               {"lambda", lambda},  {"tau", tau},        {"stream", stream_path}};
  emit_manifest(g, "detect", "", echo, 0, {}, now_seconds() - t0);
  return 0;
}

int cmd_calibrate(const GlobalFlags& g, const std::string& config_path,
                  const std::string& out_path) {
  const double t0 = now_seconds();
  const json cfg = load_config(config_path);
  auto pre = resolve_model(cfg.at("pre"), "pre");
  auto post = resolve_model(cfg.at("post"), "post");

  std::vector<Eigen::VectorXd> samples;
  std::uint64_t seed = cfg.value("seed", 1ULL);
  if (g.seed_override) seed = *g.seed_override;
  if (cfg.contains("samples")) {
    samples = load_stream_csv(cfg.at("samples").get<std::string>());
  } else {
    const long n = cfg.value("draw", 10000L);
    samples = draw_iid(*pre, n, seed,
                       sampling_from_json(cfg.value("sampling", json::object())));
  }

  const double tol = cfg.value("tol", 1e-8);
  const double lambda_max = cfg.value("lambda_max", 64.0);
  const auto cal = calibrate_lambda(samples, *pre, *post, tol, lambda_max);

  json out = {{"lambda_star", cal.lambda_star},
              {"residual", cal.residual},
              {"bracket", {cal.bracket.first, cal.bracket.second}},
              {"status", cal.status},
              {"warning", cal.warning},
              {"n_samples", samples.size()},
              {"seed", seed}};
  std::ofstream f(out_path);
  if (!f) throw io_error("cannot open for writing: " + out_path);
  f << out.dump(2) << "\n";
  std::cout << out.dump() << "\n";

  emit_manifest(g, "calibrate", config_path, cfg, seed, {out_path},
                now_seconds() - t0);
  return 0;
}

int cmd_lfd(const GlobalFlags& g, const std::string& config_path,
            const std::string& out_path) {
  const double t0 = now_seconds();
  const json cfg = load_config(config_path);
  const std::string mode = cfg.at("mode").get<std::string>();
  auto pre = resolve_model(cfg.at("pre"), "pre");

  std::vector<ScoreModelPtr> basis;
  for (const auto& b : cfg.at("basis")) basis.push_back(resolve_model(b, "basis"));
  UncertaintyClass cls(basis, cfg.value("description", std::string{}));

  std::uint64_t seed = cfg.value("seed", 1ULL);
  if (g.seed_override) seed = *g.seed_override;
  const SampleOptions sampling =
      sampling_from_json(cfg.value("sampling", json::object()));

  LfdResult result;
  if (mode == "closed_form") {
    const auto* pre_g = dynamic_cast<const GaussianModel*>(pre.get());
    if (!pre_g)
      throw input_error("closed_form mode needs a gaussian pre-change model");
    std::vector<Eigen::VectorXd> means;
    Eigen::MatrixXd V;
    bool have_v = false;
    for (const auto& b : cls.basis) {
      const auto* bg = dynamic_cast<const GaussianModel*>(b.get());
      if (!bg) throw input_error("closed_form mode needs a gaussian basis");
      if (!have_v) {
        V = bg->cov();
        have_v = true;
      } else if ((V - bg->cov()).cwiseAbs().maxCoeff() > 1e-12) {
        throw input_error("closed_form mode needs one shared covariance");
      }
      means.push_back(bg->mu());
    }
    result = lfd_gaussian_location(*pre_g, means, V);
  } else if (mode == "basis_scan") {
    result = lfd_basis_scan(cls, *pre, cfg.value("n_samples", 10000L), seed,
                            sampling);
  } else if (mode == "simplex") {
    SimplexConfig sc;
    const json s = cfg.value("simplex", json::object());
    sc.n_samples = s.value("n_samples", sc.n_samples);
    sc.max_epochs = s.value("max_epochs", sc.max_epochs);
    sc.patience = s.value("patience", sc.patience);
    sc.rel_tol = s.value("rel_tol", sc.rel_tol);
    sc.adam.lr = s.value("lr", sc.adam.lr);
    sc.seed = seed;
    sc.sampling = sampling;
    result = lfd_simplex_optimize(cls, *pre, sc);
  } else if (mode == "network") {
    TrainConfig tc;
    const json n = cfg.value("network", json::object());
    tc.n_train = n.value("n_train", tc.n_train);
    tc.epochs = n.value("epochs", tc.epochs);
    tc.adam.lr = n.value("lr", tc.adam.lr);
    tc.n_test = n.value("n_test", tc.n_test);
    tc.mala_refresh_steps = n.value("mala_refresh_steps", tc.mala_refresh_steps);
    tc.mala_step_size = n.value("mala_step", tc.mala_step_size);
    tc.mala_burn_in = n.value("mala_burn_in", tc.mala_burn_in);
    tc.seed = seed;
    std::vector<int> hidden = {128, 64};
    if (n.contains("hidden")) hidden = n.at("hidden").get<std::vector<int>>();
    BetaNetwork net(cls.dim(), cls.size(), seed, hidden);
    result = lfd_network_train(cls, *pre, net, tc);
  } else {
    throw input_error("unknown lfd mode \"" + mode + "\"");
  }

  json out = lfd_result_to_json(result);
  out["seed"] = seed;
  out["config"] = cfg;
  std::ofstream f(out_path);
  if (!f) throw io_error("cannot open for writing: " + out_path);
  f << out.dump(2) << "\n";

  if (result.ambiguous)
    std::cerr << "warning: top two basis divergences overlap within noise\n";
  if (result.class_warning)
    std::cerr << "warning: some basis element is indistinguishable from the "
                 "pre-change law\n";
  std::cout << json{{"mode", mode},
                    {"selected_index", result.selected_index},
                    {"out", out_path}}
                   .dump()
            << "\n";
  emit_manifest(g, "lfd", config_path, cfg, seed, {out_path}, now_seconds() - t0);
  return 0;
}

int cmd_bench(const GlobalFlags& g, const std::string& config_path,
              const std::string& out_prefix) {
  const double t0 = now_seconds();
  const json cfg = load_config(config_path);

  SweepConfig sweep;
  sweep.pre = resolve_model(cfg.at("pre"), "pre");
  for (const auto& d : cfg.at("detectors")) {
    DetectorSpec spec;
    spec.name = d.at("name").get<std::string>();
    spec.kind = detector_kind_from_string(d.value("kind", "rscusum"));
    spec.post_or_lfd = resolve_model(d.at("post"), "detector post");
    spec.lambda = d.value("lambda", 1.0);
    sweep.detectors.push_back(std::move(spec));
  }
  sweep.gammas = cfg.at("gammas").get<std::vector<double>>();
  for (const auto& p : cfg.at("posts"))
    sweep.posts.push_back(
        {p.at("id").get<std::string>(), resolve_model(p.at("model"), "post")});
  sweep.nu = cfg.value("nu", std::int64_t{50});
  if (sweep.nu <= 0) sweep.nu = kNoChange;
  sweep.stream_length = cfg.value("stream_length", std::int64_t{10000});
  sweep.trials = cfg.value("trials", 1000);
  sweep.base_seed = cfg.value("base_seed", 1ULL);
  if (g.seed_override) sweep.base_seed = *g.seed_override;
  const std::string rule = cfg.value("threshold_rule", "analytic");
  if (rule == "analytic")
    sweep.threshold_rule = ThresholdRule::analytic;
  else if (rule == "calibrated")
    sweep.threshold_rule = ThresholdRule::calibrated;
  else
    throw input_error("threshold_rule must be analytic or calibrated");
  sweep.calibration_trials = cfg.value("calibration_trials", 2000);
  sweep.sampling = sampling_from_json(cfg.value("sampling", json::object()));
  sweep.n_jobs = g.jobs;

  const auto result = edd_vs_arl_sweep(sweep);
  const std::string csv = out_prefix + ".csv";
  const std::string summary = out_prefix + "_summary.json";
  const std::string gnuplot = out_prefix + "_edd_vs_logarl.dat";
  export_results(result, csv, summary, gnuplot);

  std::cout << json{{"rows", result.rows.size()},
                    {"csv", csv},
                    {"summary", summary},
                    {"gnuplot", gnuplot}}
                   .dump()
            << "\n";
  emit_manifest(g, "bench", config_path, cfg, sweep.base_seed,
                {csv, summary, gnuplot}, now_seconds() - t0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust score-based quickest change detection toolkit"};
  app.require_subcommand(1);

  GlobalFlags g;
  std::uint64_t seed_flag = 0;
  auto* seed_opt =
      app.add_option("--seed", seed_flag, "Override every configured seed");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)");
  app.add_option("--manifest", g.manifest_path,
                 "Manifest file to append run records to");

  auto* sample = app.add_subcommand("sample", "Synthesize a change-point stream");
  std::string s_pre, s_post, s_out = "stream.csv", s_sampling_json;
  std::int64_t s_nu = 50, s_length = 10000;
  std::uint64_t s_seed = 1;
  sample->add_option("--pre", s_pre, "Pre-change model JSON")->required();
  sample->add_option("--post", s_post, "Post-change model JSON");
  sample->add_option("--nu", s_nu, "Change point (1-based; <= 0 means never)");
  sample->add_option("--length", s_length, "Stream length");
  sample->add_option("--stream-seed", s_seed, "Stream seed");
  sample->add_option("--out", s_out, "Output CSV path");
  sample->add_option("--sampling", s_sampling_json,
                     "Sampling options as inline JSON");

  auto* detect = app.add_subcommand("detect", "Run a detector over a stream CSV");
  std::string d_pre, d_post, d_stream, d_kind = "rscusum";
  double d_lambda = 1.0, d_tau = 1.0;
  detect->add_option("--pre", d_pre, "Pre-change model JSON")->required();
  detect->add_option("--post", d_post, "Post-change / LFD model JSON")->required();
  detect->add_option("--stream", d_stream, "Stream CSV (t,x_1..x_d)")->required();
  detect->add_option("--kind", d_kind, "cusum | scusum | rscusum");
  detect->add_option("--lambda", d_lambda, "Score multiplier");
  detect->add_option("--tau", d_tau, "Stopping threshold");

  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the multiplier");
  std::string c_config, c_out = "lambda.json";
  calibrate->add_option("--config", c_config, "Calibration config JSON")
      ->required();
  calibrate->add_option("--out", c_out, "Output JSON path");

  auto* lfd =
      app.add_subcommand("lfd", "Identify the least favorable distribution");
  std::string l_config, l_out = "lfd_result.json";
  lfd->add_option("--config", l_config, "LFD config JSON")->required();
  lfd->add_option("--out", l_out, "Output JSON path");

  auto* bench = app.add_subcommand("bench", "EDD-vs-ARL sweep");
  std::string b_config, b_prefix = "sweep";
  bench->add_option("--config", b_config, "Sweep config JSON")->required();
  bench->add_option("--out-prefix", b_prefix, "Output path prefix");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed_override = seed_flag;
#ifdef _OPENMP
  if (g.jobs > 0) omp_set_num_threads(g.jobs);
#endif

  try {
    if (app.got_subcommand(sample)) {
      json sj = json::object();
      if (!s_sampling_json.empty()) sj = json::parse(s_sampling_json);
      return cmd_sample(g, s_pre, s_post, s_nu, s_length, s_seed, s_out, sj);
    }
    if (app.got_subcommand(detect))
      return cmd_detect(g, d_pre, d_post, d_kind, d_lambda, d_tau, d_stream);
    if (app.got_subcommand(calibrate)) return cmd_calibrate(g, c_config, c_out);
    if (app.got_subcommand(lfd)) return cmd_lfd(g, l_config, l_out);
    if (app.got_subcommand(bench)) return cmd_bench(g, b_config, b_prefix);
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
