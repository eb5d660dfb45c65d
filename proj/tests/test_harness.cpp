#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rscusum/harness.hpp"

using namespace rscusum;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

MatrixXd demo_cov() {
  MatrixXd V(2, 2);
  V << 1.0, 0.5, 0.5, 1.0;
  return V;
}

ScoreModelPtr demo_pre() {
  return std::make_shared<GaussianModel>(vec2(0, 0), demo_cov());
}

ScoreModelPtr demo_vertex(double e) {
  return std::make_shared<GaussianModel>(vec2(e, e), demo_cov());
}

}  // namespace

TEST_CASE("estimate_arl: tau = 0 stops at the first sample, exactly") {
  DetectorConfig cfg{DetectorKind::rscusum, demo_pre(), demo_vertex(0.5), 1.5,
                     0.0};
  const auto est = estimate_arl(cfg, *cfg.pre, 50, 1000, 1);
  CHECK(est.mean == 1.0);
  CHECK(est.std_error == 0.0);
  CHECK(est.censored_count == 0);
}

TEST_CASE("estimate_arl: identical models never cross, all censored") {
  auto pre = demo_pre();
  DetectorConfig cfg{DetectorKind::rscusum, pre, pre, 1.0, 0.5};
  const auto est = estimate_arl(cfg, *pre, 20, 500, 2);
  CHECK(est.censored_count == 20);
  CHECK(est.mean == 500.0);
}

TEST_CASE("estimate_edd: nu = 1 with tau = 0 gives delay exactly 1") {
  DetectorConfig cfg{DetectorKind::rscusum, demo_pre(), demo_vertex(0.5), 1.5,
                     0.0};
  const auto est = estimate_edd(cfg, *cfg.pre, *cfg.post_or_lfd, 1, 30, 100, 3);
  CHECK(est.mean == 1.0);
  CHECK(est.false_alarm_count == 0);
}

TEST_CASE("estimate_edd: all trials false-alarm throws estimation_error") {
  DetectorConfig cfg{DetectorKind::rscusum, demo_pre(), demo_vertex(0.5), 1.5,
                     0.0};  // stops at n = 1 < nu
  CHECK_THROWS_AS(estimate_edd(cfg, *cfg.pre, *cfg.post_or_lfd, 10, 5, 100, 4),
                  estimation_error);
}

TEST_CASE("calibrated threshold hits the target ARL") {
  DetectorSpec det{"rscusum", DetectorKind::rscusum, demo_vertex(0.5), 1.5};
  auto pre = demo_pre();
  const double tau = calibrate_threshold(det, *pre, 100.0, 800, 5000, 5);
  CHECK(tau > 0.0);
  CHECK(tau < threshold_for_arl(100.0));  // analytic rule is conservative
  DetectorConfig cfg{det.kind, pre, det.post_or_lfd, det.lambda, tau};
  const auto est = estimate_arl(cfg, *pre, 800, 5000, 999);
  CHECK(std::abs(est.mean - 100.0) <= 4.0 * est.std_error);
}

TEST_CASE("sweep: serial and parallel paths produce identical rows") {
  SweepConfig cfg;
  cfg.pre = demo_pre();
  cfg.detectors = {{"rscusum", DetectorKind::rscusum, demo_vertex(0.5), 1.5},
                   {"rcusum", DetectorKind::cusum, demo_vertex(0.5), 1.0}};
  cfg.gammas = {20.0, 50.0};
  cfg.posts = {{"p05", demo_vertex(0.5)}, {"p10", demo_vertex(1.0)}};
  cfg.nu = 10;
  cfg.stream_length = 800;
  cfg.trials = 12;
  cfg.base_seed = 77;

  SweepConfig serial = cfg;
  serial.n_jobs = 1;
  SweepConfig parallel = cfg;
  parallel.n_jobs = 0;

  const auto a = edd_vs_arl_sweep(serial);
  const auto b = edd_vs_arl_sweep(parallel);
  REQUIRE(a.rows.size() == b.rows.size());
  CHECK(a.rows.size() == 2 * 2 * 2 * 12);
  CHECK(summarize(a).size() == 2 * 2 * 2);  // |detectors| x |gammas| x |posts|
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].detector == b.rows[i].detector);
    CHECK(a.rows[i].true_post == b.rows[i].true_post);
    CHECK(a.rows[i].gamma == b.rows[i].gamma);
    CHECK(a.rows[i].tau == b.rows[i].tau);
    CHECK(a.rows[i].trial == b.rows[i].trial);
    CHECK(a.rows[i].stopping_time == b.rows[i].stopping_time);
    CHECK(a.rows[i].delay == b.rows[i].delay);
    CHECK(a.rows[i].censored == b.rows[i].censored);
  }
}

TEST_CASE("sweep rows respect the delay conventions") {
  SweepConfig cfg;
  cfg.pre = demo_pre();
  cfg.detectors = {{"rscusum", DetectorKind::rscusum, demo_vertex(0.5), 1.5}};
  cfg.gammas = {30.0};
  cfg.posts = {{"p05", demo_vertex(0.5)}};
  cfg.nu = 15;
  cfg.stream_length = 600;
  cfg.trials = 60;
  cfg.base_seed = 11;
  cfg.n_jobs = 1;
  const auto res = edd_vs_arl_sweep(cfg);
  for (const auto& row : res.rows) {
    if (row.stopping_time) CHECK(*row.stopping_time >= 1);
    if (row.false_alarm) {
      CHECK(row.stopping_time.has_value());
      CHECK(*row.stopping_time < cfg.nu);
      CHECK_FALSE(row.delay.has_value());
    } else {
      CHECK(row.delay.has_value());
      if (row.stopping_time)
        CHECK(*row.delay == *row.stopping_time - cfg.nu + 1);
      else
        CHECK(*row.delay == cfg.stream_length - cfg.nu + 1);
    }
  }
}

TEST_CASE("EDD is monotone in gamma within noise") {
  SweepConfig cfg;
  cfg.pre = demo_pre();
  cfg.detectors = {{"rscusum", DetectorKind::rscusum, demo_vertex(0.5), 1.5}};
  cfg.gammas = {20.0, 60.0, 200.0};
  cfg.posts = {{"p05", demo_vertex(0.5)}};
  cfg.nu = 20;
  cfg.stream_length = 2000;
  cfg.trials = 400;
  cfg.base_seed = 13;
  const auto cells = summarize(edd_vs_arl_sweep(cfg));
  REQUIRE(cells.size() == 3);
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const double comb =
        std::sqrt(cells[i].edd_std_error * cells[i].edd_std_error +
                  cells[i - 1].edd_std_error * cells[i - 1].edd_std_error);
    CHECK(cells[i].edd_mean >= cells[i - 1].edd_mean - 2.0 * comb);
  }
}

TEST_CASE("score trajectory: drift directions and validation") {
  auto pre = demo_pre();
  auto post = demo_vertex(0.5);
  DetectorConfig cfg{DetectorKind::rscusum, pre, post, 1.5, 1e9};

  StreamSpec pre_only;
  pre_only.pre_model = pre;
  pre_only.post_model = post;
  pre_only.nu = kNoChange;
  pre_only.length = 3000;
  pre_only.seed = 21;
  const auto z_pre = score_trajectory(cfg, generate_stream(pre_only));
  // reflected at zero with negative drift: the path hugs zero
  double mean_z = 0.0;
  for (double z : z_pre) mean_z += z;
  mean_z /= static_cast<double>(z_pre.size());
  CHECK(mean_z < 5.0);
  CHECK(*std::min_element(z_pre.begin(), z_pre.end()) >= 0.0);

  StreamSpec post_only = pre_only;
  post_only.nu = 1;
  const auto z_post = score_trajectory(cfg, generate_stream(post_only));
  // least-squares slope over time must be positive, several sigma out
  const double n = static_cast<double>(z_post.size());
  double st = 0.0, szt = 0.0, sz = 0.0;
  for (std::size_t t = 0; t < z_post.size(); ++t) {
    st += static_cast<double>(t);
    sz += z_post[t];
    szt += static_cast<double>(t) * z_post[t];
  }
  const double tbar = st / n;
  double stt = 0.0;
  for (std::size_t t = 0; t < z_post.size(); ++t)
    stt += (static_cast<double>(t) - tbar) * (static_cast<double>(t) - tbar);
  const double slope = (szt - tbar * sz) / stt;
  CHECK(slope > 0.1);  // drift is lambda/9 ~ 0.17 per step

  DetectorConfig bad = cfg;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(score_trajectory(bad, generate_stream(pre_only)), input_error);
}

TEST_CASE("export: header-only file for an empty result, full round trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "rscusum_test_export";
  fs::create_directories(dir);

  SweepResult empty;
  empty.nu = 50;
  empty.stream_length = 100;
  const auto empty_csv = (dir / "empty.csv").string();
  export_results(empty, empty_csv);
  {
    std::ifstream in(empty_csv);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "detector,true_post,gamma,tau,trial,stopping_time,delay,censored");
    CHECK_FALSE(std::getline(in, line));
  }

  SweepConfig cfg;
  cfg.pre = demo_pre();
  cfg.detectors = {{"rscusum", DetectorKind::rscusum, demo_vertex(0.5), 1.5}};
  cfg.gammas = {25.0};
  cfg.posts = {{"p05", demo_vertex(0.5)}};
  cfg.nu = 5;
  cfg.stream_length = 400;
  cfg.trials = 40;
  cfg.base_seed = 31;
  const auto res = edd_vs_arl_sweep(cfg);
  const auto csv = (dir / "rows.csv").string();
  const auto summary = (dir / "summary.json").string();
  const auto gnuplot = (dir / "edd_vs_logarl.dat").string();
  export_results(res, csv, summary, gnuplot);

  auto back = import_results_csv(csv);
  REQUIRE(back.rows.size() == res.rows.size());
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    CHECK(back.rows[i].detector == res.rows[i].detector);
    CHECK(back.rows[i].gamma == res.rows[i].gamma);
    CHECK(back.rows[i].tau == res.rows[i].tau);
    CHECK(back.rows[i].stopping_time == res.rows[i].stopping_time);
    CHECK(back.rows[i].delay == res.rows[i].delay);
    CHECK(back.rows[i].censored == res.rows[i].censored);
    CHECK(back.rows[i].false_alarm == res.rows[i].false_alarm);
  }

  // summary cell count is |detectors| x |gammas| x |posts|
  std::ifstream js(summary);
  const std::string all((std::istreambuf_iterator<char>(js)),
                        std::istreambuf_iterator<char>());
  CHECK(all.find("\"cells\"") != std::string::npos);
  CHECK(summarize(res).size() == 1);

  std::error_code ec;
  fs::remove_all(dir, ec);
}

TEST_CASE("export surfaces io errors with the path") {
  SweepResult empty;
  CHECK_THROWS_AS(export_results(empty, "/nonexistent_dir_zz/x.csv"), io_error);
}
