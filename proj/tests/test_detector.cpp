#include <doctest.h>

#include <cmath>

#include "rscusum/detector.hpp"
#include "rscusum/divergence.hpp"
#include "rscusum/samplers.hpp"

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

ScoreModelPtr demo_vertex(double eps) {
  return std::make_shared<GaussianModel>(vec2(eps, eps), demo_cov());
}

}  // namespace

TEST_CASE("instantaneous score: zero for identical models, linear in lambda") {
  auto pre = demo_pre();
  DetectorConfig same{DetectorKind::rscusum, pre, pre, 1.0, 1.0};
  Rng rng(3);
  for (int i = 0; i < 5; ++i)
    CHECK(instantaneous_score(same, rng.normal_vector(2)) == 0.0);

  DetectorConfig cfg{DetectorKind::rscusum, pre, demo_vertex(0.5), 1.0, 1.0};
  DetectorConfig doubled = cfg;
  doubled.lambda = 2.0;
  for (int i = 0; i < 5; ++i) {
    const VectorXd x = rng.normal_vector(2);
    CHECK(instantaneous_score(doubled, x) ==
          doctest::Approx(2.0 * instantaneous_score(cfg, x)).epsilon(1e-15));
  }
}

TEST_CASE("instantaneous score at the post-change mean equals 1/9") {
  // shared covariance, so Laplacians cancel and only the quadratic gap stays
  DetectorConfig cfg{DetectorKind::rscusum, demo_pre(), demo_vertex(0.5), 1.0,
                     1.0};
  CHECK(instantaneous_score(cfg, vec2(0.5, 0.5)) ==
        doctest::Approx(1.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("step: reflection, accumulation, threshold crossing") {
  auto pre = demo_pre();
  auto post = demo_vertex(0.5);
  DetectorConfig cfg{DetectorKind::rscusum, pre, post, 1.0, 2.0};

  DetectorState s;
  s.z = 0.0;
  s.n = 10;

  // reflection at zero: feed a point with a strongly negative score
  VectorXd bad = vec2(-20.0, -20.0);
  CHECK(instantaneous_score(cfg, bad) < -5.0);
  DetectorState after = step(s, cfg, bad);
  CHECK(after.z == 0.0);
  CHECK(after.n == 11);
  CHECK_FALSE(after.stopped_at.has_value());

  // accumulate then cross: synthetic state arithmetic
  DetectorState s2;
  s2.z = 1.8;
  s2.n = 5;
  VectorXd good = vec2(5.0, 5.0);  // score well above 0.2
  DetectorState crossed = step(s2, cfg, good);
  CHECK(crossed.z >= cfg.tau);
  CHECK(crossed.stopped_at == 6);

  CHECK_THROWS_AS(step(crossed, cfg, good), usage_error);
}

TEST_CASE("run_detector: tau = 0 stops immediately; empty stream rejected") {
  auto pre = demo_pre();
  DetectorConfig cfg{DetectorKind::rscusum, pre, demo_vertex(0.5), 1.0, 0.0};
  auto stream = sample_gaussian(static_cast<const GaussianModel&>(*pre), 10, 1);
  CHECK(run_detector(cfg, stream) == 1);
  CHECK_THROWS_AS(run_detector(cfg, {}), input_error);
}

TEST_CASE("lambda-scaling equivariance on fixed streams") {
  auto pre = demo_pre();
  auto post = demo_vertex(0.5);
  for (int rep = 0; rep < 50; ++rep) {
    StreamSpec spec;
    spec.pre_model = pre;
    spec.post_model = post;
    spec.nu = 1 + rep % 20;
    spec.length = 400;
    spec.seed = 9000 + static_cast<std::uint64_t>(rep);
    const auto stream = generate_stream(spec);

    DetectorConfig base{DetectorKind::rscusum, pre, post, 1.5, 2.5};
    const auto t_base = run_detector(base, stream);
    for (double c : {0.5, 2.0, 10.0}) {
      DetectorConfig scaled = base;
      scaled.lambda = c * base.lambda;
      scaled.tau = c * base.tau;
      CHECK(run_detector(scaled, stream) == t_base);
    }
  }
}

TEST_CASE("stopping time is non-decreasing in tau on a fixed stream") {
  auto pre = demo_pre();
  auto post = demo_vertex(0.8);
  StreamSpec spec;
  spec.pre_model = pre;
  spec.post_model = post;
  spec.nu = 10;
  spec.length = 2000;
  spec.seed = 4242;
  const auto stream = generate_stream(spec);

  std::int64_t prev = 0;
  for (double tau : {0.5, 1.0, 2.0, 4.0, 6.0}) {
    DetectorConfig cfg{DetectorKind::rscusum, pre, post, 1.5, tau};
    const auto t = run_detector(cfg, stream);
    REQUIRE(t.has_value());
    CHECK(*t >= prev);
    prev = *t;
  }
}

TEST_CASE("threshold_for_arl") {
  CHECK(threshold_for_arl(1.0) == 0.0);
  CHECK(threshold_for_arl(100.0) == doctest::Approx(4.605170185988091));
  CHECK(threshold_for_arl(3000.0) == doctest::Approx(8.006367567650246));
  CHECK_THROWS_AS(threshold_for_arl(0.5), input_error);
}

TEST_CASE("cusum kind requires normalized densities") {
  auto pre = demo_pre();
  auto quartic = std::make_shared<QuarticExpModel>(1.0, 0.0, 2);
  DetectorConfig cfg{DetectorKind::cusum, pre, quartic, 1.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), input_error);

  DetectorConfig ok{DetectorKind::cusum, pre, demo_vertex(0.5), 1.0, 1.0};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("lambda must be positive for score-based kinds") {
  auto pre = demo_pre();
  DetectorConfig cfg{DetectorKind::rscusum, pre, demo_vertex(0.5), 0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), input_error);
}

TEST_CASE("calibrate_lambda finds the analytic root 1.5 for the correlated pair") {
  // For shared-covariance gaussians the key condition has the closed-form
  // root lambda* = (dmu' V^-2 dmu) / (dmu' V^-3 dmu) = 1.5 here.
  auto pre = demo_pre();
  auto post = demo_vertex(0.5);
  const auto pre_samples =
      sample_gaussian(static_cast<const GaussianModel&>(*pre), 200000, 11);
  const auto cal = calibrate_lambda(pre_samples, *pre, *post);
  CHECK(cal.status == "root_found");
  CHECK(std::abs(cal.residual) <= 1e-8);
  CHECK(cal.lambda_star == doctest::Approx(1.5).epsilon(0.08));

  // held-out validation: fresh pre-change sample, E[exp(z)] = 1 within 3 SE
  const auto held_out =
      sample_gaussian(static_cast<const GaussianModel&>(*pre), 10000, 12);
  double mean = 0.0, m2 = 0.0;
  long k = 0;
  for (const auto& x : held_out) {
    const double z = cal.lambda_star * (pre->hyvarinen_score(x) -
                                        post->hyvarinen_score(x));
    const double v = std::exp(z);
    ++k;
    const double d = v - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (v - mean);
  }
  const double se = std::sqrt(m2 / static_cast<double>(k - 1) / static_cast<double>(k));
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("calibrate_lambda degenerate case: identical models") {
  auto pre = demo_pre();
  const auto samples =
      sample_gaussian(static_cast<const GaussianModel&>(*pre), 500, 13);
  const auto cal = calibrate_lambda(samples, *pre, *pre);
  CHECK(cal.status == "no_root_degenerate");
  CHECK(cal.warning);
  CHECK(cal.lambda_star == 64.0);
}

TEST_CASE("calibrate_lambda needs at least 100 samples") {
  auto pre = demo_pre();
  const auto samples =
      sample_gaussian(static_cast<const GaussianModel&>(*pre), 50, 14);
  CHECK_THROWS_AS(calibrate_lambda(samples, *pre, *demo_vertex(0.5)), input_error);
}

TEST_CASE("drift signs under the half-convention identity") {
  // E_inf[z] = -(lambda/2) D_F(Pinf||Q1); E_post[z] >= (lambda/2) D_F(Q1||Pinf)
  auto pre = demo_pre();
  auto q1 = demo_vertex(0.5);
  const double lambda = 1.5;
  DetectorConfig cfg{DetectorKind::rscusum, pre, q1, lambda, 1.0};

  const auto& pre_g = static_cast<const GaussianModel&>(*pre);
  const auto& q1_g = static_cast<const GaussianModel&>(*q1);

  const auto pre_samples = sample_gaussian(pre_g, 100000, 15);
  double mean = 0.0, m2 = 0.0;
  long k = 0;
  for (const auto& x : pre_samples) {
    const double z = instantaneous_score(cfg, x);
    ++k;
    const double d = z - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (z - mean);
  }
  const double se = std::sqrt(m2 / static_cast<double>(k - 1) / static_cast<double>(k));
  const double expected = -0.5 * lambda * fisher_divergence_gaussian(pre_g, q1_g);
  CHECK(mean < 0.0);
  CHECK(std::abs(mean - expected) <= 3.0 * se);

  const double floor = 0.5 * lambda * fisher_divergence_gaussian(q1_g, pre_g);
  for (double eps : {0.5, 0.6, 0.8, 1.0}) {
    auto truth = demo_vertex(eps);
    const auto samples =
        sample_gaussian(static_cast<const GaussianModel&>(*truth), 100000,
                        16 + static_cast<std::uint64_t>(eps * 10));
    double pm = 0.0, pm2 = 0.0;
    long pk = 0;
    for (const auto& x : samples) {
      const double z = instantaneous_score(cfg, x);
      ++pk;
      const double d = z - pm;
      pm += d / static_cast<double>(pk);
      pm2 += d * (z - pm);
    }
    const double pse =
        std::sqrt(pm2 / static_cast<double>(pk - 1) / static_cast<double>(pk));
    CHECK(pm > 0.0);
    CHECK(pm >= floor - 3.0 * pse);
  }
}
