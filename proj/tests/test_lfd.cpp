#include <doctest.h>

#include <cmath>

#include "rscusum/lfd.hpp"
#include "rscusum/rng.hpp"

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

std::vector<ScoreModelPtr> mvn_basis() {
  std::vector<ScoreModelPtr> basis;
  for (double e : {0.5, 0.6, 0.8, 1.0})
    basis.push_back(std::make_shared<GaussianModel>(vec2(e, e), demo_cov()));
  return basis;
}

}  // namespace

TEST_CASE("gaussian closed form picks the V-norm-closest mean") {
  GaussianModel pre(vec2(0, 0), demo_cov());
  std::vector<VectorXd> cands = {vec2(0.5, 0.5), vec2(0.6, 0.6), vec2(0.8, 0.8),
                                 vec2(1.0, 1.0)};
  const auto res = lfd_gaussian_location(pre, cands, demo_cov());
  CHECK(res.mode == "closed_form");
  CHECK(res.selected_index == 0);
  CHECK(res.weights[0] == 1.0);
  CHECK(res.divergence_to_pre.value == doctest::Approx(2.0 / 9.0).epsilon(1e-12));

  // single candidate
  const auto one = lfd_gaussian_location(pre, {vec2(0.7, 0.1)}, demo_cov());
  CHECK(one.selected_index == 0);

  // exact tie breaks to the lowest index
  const auto tie =
      lfd_gaussian_location(pre, {vec2(0.5, 0.5), vec2(-0.5, -0.5)}, demo_cov());
  CHECK(tie.selected_index == 0);

  CHECK_THROWS_AS(lfd_gaussian_location(pre, {}, demo_cov()), input_error);
}

TEST_CASE("closed form is not fooled by an anisotropic V-norm") {
  // with strong correlation the V-norm ordering differs from euclidean
  MatrixXd V(2, 2);
  V << 1.0, 0.9, 0.9, 1.0;
  GaussianModel pre(vec2(0, 0), V);
  // candidate A is euclidean-closer; candidate B wins under || V^-1 . ||
  const VectorXd a = vec2(0.55, 0.55) * 0.9;   // along the soft direction
  const VectorXd b = vec2(0.9, 0.9);
  const GaussianModel ga(a, V), gb(b, V);
  const double da = fisher_divergence_gaussian(ga, pre);
  const double db = fisher_divergence_gaussian(gb, pre);
  const auto res = lfd_gaussian_location(pre, {a, b}, V);
  CHECK(res.selected_index == (da <= db ? 0 : 1));
}

TEST_CASE("basis scan selects vertex 1 of the location class") {
  UncertaintyClass cls(mvn_basis(), "mvn_m");
  GaussianModel pre(vec2(0, 0), demo_cov());
  const auto res = lfd_basis_scan(cls, pre, 10000, 3);
  CHECK(res.mode == "basis_scan");
  CHECK(res.selected_index == 0);
  CHECK_FALSE(res.ambiguous);
  CHECK_FALSE(res.class_warning);
  CHECK(res.per_vertex_divergence.size() == 4);
  // exact values 8 eps^2 / 9
  for (std::size_t j = 0; j < 4; ++j) {
    const double eps = std::vector<double>{0.5, 0.6, 0.8, 1.0}[j];
    // equal covariances make the integrand constant, so the MC noise floor
    // is pure float rounding
    CHECK(std::abs(res.per_vertex_divergence[j].value - 8.0 * eps * eps / 9.0) <=
          4.0 * res.per_vertex_divergence[j].std_error + 1e-12);
  }
  CHECK(res.lfd_model == cls.basis[0]);
}

TEST_CASE("basis scan: m = 1 and ambiguity flag") {
  GaussianModel pre(vec2(0, 0), demo_cov());
  UncertaintyClass one({mvn_basis()[0]}, "singleton");
  const auto res = lfd_basis_scan(one, pre, 2000, 5);
  CHECK(res.selected_index == 0);
  CHECK_FALSE(res.ambiguous);

  // duplicate vertices cannot be separated: ambiguous, lowest index wins
  UncertaintyClass dup({mvn_basis()[0], mvn_basis()[0]}, "dup");
  const auto amb = lfd_basis_scan(dup, pre, 2000, 7);
  CHECK(amb.ambiguous);
  CHECK(amb.selected_index == 0);
}

TEST_CASE("basis scan warns when the pre law sits in the class") {
  auto basis = mvn_basis();
  basis[2] = std::make_shared<GaussianModel>(vec2(0, 0), demo_cov());
  UncertaintyClass cls(basis, "contains pre");
  GaussianModel pre(vec2(0, 0), demo_cov());
  const auto res = lfd_basis_scan(cls, pre, 2000, 9);
  CHECK(res.class_warning);
  CHECK(res.selected_index == 2);  // zero divergence wins, flagged
}

TEST_CASE("simplex optimizer: m = 1 gives weight one and the divergence") {
  GaussianModel pre(vec2(0, 0), demo_cov());
  UncertaintyClass one({mvn_basis()[0]}, "singleton");
  SimplexConfig cfg;
  cfg.max_epochs = 30;
  cfg.n_samples = 4000;
  cfg.seed = 11;
  const auto res = lfd_simplex_optimize(one, pre, cfg);
  CHECK(res.weights[0] == doctest::Approx(1.0));
  CHECK(std::abs(res.final_loss - 2.0 / 9.0) < 0.05);
}

TEST_CASE("simplex optimizer concentrates on the closer of two means") {
  GaussianModel pre(vec2(0, 0), demo_cov());
  // both means on one side of the pre-change mean; with the pre-change mean
  // between them the constant field can reproduce the pre-change score
  // exactly at interior weights and nothing concentrates
  std::vector<ScoreModelPtr> basis = {
      std::make_shared<GaussianModel>(vec2(1.2, 1.2), demo_cov()),
      std::make_shared<GaussianModel>(vec2(0.4, 0.4), demo_cov()),
  };
  UncertaintyClass cls(basis, "asymmetric pair");
  SimplexConfig cfg;
  cfg.seed = 13;
  const auto res = lfd_simplex_optimize(cls, pre, cfg);
  CHECK(res.weights[1] > 0.99);
  CHECK(res.selected_index == 1);

  const auto closed = lfd_gaussian_location(pre, {vec2(1.2, 1.2), vec2(0.4, 0.4)},
                                            demo_cov());
  CHECK(closed.selected_index == 1);
}

TEST_CASE("simplex optimizer on the location class matches the scan") {
  GaussianModel pre(vec2(0, 0), demo_cov());
  UncertaintyClass cls(mvn_basis(), "mvn_m");
  SimplexConfig cfg;
  cfg.seed = 17;
  const auto res = lfd_simplex_optimize(cls, pre, cfg);
  CHECK(res.weights[0] >= 0.99);
  // best-so-far loss trace is non-increasing by construction
  for (std::size_t i = 1; i < res.best_loss_history.size(); ++i)
    CHECK(res.best_loss_history[i] <= res.best_loss_history[i - 1]);
}

TEST_CASE("network mode on a small class concentrates and reports averages") {
  GaussianModel pre(vec2(0, 0), demo_cov());
  UncertaintyClass cls(mvn_basis(), "mvn_m");
  TrainConfig cfg;
  cfg.n_train = 800;
  cfg.epochs = 250;
  cfg.n_test = 2000;
  cfg.adam.lr = 2e-2;
  cfg.mala_step_size = 0.6;
  cfg.seed = 19;
  BetaNetwork net(2, 4, 21, {32, 16});
  const auto res = lfd_network_train(cls, pre, net, cfg);
  CHECK(res.mode == "network");
  CHECK(res.beta_averages.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.beta_averages[0] > 0.9);
  CHECK(res.selected_index == 0);
  CHECK(res.network != nullptr);
  for (std::size_t i = 1; i < res.best_loss_history.size(); ++i)
    CHECK(res.best_loss_history[i] <= res.best_loss_history[i - 1]);
}

TEST_CASE("constant-weight loss dominates the trained field loss") {
  // the class of fields contains the constants, so the best constant cannot
  // beat the best field by more than noise
  GaussianModel pre(vec2(0, 0), demo_cov());
  UncertaintyClass cls(mvn_basis(), "mvn_m");

  SimplexConfig scfg;
  scfg.seed = 23;
  const auto cres = lfd_simplex_optimize(cls, pre, scfg);

  TrainConfig tcfg;
  tcfg.n_train = 800;
  tcfg.epochs = 250;
  tcfg.n_test = 2000;
  tcfg.adam.lr = 2e-2;
  tcfg.mala_step_size = 0.6;
  tcfg.seed = 23;
  BetaNetwork net(2, 4, 29, {32, 16});
  const auto nres = lfd_network_train(cls, pre, net, tcfg);

  // common evaluation sample from the selected vertex
  const auto& q1 = static_cast<const GaussianModel&>(*cls.basis[0]);
  const auto samples = sample_gaussian(q1, 4000, 31);
  const Eigen::VectorXd w = cres.weights;
  const auto const_loss =
      field_loss(cls, pre, samples, [&](const VectorXd&) { return w; });
  const auto net_loss = field_loss(cls, pre, samples, [&](const VectorXd& x) {
    return nres.network->beta_at(x);
  });
  const double comb_se = std::sqrt(const_loss.std_error * const_loss.std_error +
                                   net_loss.std_error * net_loss.std_error);
  CHECK(const_loss.value >= net_loss.value - 3.0 * comb_se);
}

TEST_CASE("detection model selection honors the dominance threshold") {
  UncertaintyClass cls(mvn_basis(), "mvn_m");
  LfdResult res;
  res.weights = vec2(0.995, 0.005);
  Eigen::VectorXd w4(4);
  w4 << 0.995, 0.005, 0.0, 0.0;
  res.weights = w4;
  CHECK(select_detection_model(res, cls) == cls.basis[0]);

  w4 << 0.6, 0.4, 0.0, 0.0;
  res.weights = w4;
  const auto mix = select_detection_model(res, cls);
  CHECK(mix->kind() == "mixture");
  CHECK(std::dynamic_pointer_cast<const MixtureModel>(mix)->weights()[0] ==
        doctest::Approx(0.6));
}

TEST_CASE("uncertainty class validation") {
  CHECK_THROWS_AS(UncertaintyClass({}, "empty"), input_error);
  auto g2 = std::make_shared<GaussianModel>(vec2(0, 0), demo_cov());
  auto g1 = std::make_shared<GaussianModel>(VectorXd::Zero(1),
                                            MatrixXd::Identity(1, 1));
  CHECK_THROWS_AS(UncertaintyClass({g2, g1}, "mixed dims"), input_error);
}
