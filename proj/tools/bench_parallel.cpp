// Times the sweep engine on its serial reference path against the
// OpenMP-parallel path and verifies the outputs match row for row.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rscusum/harness.hpp"

using namespace rscusum;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

SweepConfig make_config(int trials) {
  MatrixXd V(2, 2);
  V << 1.0, 0.5, 0.5, 1.0;
  VectorXd mu0 = VectorXd::Zero(2);
  auto pre = std::make_shared<GaussianModel>(mu0, V);
  auto vertex = [&](double e) {
    VectorXd m(2);
    m << e, e;
    return std::make_shared<GaussianModel>(m, V);
  };

  SweepConfig cfg;
  cfg.pre = pre;
  cfg.detectors = {{"rscusum", DetectorKind::rscusum, vertex(0.5), 1.5},
                   {"rcusum", DetectorKind::cusum, vertex(0.5), 1.0}};
  cfg.gammas = {100, 400, 1500};
  cfg.posts = {{"p05", vertex(0.5)}, {"p08", vertex(0.8)}};
  cfg.nu = 50;
  cfg.stream_length = 10000;
  cfg.trials = trials;
  cfg.base_seed = 99;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  const int trials = argc > 1 ? std::atoi(argv[1]) : 400;

  SweepConfig serial = make_config(trials);
  serial.n_jobs = 1;
  SweepConfig parallel = make_config(trials);
  parallel.n_jobs = 0;

  double t0 = now_s();
  const auto a = edd_vs_arl_sweep(serial);
  const double t_serial = now_s() - t0;

  t0 = now_s();
  const auto b = edd_vs_arl_sweep(parallel);
  const double t_parallel = now_s() - t0;

  bool identical = a.rows.size() == b.rows.size();
  for (std::size_t i = 0; identical && i < a.rows.size(); ++i)
    identical = a.rows[i].stopping_time == b.rows[i].stopping_time &&
                a.rows[i].delay == b.rows[i].delay &&
                a.rows[i].tau == b.rows[i].tau;

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("rows: %zu\n", a.rows.size());
  std::printf("serial reference: %.2f s\n", t_serial);
  std::printf("openmp (%d threads): %.2f s (speedup x%.2f)\n", threads,
              t_parallel, t_serial / t_parallel);
  std::printf("outputs identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
