#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rscusum/detector.hpp"
#include "rscusum/samplers.hpp"

namespace rscusum {

/// One detector entry in a sweep, identified by name in the output rows.
/// tau is assigned per-gamma by the threshold rule, so it is absent here.
struct DetectorSpec {
  std::string name;
  DetectorKind kind = DetectorKind::rscusum;
  ScoreModelPtr post_or_lfd;
  double lambda = 1.0;
};

/// How thresholds are matched to target ARLs: the analytic tau = log(gamma)
/// rule, or Monte Carlo calibration of tau until the no-change mean stopping
/// time hits gamma.
enum class ThresholdRule { analytic, calibrated };

struct SweepConfig {
  ScoreModelPtr pre;
  std::vector<DetectorSpec> detectors;
  std::vector<double> gammas;
  struct PostTruth {
    std::string id;
    ScoreModelPtr model;
  };
  std::vector<PostTruth> posts;
  std::int64_t nu = 50;
  std::int64_t stream_length = 10000;
  int trials = 1000;
  std::uint64_t base_seed = 1;
  ThresholdRule threshold_rule = ThresholdRule::analytic;
  int calibration_trials = 2000;  // ThresholdRule::calibrated only
  SampleOptions sampling;
  int n_jobs = 0;  // 0: all cores; 1: serial reference path
};

struct SweepRow {
  std::string detector;
  std::string true_post;
  double gamma = 0.0;
  double tau = 0.0;
  int trial = 0;
  std::optional<std::int64_t> stopping_time;
  std::optional<std::int64_t> delay;  // stopping_time - nu + 1 when >= nu
  bool censored = false;              // never crossed within the stream
  bool false_alarm = false;           // stopped before nu
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::int64_t nu = 0;
  std::int64_t stream_length = 0;
};

struct ArlEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int censored_count = 0;
  int trials = 0;
};

struct EddEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int false_alarm_count = 0;
  int trials = 0;
};

/// Mean stopping time over no-change streams; censored runs count at max_len
/// (a downward-biased, conservative ARL).
ArlEstimate estimate_arl(const DetectorConfig& cfg, const ScoreModel& pre,
                         int trials, std::int64_t max_len, std::uint64_t base_seed,
                         const SampleOptions& opt = {}, int n_jobs = 0);

/// Mean detection delay (stopping_time - nu + 1) over trials that survive to
/// the change point; earlier stops are false alarms, counted and excluded.
/// Throws estimation_error when every trial false-alarms.
EddEstimate estimate_edd(const DetectorConfig& cfg, const ScoreModel& pre,
                         const ScoreModel& post_truth, std::int64_t nu, int trials,
                         std::int64_t stream_length, std::uint64_t base_seed,
                         const SampleOptions& opt = {}, int n_jobs = 0);

/// Smallest tau whose Monte Carlo ARL estimate meets the target, located by
/// bisection on log-ARL over `trials` no-change streams per probe.
double calibrate_threshold(const DetectorSpec& det, const ScoreModel& pre,
                           double target_arl, int trials, std::int64_t max_len,
                           std::uint64_t seed, const SampleOptions& opt = {},
                           int n_jobs = 0);

/// Full cross product (detector x gamma x post x trial). Row seeds derive
/// from (base_seed, row index), so output is identical for any n_jobs.
SweepResult edd_vs_arl_sweep(const SweepConfig& cfg);

/// Z(n) trace over a full stream, for plots and drift diagnostics.
std::vector<double> score_trajectory(const DetectorConfig& cfg,
                                     const std::vector<Eigen::VectorXd>& stream);

/// Per-(detector, gamma, post) aggregate of a sweep.
struct SweepCellSummary {
  std::string detector;
  std::string true_post;
  double gamma = 0.0;
  double tau = 0.0;
  int trials = 0;
  double edd_mean = 0.0;
  double edd_std_error = 0.0;
  int false_alarms = 0;
  int censored = 0;
  double arl_mean = 0.0;  // meaningful only for no-change sweeps
  double arl_std_error = 0.0;
};

std::vector<SweepCellSummary> summarize(const SweepResult& result);

/// CSV with header detector,true_post,gamma,tau,trial,stopping_time,delay,censored
/// (floats at 17 significant digits), a JSON summary next to it, and a
/// gnuplot-ready EDD-vs-log(ARL) table.
void export_results(const SweepResult& result, const std::string& csv_path,
                    const std::string& summary_json_path = "",
                    const std::string& gnuplot_path = "");

/// Re-parse of the exported CSV, used by round-trip checks and the CLI.
SweepResult import_results_csv(const std::string& csv_path);

}  // namespace rscusum
