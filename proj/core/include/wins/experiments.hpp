#pragma once

#include <map>
#include <string>
#include <vector>

#include "wins/attitude.hpp"
#include "wins/config.hpp"
#include "wins/ekf.hpp"
#include "wins/fusion.hpp"
#include "wins/paoa.hpp"
#include "wins/simulator.hpp"

namespace wins {

// ---------------------------------------------------------------------------
// EKF drift-correction comparison
// ---------------------------------------------------------------------------

struct EkfComparisonOptions {
  ScenarioConfig scenario;
  int seeds = 50;
  std::vector<double> aoa_rates_hz = {0.0, 2.0, 20.0};  // 0 = IMU only
  bool capture_trajectories = false;                    // seed 0 only
};

struct EkfTracePoint {
  double t = 0.0;
  Vec3 p_est = Vec3::Zero();
  Vec3 p_true = Vec3::Zero();
};

struct EkfComparisonResult {
  std::vector<std::string> variant_names;
  std::vector<std::vector<double>> terminal_errors_m;  // [variant][seed]
  std::vector<double> medians_m;
  std::vector<std::vector<EkfTracePoint>> trajectories;  // [variant], seed 0
};

EkfComparisonResult run_ekf_comparison(const EkfComparisonOptions& opt);

/// Default scenario for the comparison: 60 s circle, r = 2 m, 0.3 rad/s,
/// 100 Hz IMU with 0.01 noise, AP placed inside the flight volume.
ScenarioConfig ekf_reference_scenario();

// ---------------------------------------------------------------------------
// Observability structure
// ---------------------------------------------------------------------------

struct ObservabilityOptions {
  double duration_s = 10.0;
  double imu_rate_hz = 100.0;
  double aoa_rate_hz = 20.0;
  double perturb_pos_m = 0.01;
  double perturb_angle_rad = 0.5 * M_PI / 180.0;
  double rank_tolerance = 1e-8;
  uint64_t seed = 7;
};

struct ObservabilityResult {
  int rank_true = 0;
  int rank_perturbed = 0;
  int rank_static = 0;
  NullspaceReport at_truth;
  NullspaceReport at_perturbed;
};

ObservabilityResult run_observability_analysis(const ObservabilityOptions& opt);

// ---------------------------------------------------------------------------
// Windowed-search equivalence and speedup
// ---------------------------------------------------------------------------

struct EquivalenceOptions {
  int scenarios = 20;
  int packets_per_scenario = 40;
  double snr_db = 22.0;
  double tau_step_ns = 4.0;
  uint64_t seed0 = 100;
};

struct EquivalenceResult {
  long packets = 0;
  long matches = 0;       // non-fallback packets selecting the full-grid node
  long comparable = 0;    // non-fallback packets
  long fallbacks = 0;
  long windowed_nodes = 0;
  long tau_nodes = 0;
  double windowed_seconds = 0.0;
  double full_seconds = 0.0;
  double match_fraction() const {
    return comparable ? static_cast<double>(matches) / comparable : 0.0;
  }
  double speedup() const {
    return windowed_seconds > 0.0 ? full_seconds / windowed_seconds : 0.0;
  }
};

EquivalenceResult run_windowed_equivalence(const EquivalenceOptions& opt);

// ---------------------------------------------------------------------------
// Attitude drift bench
// ---------------------------------------------------------------------------

struct AttitudeBenchOptions {
  int seeds = 50;
  double duration_s = 25.0;
  double imu_rate_hz = 200.0;
  double frame_rate_hz = 2.0;
  double gyro_bias_z = 0.5 * M_PI / 180.0;  // rad/s
  double aoa_std_deg = 1.0;
  double yaw_amplitude_rad = 0.7;
  double yaw_period_s = 10.0;
  ConstraintOptions constraint_opts;
  uint64_t seed0 = 500;
};

struct AttitudeBenchResult {
  std::vector<double> frame_times;
  std::vector<double> mean_fused_err_deg;  // over seeds, per frame
  std::vector<double> mean_gyro_err_deg;
  double max_mean_fused_deg = 0.0;
  double max_mean_gyro_deg = 0.0;
};

AttitudeBenchResult run_attitude_bench(const AttitudeBenchOptions& opt);

// ---------------------------------------------------------------------------
// Rotary PAoA sweep
// ---------------------------------------------------------------------------

struct RotarySweepOptions {
  std::vector<double> rates_dps = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90};
  double snr_db = 20.0;
  double coherence_phase_std = 1.0;  // rad per rad/s
  double tau_step_ns = 8.0;
  uint64_t seed = 900;
};

struct RotarySweepResult {
  std::vector<double> rates_dps;
  std::vector<double> mean_err_deg;
};

RotarySweepResult run_rotary_sweep(const RotarySweepOptions& opt);

// ---------------------------------------------------------------------------
// Fusion pipeline
// ---------------------------------------------------------------------------

enum class PaoaSource { kGeometric, kCsiPipeline };

struct FusionExperimentOptions {
  ScenarioConfig scenario;
  PaoaSource source = PaoaSource::kGeometric;
  double paoa_sigma_deg = 3.0;
  int window_frames = 30;
  int frame_decimation = 10;
  double lambda_init_m = 1.0;
  bool planar = true;
  bool marginalize = true;
  bool batch = false;  // window covers the whole run, no sliding
  double convergence_period_s = 30.0;
  int attitude_window = 30;
  int attitude_stride = 5;
  ConstraintOptions attitude_opts;
  PaoaConfig paoa;  // CSI-pipeline settings
};

struct FusionRunResult {
  std::vector<double> t;       // one entry per solve
  std::vector<Vec3> p_est;     // newest-frame estimate, first-body frame
  std::vector<Vec3> p_true;
  std::vector<Vec3> ap_trace;
  Vec3 ap_est = Vec3::Zero();
  Vec3 ap_true = Vec3::Zero();
  double rmse_horizontal_m = 0.0;      // over the converged period
  double converged_mean_error_m = 0.0;
  double ap_error_m = 0.0;
  double max_gravity_dev = 0.0;        // | ||g|| - 9.8 | / 9.8, converged
  Vec3 final_pose_est = Vec3::Zero();
  Vec3 final_pose_true = Vec3::Zero();
  double solver_seconds = 0.0;
  long solves = 0;
  long paoa_fallbacks = 0;
  GridEvalCounts grid_counts;
};

FusionRunResult run_fusion_experiment(const FusionExperimentOptions& opt);

/// Default scenario for the fusion experiments: 90 s circle at 0.6 m/s with
/// the AP in the plane of flight.
ScenarioConfig fusion_reference_scenario();

// ---------------------------------------------------------------------------
// Static-angle AoA accuracy sweep
// ---------------------------------------------------------------------------

struct AoaBenchOptions {
  double angle_min_deg = -90.0;
  double angle_max_deg = 90.0;
  double angle_step_deg = 10.0;
  int packets_per_angle = 30;
  double snr_db = 22.0;
  double tau_step_ns = 4.0;
  uint64_t seed = 77;
};

struct AoaBenchRow {
  double angle_deg = 0.0;
  double mean_err_per_packet_deg = 0.0;
  double mean_err_avg10_deg = 0.0;   // 10-packet averaged estimates
  double mean_err_full10_deg = 0.0;  // full-grid 10-packet baseline
  double windowed_ms_per_packet = 0.0;
  double full_ms_per_group = 0.0;
};

struct AoaBenchResult {
  std::vector<AoaBenchRow> rows;
};

AoaBenchResult run_aoa_bench(const AoaBenchOptions& opt);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricsReport {
  std::map<std::string, double> values;
  std::map<std::string, double> timings_ms;  // kept out of the digest
  uint64_t scenario_digest = 0;
};

uint64_t scenario_digest(const ScenarioConfig& sc);
std::string metrics_to_json(const MetricsReport& m);
std::string timings_to_json(const MetricsReport& m);

struct CompareRow {
  std::string key;
  double a = 0.0;
  double b = 0.0;
  double ratio = 0.0;
};

/// Side-by-side metric ratios; throws when the scenario digests differ.
std::vector<CompareRow> compare_metrics(const MetricsReport& a,
                                        const MetricsReport& b);
MetricsReport metrics_from_json_file(const std::string& path);

}  // namespace wins
