#include "wins/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wins/csv.hpp"
#include "wins/preintegration.hpp"

namespace wins {

namespace {

constexpr double kDegPerRad = 180.0 / M_PI;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double wrap_deg(double a) {
  while (a > 180.0) a -= 360.0;
  while (a < -180.0) a += 360.0;
  return a;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Vec3 bearing_vec(double theta_deg) {
  const double th = theta_deg / kDegPerRad;
  return Vec3(std::sin(th), std::cos(th), 0.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// EKF comparison
// ---------------------------------------------------------------------------

ScenarioConfig ekf_reference_scenario() {
  ScenarioConfig sc;
  sc.trajectory.shape = TrajectoryShape::kCircle;
  sc.trajectory.radius_m = 2.0;
  sc.trajectory.angular_rate = 0.3;
  sc.trajectory.height_m = 1.5;
  sc.trajectory.duration_s = 60.0;
  sc.trajectory.yaw_mode = YawMode::kTangent;
  sc.trajectory.attitude_mode = AttitudeMode::kThrustAligned;
  sc.noise.accel_std = 0.01;
  sc.noise.gyro_std = 0.01;
  sc.noise.aoa_std_deg = 1.0;
  sc.ap_position = Vec3(3.0, 0.5, 1.5);
  sc.imu_rate_hz = 100.0;
  sc.csi_rate_hz = 20.0;
  sc.with_csi = false;
  return sc;
}

EkfComparisonResult run_ekf_comparison(const EkfComparisonOptions& opt) {
  EkfComparisonResult res;
  for (double rate : opt.aoa_rates_hz) {
    res.variant_names.push_back(
        rate <= 0.0 ? "imu_only" : "fusion_" + std::to_string(int(rate)) + "hz");
  }
  res.terminal_errors_m.assign(opt.aoa_rates_hz.size(), {});

  for (int seed = 0; seed < opt.seeds; ++seed) {
    ScenarioConfig sc = opt.scenario;
    sc.noise.seed = opt.scenario.noise.seed + seed;
    sc.with_csi = false;
    const auto truth = generate_trajectory(sc.trajectory, sc.imu_rate_hz);
    const auto imu = synthesize_imu(truth, sc.noise, sc.imu_rate_hz);

    std::mt19937_64 aoa_rng(sc.noise.seed ^ 0xA0A0ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (size_t v = 0; v < opt.aoa_rates_hz.size(); ++v) {
      const double rate = opt.aoa_rates_hz[v];
      EkfConfig cfg;
      cfg.accel_std = sc.noise.accel_std;
      cfg.gyro_std = sc.noise.gyro_std;
      cfg.sigma_theta_rad = sc.noise.aoa_std_deg / kDegPerRad;

      EkfState x0;
      x0.r_bw = truth[0].rot;
      x0.v = truth[0].v;
      x0.p = truth[0].p;
      x0.c = sc.ap_position;
      Vec12 p0;
      p0 << 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 0.09, 0.09,
          0.09;
      AoaEkf ekf(cfg, x0, p0);

      const long stride =
          rate > 0.0 ? std::lround(sc.imu_rate_hz / rate) : 0;
      std::mt19937_64 rng(sc.noise.seed ^ (0xBEEFULL + v));
      const bool trace = opt.capture_trajectories && seed == 0;
      if (trace && res.trajectories.size() <= v) {
        res.trajectories.resize(opt.aoa_rates_hz.size());
      }
      for (size_t k = 0; k < imu.size(); ++k) {
        ekf.propagate(imu[k]);
        if (stride > 0 && k % stride == 0 && k > 0) {
          const double theta =
              bearing_azimuth(truth[k].p, truth[k].rot, sc.ap_position) +
              cfg.sigma_theta_rad * gauss(rng);
          ekf.update_azimuth(theta);
        }
        if (trace && k % 20 == 0) {
          res.trajectories[v].push_back(
              {imu[k].t, ekf.state().p, truth[k].p});
        }
      }
      res.terminal_errors_m[v].push_back(
          (ekf.state().p - truth.back().p).norm());
    }
  }
  for (const auto& errs : res.terminal_errors_m) {
    res.medians_m.push_back(median(errs));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Observability
// ---------------------------------------------------------------------------

ObservabilityResult run_observability_analysis(
    const ObservabilityOptions& opt) {
  ScenarioConfig sc = ekf_reference_scenario();
  sc.trajectory.duration_s = opt.duration_s;
  sc.imu_rate_hz = opt.imu_rate_hz;
  sc.noise.accel_std = 0.0;
  sc.noise.gyro_std = 0.0;
  const auto truth = generate_trajectory(sc.trajectory, sc.imu_rate_hz);
  const auto imu = synthesize_imu(truth, sc.noise, sc.imu_rate_hz);

  EkfState x0;
  x0.r_bw = truth[0].rot;
  x0.v = truth[0].v;
  x0.p = truth[0].p;
  x0.c = sc.ap_position;

  const auto pts = noiseless_linearization(x0, imu, opt.aoa_rate_hz);
  const auto o_true = build_observability(pts);

  const auto pts_hat = perturb_linearization(pts, opt.perturb_pos_m,
                                             opt.perturb_angle_rad, opt.seed);
  const auto o_hat = build_observability(pts_hat);

  ObservabilityResult res;
  res.rank_true = numerical_rank(o_true, opt.rank_tolerance);
  res.rank_perturbed = numerical_rank(o_hat, opt.rank_tolerance);
  res.at_truth = verify_nullspace(o_true, pts.front().x);
  res.at_perturbed = verify_nullspace(o_hat, pts_hat.front().x);

  // zero-motion degenerate case
  ScenarioConfig stat = sc;
  stat.trajectory.shape = TrajectoryShape::kLine;
  stat.trajectory.line_speed = 0.0;
  stat.trajectory.yaw_mode = YawMode::kFixed;
  stat.trajectory.attitude_mode = AttitudeMode::kLevel;
  const auto truth_s = generate_trajectory(stat.trajectory, stat.imu_rate_hz);
  const auto imu_s = synthesize_imu(truth_s, stat.noise, stat.imu_rate_hz);
  EkfState xs = x0;
  xs.r_bw = truth_s[0].rot;
  xs.v = truth_s[0].v;
  xs.p = truth_s[0].p;
  const auto pts_s = noiseless_linearization(xs, imu_s, opt.aoa_rate_hz);
  res.rank_static = numerical_rank(build_observability(pts_s),
                                   opt.rank_tolerance);
  return res;
}

// ---------------------------------------------------------------------------
// Windowed equivalence
// ---------------------------------------------------------------------------

EquivalenceResult run_windowed_equivalence(const EquivalenceOptions& opt) {
  EquivalenceResult res;
  for (int s = 0; s < opt.scenarios; ++s) {
    ScenarioConfig sc;
    sc.trajectory.shape = TrajectoryShape::kLine;
    sc.trajectory.line_speed = 0.3;
    sc.trajectory.line_heading = 1.2;
    sc.trajectory.height_m = 1.5;
    sc.trajectory.yaw_mode = YawMode::kSpin;
    sc.trajectory.angular_rate = 0.4 + 0.02 * s;
    sc.trajectory.yaw0_rad = -0.2 - 0.01 * s;
    sc.trajectory.attitude_mode = AttitudeMode::kLevel;
    sc.trajectory.duration_s =
        (opt.packets_per_scenario + 12) / 50.0;
    sc.ap_position = Vec3(1.5, 3.0, 1.5);
    sc.noise.csi_snr_db = opt.snr_db;
    sc.noise.seed = opt.seed0 + s;
    sc.imu_rate_hz = 200.0;
    sc.csi_rate_hz = 50.0;
    const ScenarioBundle b = run_scenario(sc);

    PaoaConfig pc;
    pc.tau_step_ns = opt.tau_step_ns;
    pc.n_paths = 1;  // single modeled path in this scenario
    PaoaEstimator est(pc);

    const auto tau_axis =
        default_tau_axis(sc.array.subcarrier_spacing_hz, opt.tau_step_ns);
    res.tau_nodes = tau_axis.size();

    size_t imu_idx = 0;
    for (size_t i = 0; i < b.csi.size(); ++i) {
      while (imu_idx < b.imu.size() && b.imu[imu_idx].t <= b.csi[i].t + 1e-9) {
        est.push_imu(b.imu[imu_idx++]);
      }
      const auto paoa = est.push_csi(b.csi[i]);
      if (!paoa) continue;
      if (est.eval_counts().packets == 0) continue;  // init packet

      // independent full-grid selection on the same snapshot
      const auto t0 = std::chrono::steady_clock::now();
      const auto smoothed = spatial_smooth(b.csi[i], pc.sub_antennas,
                                           pc.sub_carriers);
      const auto proj = noise_projector(smoothed, pc.n_paths);
      const auto grid = evaluate_spectrum(
          proj, smoothed, full_theta_axis(pc.theta_step_deg), tau_axis);
      const auto peaks = find_peaks(grid);
      res.full_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      if (peaks.empty()) continue;
      const AoaEstimate full_sel = select_direct_path(peaks);

      res.packets += 1;
      if (paoa->fallback) continue;
      res.comparable += 1;
      if (std::abs(paoa->source.theta_deg - full_sel.theta_deg) < 1e-9 &&
          std::abs(paoa->source.tof_ns - full_sel.tof_ns) < 1e-9) {
        res.matches += 1;
      }
    }
    res.fallbacks += est.eval_counts().fallback_packets;
    res.windowed_nodes += est.eval_counts().windowed;
    res.windowed_seconds += est.spectrum_seconds();
  }
  return res;
}

// ---------------------------------------------------------------------------
// Attitude bench
// ---------------------------------------------------------------------------

AttitudeBenchResult run_attitude_bench(const AttitudeBenchOptions& opt) {
  AttitudeBenchResult res;
  const int n_frames =
      static_cast<int>(opt.duration_s * opt.frame_rate_hz) + 1;
  std::vector<double> frame_times(n_frames);
  for (int k = 0; k < n_frames; ++k) frame_times[k] = k / opt.frame_rate_hz;
  res.frame_times = frame_times;
  std::vector<double> sum_fused(n_frames, 0.0), sum_gyro(n_frames, 0.0);

  for (int seed = 0; seed < opt.seeds; ++seed) {
    ScenarioConfig sc;
    sc.trajectory.shape = TrajectoryShape::kLine;
    sc.trajectory.line_speed = 0.0;
    sc.trajectory.height_m = 1.0;
    sc.trajectory.duration_s = opt.duration_s;
    sc.trajectory.yaw_mode = YawMode::kOscillate;
    sc.trajectory.yaw_amplitude_rad = opt.yaw_amplitude_rad;
    sc.trajectory.yaw_period_s = opt.yaw_period_s;
    sc.trajectory.attitude_mode = AttitudeMode::kLevel;
    sc.noise.gyro_bias = Vec3(0.0, 0.0, opt.gyro_bias_z);
    sc.noise.seed = opt.seed0 + seed;
    sc.imu_rate_hz = opt.imu_rate_hz;
    sc.ap_position = Vec3(0.0, 3.0, 1.0);  // boresight at zero yaw

    const auto truth = generate_trajectory(sc.trajectory, sc.imu_rate_hz);
    const auto imu = synthesize_imu(truth, sc.noise, sc.imu_rate_hz);

    std::mt19937_64 rng(sc.noise.seed ^ 0xA77ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const long stride = std::lround(sc.imu_rate_hz / opt.frame_rate_hz);
    std::vector<double> theta_meas(n_frames);
    std::vector<Rotation> rot_true(n_frames);
    for (int k = 0; k < n_frames; ++k) {
      const auto& s = truth[k * stride];
      theta_meas[k] =
          bearing_azimuth(s.p, s.rot, sc.ap_position) * kDegPerRad +
          opt.aoa_std_deg * gauss(rng);
      rot_true[k] = s.rot;
    }

    std::vector<AoaYawIncrement> increments;
    for (int k = 0; k + 1 < n_frames; ++k) {
      // static scenario: no translation component to remove
      increments.push_back(
          {k, k + 1, (theta_meas[k + 1] - theta_meas[k]) / kDegPerRad});
    }
    const auto constraints = build_constraints(imu, frame_times, increments,
                                               opt.constraint_opts);
    const auto fused = solve_rotations(constraints, n_frames);

    // gyro-only chaining on the same stream
    std::vector<RelativeRotationConstraint> gyro_only;
    for (const auto& c : constraints) {
      if (c.weight == opt.constraint_opts.gyro_weight && c.j == c.i + 1) {
        gyro_only.push_back(c);
      }
    }
    Rotation chain;
    for (int k = 0; k < n_frames; ++k) {
      const Rotation rel_true(
          rot_true[0].matrix().transpose() * rot_true[k].matrix(),
          Rotation::unchecked{});
      const double fused_err =
          wrap_deg((fused.rot[k].inverse() * rel_true).yaw() * kDegPerRad);
      if (k > 0) chain = chain * gyro_only[k - 1].rel;
      const double gyro_err =
          wrap_deg((chain.inverse() * rel_true).yaw() * kDegPerRad);
      sum_fused[k] += fused_err;
      sum_gyro[k] += gyro_err;
    }
  }

  res.mean_fused_err_deg.resize(n_frames);
  res.mean_gyro_err_deg.resize(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    res.mean_fused_err_deg[k] = sum_fused[k] / opt.seeds;
    res.mean_gyro_err_deg[k] = sum_gyro[k] / opt.seeds;
    res.max_mean_fused_deg =
        std::max(res.max_mean_fused_deg, std::abs(res.mean_fused_err_deg[k]));
    res.max_mean_gyro_deg =
        std::max(res.max_mean_gyro_deg, std::abs(res.mean_gyro_err_deg[k]));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Rotary sweep
// ---------------------------------------------------------------------------

RotarySweepResult run_rotary_sweep(const RotarySweepOptions& opt) {
  RotarySweepResult res;
  for (double rate_dps : opt.rates_dps) {
    ScenarioConfig sc;
    sc.trajectory.shape = TrajectoryShape::kLine;
    sc.trajectory.line_speed = 0.0;
    sc.trajectory.height_m = 1.0;
    sc.trajectory.yaw_mode = YawMode::kSpin;
    sc.trajectory.angular_rate = rate_dps / kDegPerRad;
    sc.trajectory.yaw0_rad = -1.0;  // sweep from -57 deg
    sc.trajectory.attitude_mode = AttitudeMode::kLevel;
    sc.trajectory.duration_s =
        rate_dps > 1.0 ? std::min(2.0, 110.0 / rate_dps) : 2.0;
    sc.ap_position = Vec3(0.0, 3.0, 1.0);
    sc.noise.csi_snr_db = opt.snr_db;
    sc.noise.coherence_phase_std = opt.coherence_phase_std;
    sc.noise.seed = opt.seed ^ std::llround(rate_dps * 1000.0);
    sc.imu_rate_hz = 200.0;
    sc.csi_rate_hz = 50.0;
    const ScenarioBundle b = run_scenario(sc);

    PaoaConfig pc;
    pc.tau_step_ns = opt.tau_step_ns;
    pc.n_paths = 1;
    const PaoaStreamResult stream = estimate_paoa_stream(b.csi, b.imu, pc);

    double err_sum = 0.0;
    long n = 0;
    for (const auto& p : stream.paoas) {
      // match the truth row by time
      const size_t idx = static_cast<size_t>(
          std::llround(p.t * sc.csi_rate_hz));
      if (idx >= b.aoa_truth.size()) continue;
      err_sum += std::abs(wrap_deg(p.theta0_deg - b.aoa_truth[idx].theta0_deg));
      ++n;
    }
    res.rates_dps.push_back(rate_dps);
    res.mean_err_deg.push_back(n ? err_sum / n : 0.0);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Fusion experiment
// ---------------------------------------------------------------------------

ScenarioConfig fusion_reference_scenario() {
  ScenarioConfig sc;
  sc.trajectory.shape = TrajectoryShape::kCircle;
  sc.trajectory.radius_m = 2.0;
  sc.trajectory.angular_rate = 0.3;
  sc.trajectory.height_m = 1.5;
  sc.trajectory.duration_s = 90.0;
  sc.trajectory.yaw_mode = YawMode::kTangent;
  sc.trajectory.attitude_mode = AttitudeMode::kThrustAligned;
  sc.noise.accel_std = 0.01;
  sc.noise.gyro_std = 0.01;
  sc.ap_position = Vec3(4.0, 0.0, 1.5);
  sc.imu_rate_hz = 200.0;
  sc.csi_rate_hz = 50.0;
  return sc;
}

namespace {

std::span<const ImuSample> slice_by_time(const std::vector<ImuSample>& imu,
                                         double t0, double t1) {
  size_t lo = 0;
  while (lo + 1 < imu.size() && imu[lo + 1].t <= t0 + 1e-9) ++lo;
  size_t hi = lo;
  while (hi + 1 < imu.size() && imu[hi + 1].t <= t1 + 1e-9) ++hi;
  return std::span<const ImuSample>(imu.data() + lo, hi - lo + 1);
}

}  // namespace

FusionRunResult run_fusion_experiment(const FusionExperimentOptions& opt) {
  ScenarioConfig sc = opt.scenario;
  sc.with_csi = opt.source == PaoaSource::kCsiPipeline;
  const ScenarioBundle b = run_scenario(sc);
  const size_t n_pkts = b.truth_at_csi.size();
  FusionRunResult out;

  // anchor = body frame at the first PAoA (after pipeline initialization)
  const size_t first_pkt =
      opt.source == PaoaSource::kCsiPipeline ? opt.paoa.init_packets - 1 : 0;
  const Rotation r0 = b.truth_at_csi[first_pkt].rot;
  const Vec3 p0 = b.truth_at_csi[first_pkt].p;
  auto to_anchor = [&](const Vec3& w) {
    return Vec3(r0.matrix().transpose() * (w - p0));
  };
  out.ap_true = to_anchor(sc.ap_position);

  FusionConfig fc;
  fc.window_frames = opt.batch ? static_cast<int>(n_pkts) : opt.window_frames;
  fc.planar = opt.planar;
  fc.planar_frame_z = 0.0;
  fc.planar_ap_z = out.ap_true.z();  // the AP height is surveyed, not solved
  fc.lambda_init_m = opt.lambda_init_m;
  fc.marginalize = opt.marginalize;
  SlidingWindowEstimator est(fc);

  const double sigma_rad = opt.paoa_sigma_deg / kDegPerRad;
  const double t_anchor = b.truth_at_csi[first_pkt].t;
  long frames_added = 0;
  double last_frame_t = 0.0;

  auto add_fusion_frame = [&](double t, const Rotation& att, double theta_deg,
                              size_t truth_idx) -> double {
    std::optional<Preintegrated> pre;
    if (frames_added > 0) {
      pre = preintegrate(slice_by_time(b.imu, last_frame_t, t),
                         sc.noise.accel_std, sc.noise.gyro_std);
    }
    std::vector<PaoaMeasurement> meas;
    meas.push_back({0, bearing_vec(theta_deg), sigma_rad});
    est.add_frame(t, att, std::move(pre), std::move(meas));
    ++frames_added;
    last_frame_t = t;
    if (frames_added < 2) return -1.0;

    const auto t0c = std::chrono::steady_clock::now();
    est.solve();
    est.slide();
    out.solver_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0c)
            .count();
    out.solves += 1;
    const auto ws = est.state();
    const Vec3 p_new = ws.frames.back().p;
    out.t.push_back(t);
    out.p_est.push_back(p_new);
    out.p_true.push_back(to_anchor(b.truth_at_csi[truth_idx].p));
    out.ap_trace.push_back(est.ap_position(0));
    if (t - t_anchor > opt.convergence_period_s) {
      const double gn = ws.frames.back().g.norm();
      out.max_gravity_dev =
          std::max(out.max_gravity_dev, std::abs(gn - 9.8) / 9.8);
    }
    return std::max((est.ap_position(0) - p_new).norm(), 0.5);
  };

  if (opt.source == PaoaSource::kGeometric) {
    std::mt19937_64 rng(sc.noise.seed ^ 0xFA0AULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    AttitudeTracker tracker(opt.attitude_window, opt.attitude_opts,
                            opt.attitude_stride);
    RangeGuess range{3.0};
    const Vec3 gravity0(0.0, 0.0, 9.8);
    double prev_theta = 0.0, prev_t = 0.0;
    Rotation prev_att;
    bool have_prev = false;

    for (size_t i = 0; i < n_pkts; ++i) {
      const double t = b.truth_at_csi[i].t;
      const double theta_i = std::clamp(
          b.aoa_truth[i].theta_deg + opt.paoa_sigma_deg * gauss(rng), -89.0,
          89.0);
      Rotation att_i;
      if (have_prev) {
        const double dt = t - prev_t;
        const auto slice = slice_by_time(b.imu, prev_t, t);
        const Rotation rel = gyro_increment(slice);
        const Vec3 l_hat = predict_translation(slice, prev_att, gravity0, dt);
        const Vec3 bearing0 = prev_att * bearing_vec(prev_theta);
        const double theta_t_deg =
            (bearing0.x() * l_hat.y() - bearing0.y() * l_hat.x()) /
            range.r_m * kDegPerRad;
        const double dpsi = (theta_i - theta_t_deg - prev_theta) / kDegPerRad;
        att_i = tracker.push(rel, dpsi);
      }
      if (i % opt.frame_decimation == 0) {
        const double r = add_fusion_frame(t, att_i, theta_i, i);
        if (r > 0.0) range.r_m = r;
      }
      prev_theta = theta_i;
      prev_att = att_i;
      prev_t = t;
      have_prev = true;
    }
  } else {
    PaoaEstimator pe(opt.paoa);
    size_t k = 0;
    long paoa_index = -1;
    for (size_t i = 0; i < b.csi.size(); ++i) {
      while (k < b.imu.size() && b.imu[k].t <= b.csi[i].t + 1e-9) {
        pe.push_imu(b.imu[k++]);
      }
      const auto paoa = pe.push_csi(b.csi[i]);
      if (!paoa) continue;
      ++paoa_index;
      if (paoa->fallback) out.paoa_fallbacks += 1;
      if (paoa_index % opt.frame_decimation != 0) continue;
      const double r =
          add_fusion_frame(paoa->t, paoa->attitude, paoa->source.theta_deg, i);
      if (r > 0.0) pe.update_range(r);
    }
    out.grid_counts = pe.eval_counts();
  }

  // converged-period statistics
  double sum_sq = 0.0, sum_abs = 0.0;
  long n_conv = 0;
  for (size_t i = 0; i < out.t.size(); ++i) {
    if (out.t[i] - t_anchor < opt.convergence_period_s) continue;
    const double eh = (out.p_est[i] - out.p_true[i]).head<2>().norm();
    sum_sq += eh * eh;
    sum_abs += eh;
    ++n_conv;
  }
  if (n_conv > 0) {
    out.rmse_horizontal_m = std::sqrt(sum_sq / n_conv);
    out.converged_mean_error_m = sum_abs / n_conv;
  }
  if (!out.t.empty()) {
    out.ap_est = out.ap_trace.back();
    out.ap_error_m = (out.ap_est - out.ap_true).head<2>().norm();
    out.final_pose_est = out.p_est.back();
    out.final_pose_true = out.p_true.back();
  }
  return out;
}

// ---------------------------------------------------------------------------
// AoA bench
// ---------------------------------------------------------------------------

AoaBenchResult run_aoa_bench(const AoaBenchOptions& opt) {
  AoaBenchResult res;
  for (double angle = opt.angle_min_deg; angle <= opt.angle_max_deg + 1e-9;
       angle += opt.angle_step_deg) {
    ScenarioConfig sc;
    sc.trajectory.shape = TrajectoryShape::kLine;
    sc.trajectory.line_speed = 0.0;
    sc.trajectory.height_m = 1.0;
    sc.trajectory.yaw_mode = YawMode::kFixed;
    sc.trajectory.attitude_mode = AttitudeMode::kLevel;
    sc.trajectory.duration_s = (opt.packets_per_angle + 11) / 50.0;
    const double a_rad = angle / kDegPerRad;
    sc.ap_position =
        Vec3(0.0, 0.0, 1.0) + 3.0 * Vec3(std::sin(a_rad), std::cos(a_rad), 0.0);
    sc.noise.csi_snr_db = opt.snr_db;
    sc.noise.seed = opt.seed ^ static_cast<uint64_t>(llround(angle + 200.0));
    sc.imu_rate_hz = 200.0;
    sc.csi_rate_hz = 50.0;
    const ScenarioBundle b = run_scenario(sc);

    AoaBenchRow row;
    row.angle_deg = angle;

    PaoaConfig pc;
    pc.tau_step_ns = opt.tau_step_ns;
    pc.n_paths = 1;
    const auto stream = estimate_paoa_stream(b.csi, b.imu, pc);
    double err = 0.0;
    std::vector<double> thetas;
    for (const auto& p : stream.paoas) {
      err += std::abs(wrap_deg(p.source.theta_deg - angle));
      thetas.push_back(p.source.theta_deg);
    }
    row.mean_err_per_packet_deg = thetas.empty() ? 0.0 : err / thetas.size();
    row.windowed_ms_per_packet =
        thetas.empty() ? 0.0
                       : stream.spectrum_seconds * 1e3 / thetas.size();

    //10-packet averaged variant
    double err_avg = 0.0;
    int groups = 0;
    for (size_t g = 0; g + 10 <= thetas.size(); g += 10) {
      double m = 0.0;
      for (size_t i = g; i < g + 10; ++i) m += thetas[i];
      err_avg += std::abs(wrap_deg(m / 10.0 - angle));
      ++groups;
    }
    row.mean_err_avg10_deg = groups ? err_avg / groups : 0.0;

    // full-grid 10-packet baseline
    SpotfiInitConfig init_cfg;
    init_cfg.n_paths = 1;
    init_cfg.tau_step_ns = opt.tau_step_ns;
    double err_full = 0.0;
    int full_groups = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (size_t g = 0; g + 10 <= b.csi.size() && full_groups < 3; g += 10) {
      const auto est = spotfi_initial_aoa(
          std::span<const CsiSnapshot>(b.csi.data() + g, 10), init_cfg);
      err_full += std::abs(wrap_deg(est.theta_deg - angle));
      ++full_groups;
    }
    row.full_ms_per_group =
        full_groups
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                      .count() *
                  1e3 / full_groups
            : 0.0;
    row.mean_err_full10_deg = full_groups ? err_full / full_groups : 0.0;
    res.rows.push_back(row);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

uint64_t scenario_digest(const ScenarioConfig& sc) {
  std::ostringstream os;
  os << static_cast<int>(sc.trajectory.shape) << '|' << sc.trajectory.radius_m
     << '|' << sc.trajectory.angular_rate << '|' << sc.trajectory.height_m
     << '|' << sc.trajectory.duration_s << '|'
     << static_cast<int>(sc.trajectory.yaw_mode) << '|'
     << sc.trajectory.yaw0_rad << '|'
     << static_cast<int>(sc.trajectory.attitude_mode) << '|'
     << sc.trajectory.line_speed << '|' << sc.trajectory.line_heading << '|'
     << sc.noise.accel_std << '|' << sc.noise.gyro_std << '|'
     << sc.noise.aoa_std_deg << '|' << sc.noise.csi_snr_db << '|'
     << sc.noise.seed << '|' << sc.ap_position.transpose() << '|'
     << sc.imu_rate_hz << '|' << sc.csi_rate_hz;
  for (const auto& r : sc.multipath.reflectors) {
    os << '|' << r.relative_amplitude << ',' << r.excess_delay_ns << ','
       << r.aoa_offset_deg;
  }
  os << '|' << sc.multipath.direct_attenuation_db;
  return fnv1a(os.str());
}

std::string metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["scenario_digest"] = m.scenario_digest;
  for (const auto& [k, v] : m.values) {
    if (std::isfinite(v)) {
      j[k] = v;
    } else {
      j[k] = nullptr;
    }
  }
  return j.dump(2) + "\n";
}

std::string timings_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : m.timings_ms) j[k] = v;
  return j.dump(2) + "\n";
}

MetricsReport metrics_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  nlohmann::json j;
  in >> j;
  MetricsReport m;
  for (const auto& [k, v] : j.items()) {
    if (k == "scenario_digest") {
      m.scenario_digest = v.get<uint64_t>();
    } else if (v.is_number()) {
      m.values[k] = v.get<double>();
    }
  }
  return m;
}

std::vector<CompareRow> compare_metrics(const MetricsReport& a,
                                        const MetricsReport& b) {
  if (a.scenario_digest != b.scenario_digest) {
    throw std::runtime_error("compare: scenario digests differ");
  }
  std::vector<CompareRow> rows;
  for (const auto& [k, va] : a.values) {
    const auto it = b.values.find(k);
    if (it == b.values.end()) continue;
    CompareRow r;
    r.key = k;
    r.a = va;
    r.b = it->second;
    r.ratio = std::abs(it->second) > 1e-300 ? va / it->second
                                            : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace wins
