#include "wins/cli_runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "wins/csv.hpp"
#include "wins/experiments.hpp"

namespace wins {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr int kOk = 0;
constexpr int kPipelineError = 1;
constexpr int kConfigError = 2;
constexpr int kThresholdsViolated = 3;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

struct RunContext {
  ExperimentConfig cfg;
  fs::path out_dir;
  MetricsReport metrics;
  bool thresholds_ok = true;
};

void check_threshold(RunContext& ctx, const std::string& name, double value,
                     bool lower_is_better = true) {
  const auto it = ctx.cfg.thresholds.find(name);
  if (it == ctx.cfg.thresholds.end()) return;
  const bool ok = lower_is_better ? value <= it->second : value >= it->second;
  ctx.metrics.values["threshold." + name] = ok ? 1.0 : 0.0;
  if (!ok) ctx.thresholds_ok = false;
}

void run_fusion_pipeline(RunContext& ctx) {
  const auto t0 = Clock::now();
  FusionExperimentOptions opt;
  opt.scenario = ctx.cfg.scenario;
  opt.source = ctx.cfg.scenario.with_csi ? PaoaSource::kCsiPipeline
                                         : PaoaSource::kGeometric;
  opt.paoa_sigma_deg = ctx.cfg.paoa_sigma_deg;
  opt.window_frames = ctx.cfg.window_frames;
  opt.frame_decimation = ctx.cfg.frame_decimation;
  opt.lambda_init_m = ctx.cfg.lambda_init_m;
  opt.planar = ctx.cfg.planar;
  opt.paoa.window_halfwidth_deg = ctx.cfg.window_halfwidth_deg;
  opt.paoa.theta_step_deg = ctx.cfg.theta_step_deg;
  opt.paoa.tau_step_ns = ctx.cfg.tau_step_ns;
  if (ctx.cfg.n_paths > 0) {
    opt.paoa.n_paths = ctx.cfg.n_paths;
  } else {
    opt.paoa.n_paths =
        1 + static_cast<int>(ctx.cfg.scenario.multipath.reflectors.size());
  }
  const FusionRunResult res = run_fusion_experiment(opt);

  std::vector<FrameState> frames(res.p_est.size());
  for (size_t i = 0; i < res.p_est.size(); ++i) frames[i].p = res.p_est[i];
  write_pose_csv((ctx.out_dir / "pose.csv").string(), res.t, frames);
  write_ap_csv((ctx.out_dir / "ap.csv").string(), {res.ap_est});
  {
    CsvWriter w((ctx.out_dir / "pose_error.csv").string(),
                {"t", "ex", "ey", "ez"});
    for (size_t i = 0; i < res.t.size(); ++i) {
      const Vec3 e = res.p_est[i] - res.p_true[i];
      w.row({res.t[i], e.x(), e.y(), e.z()});
    }
  }

  ctx.metrics.values["positioning_rmse_m"] = res.rmse_horizontal_m;
  ctx.metrics.values["converged_mean_error_m"] = res.converged_mean_error_m;
  ctx.metrics.values["ap_error_m"] = res.ap_error_m;
  ctx.metrics.values["solves"] = static_cast<double>(res.solves);
  ctx.metrics.values["paoa_fallbacks"] =
      static_cast<double>(res.paoa_fallbacks);
  if (res.grid_counts.packets > 0) {
    ctx.metrics.values["grid_windowed"] =
        static_cast<double>(res.grid_counts.windowed);
    ctx.metrics.values["grid_full_equiv"] =
        static_cast<double>(res.grid_counts.full_equiv);
  }
  ctx.metrics.timings_ms["pipeline_total"] = ms_since(t0);
  ctx.metrics.timings_ms["solver"] = res.solver_seconds * 1e3;
  check_threshold(ctx, "rmse_max_m", res.rmse_horizontal_m);
  check_threshold(ctx, "ap_error_max_m", res.ap_error_m);
}

void run_ekf_pipeline(RunContext& ctx) {
  const auto t0 = Clock::now();
  EkfComparisonOptions opt;
  opt.scenario = ctx.cfg.scenario;
  opt.seeds = std::max(1, ctx.cfg.seeds);
  opt.capture_trajectories = true;
  const EkfComparisonResult res = run_ekf_comparison(opt);
  for (size_t v = 0; v < res.variant_names.size(); ++v) {
    ctx.metrics.values["terminal_median_" + res.variant_names[v] + "_m"] =
        res.medians_m[v];
    if (v < res.trajectories.size() && !res.trajectories[v].empty()) {
      CsvWriter w(
          (ctx.out_dir / ("ekf_" + res.variant_names[v] + ".csv")).string(),
          {"t", "px", "py", "pz", "tx", "ty", "tz"});
      for (const auto& pt : res.trajectories[v]) {
        w.row({pt.t, pt.p_est.x(), pt.p_est.y(), pt.p_est.z(), pt.p_true.x(),
               pt.p_true.y(), pt.p_true.z()});
      }
    }
  }
  ctx.metrics.timings_ms["pipeline_total"] = ms_since(t0);
}

void run_observability_pipeline(RunContext& ctx) {
  const auto t0 = Clock::now();
  ObservabilityOptions opt;
  const ObservabilityResult res = run_observability_analysis(opt);
  ctx.metrics.values["rank_true"] = res.rank_true;
  ctx.metrics.values["rank_estimated"] = res.rank_perturbed;
  ctx.metrics.values["rank_static"] = res.rank_static;
  ctx.metrics.values["nullspace_ratio_truth"] = res.at_truth.ratio_full;
  ctx.metrics.values["nullspace_ratio_translation_est"] =
      res.at_perturbed.ratio_t;
  ctx.metrics.values["nullspace_ratio_rotation_est"] = res.at_perturbed.ratio_r;
  ctx.metrics.timings_ms["pipeline_total"] = ms_since(t0);
  if (res.rank_true != 8 || res.rank_perturbed != 9) {
    ctx.thresholds_ok = false;
  }
}

void run_aoa_bench_pipeline(RunContext& ctx) {
  const auto t0 = Clock::now();
  AoaBenchOptions opt;
  opt.snr_db = ctx.cfg.scenario.noise.csi_snr_db;
  opt.tau_step_ns = ctx.cfg.tau_step_ns;
  opt.seed = ctx.cfg.scenario.noise.seed;
  const AoaBenchResult res = run_aoa_bench(opt);
  CsvWriter w((ctx.out_dir / "aoa_bench.csv").string(),
              {"angle_deg", "err_per_packet_deg", "err_avg10_deg",
               "err_full10_deg", "windowed_ms_per_packet",
               "full_ms_per_group"});
  double mean_err = 0.0;
  int interior = 0;
  for (const auto& r : res.rows) {
    w.row({r.angle_deg, r.mean_err_per_packet_deg, r.mean_err_avg10_deg,
           r.mean_err_full10_deg, r.windowed_ms_per_packet,
           r.full_ms_per_group});
    if (std::abs(r.angle_deg) < 89.0) {
      mean_err += r.mean_err_per_packet_deg;
      ++interior;
    }
  }
  ctx.metrics.values["mean_interior_err_deg"] =
      interior ? mean_err / interior : 0.0;
  ctx.metrics.timings_ms["pipeline_total"] = ms_since(t0);
  check_threshold(ctx, "paoa_error_max_deg",
                  ctx.metrics.values["mean_interior_err_deg"]);
}

void run_attitude_bench_pipeline(RunContext& ctx) {
  const auto t0 = Clock::now();
  AttitudeBenchOptions opt;
  opt.seeds = std::max(1, ctx.cfg.seeds);
  opt.aoa_std_deg = ctx.cfg.scenario.noise.aoa_std_deg;
  if (ctx.cfg.scenario.noise.gyro_bias.norm() > 0.0) {
    opt.gyro_bias_z = ctx.cfg.scenario.noise.gyro_bias.z();
  }
  const AttitudeBenchResult res = run_attitude_bench(opt);
  CsvWriter w((ctx.out_dir / "attitude_bench.csv").string(),
              {"t", "mean_fused_err_deg", "mean_gyro_err_deg"});
  for (size_t i = 0; i < res.frame_times.size(); ++i) {
    w.row({res.frame_times[i], res.mean_fused_err_deg[i],
           res.mean_gyro_err_deg[i]});
  }
  ctx.metrics.values["attitude_max_drift_deg"] = res.max_mean_fused_deg;
  ctx.metrics.values["gyro_only_max_drift_deg"] = res.max_mean_gyro_deg;
  ctx.metrics.timings_ms["pipeline_total"] = ms_since(t0);
  check_threshold(ctx, "yaw_drift_max_deg", res.max_mean_fused_deg);
}

void run_rotary_bench_pipeline(RunContext& ctx) {
  const auto t0 = Clock::now();
  RotarySweepOptions opt;
  opt.snr_db = ctx.cfg.scenario.noise.csi_snr_db;
  opt.coherence_phase_std = ctx.cfg.scenario.noise.coherence_phase_std > 0.0
                                ? ctx.cfg.scenario.noise.coherence_phase_std
                                : 1.0;
  opt.seed = ctx.cfg.scenario.noise.seed;
  const RotarySweepResult res = run_rotary_sweep(opt);
  CsvWriter w((ctx.out_dir / "rotary_bench.csv").string(),
              {"rate_dps", "mean_paoa_err_deg"});
  double max_err = 0.0;
  for (size_t i = 0; i < res.rates_dps.size(); ++i) {
    w.row({res.rates_dps[i], res.mean_err_deg[i]});
    max_err = std::max(max_err, res.mean_err_deg[i]);
  }
  ctx.metrics.values["max_paoa_err_deg"] = max_err;
  ctx.metrics.timings_ms["pipeline_total"] = ms_since(t0);
  check_threshold(ctx, "paoa_error_max_deg", max_err);
}

int run_one(const ExperimentConfig& cfg, const fs::path& out_dir) {
  RunContext ctx{cfg, out_dir, {}, true};
  ctx.metrics.scenario_digest = scenario_digest(cfg.scenario);
  fs::create_directories(out_dir);

  try {
    if (cfg.pipeline == "fusion") {
      run_fusion_pipeline(ctx);
    } else if (cfg.pipeline == "ekf") {
      run_ekf_pipeline(ctx);
    } else if (cfg.pipeline == "observability") {
      run_observability_pipeline(ctx);
    } else if (cfg.pipeline == "aoa-bench") {
      run_aoa_bench_pipeline(ctx);
    } else if (cfg.pipeline == "attitude-bench") {
      run_attitude_bench_pipeline(ctx);
    } else if (cfg.pipeline == "rotary-bench") {
      run_rotary_bench_pipeline(ctx);
    } else {
      std::cerr << "unrecognized pipeline: " << cfg.pipeline << "\n";
      return kConfigError;
    }
  } catch (const std::exception& e) {
    std::cerr << "pipeline '" << cfg.pipeline << "' failed: " << e.what()
              << "\n";
    return kPipelineError;
  }

  ctx.metrics.values["thresholds_pass"] = ctx.thresholds_ok ? 1.0 : 0.0;
  write_file(out_dir / "metrics.json", metrics_to_json(ctx.metrics));
  write_file(out_dir / "timings.json", timings_to_json(ctx.metrics));
  return ctx.thresholds_ok ? kOk : kThresholdsViolated;
}

int cmd_sim(const std::string& config_path, const std::string& out,
            std::optional<uint64_t> seed) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  }
  cfg.scenario.noise.seed =
      seed.value_or(effective_seed(cfg.scenario.noise.seed));
  try {
    const fs::path dir(out);
    fs::create_directories(dir);
    const ScenarioBundle b = run_scenario(cfg.scenario);
    write_imu_csv((dir / "imu.csv").string(), b.imu);
    write_truth_csv((dir / "truth.csv").string(), b.truth);
    if (!b.csi.empty()) write_csi_csv((dir / "csi.csv").string(), b.csi);
    CsvWriter w((dir / "aoa_truth.csv").string(),
                {"t", "theta_deg", "theta0_deg", "tof_ns"});
    for (const auto& a : b.aoa_truth) {
      w.row({a.t, a.theta_deg, a.theta0_deg, a.tof_ns});
    }
    std::cout << "wrote " << b.imu.size() << " IMU samples, " << b.csi.size()
              << " CSI snapshots to " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "sim failed: " << e.what() << "\n";
    return kPipelineError;
  }
  return kOk;
}

int cmd_run(const std::string& config_path, const std::string& out,
            std::optional<uint64_t> seed, const std::string& pipeline,
            int jobs) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(config_path);
    if (!pipeline.empty()) cfg.pipeline = pipeline;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  }
  cfg.scenario.noise.seed =
      seed.value_or(effective_seed(cfg.scenario.noise.seed));

  // the ekf and attitude pipelines sweep seeds internally; an explicit jobs
  // request fans independent seeds out to isolated directories instead
  if (jobs > 1 && cfg.seeds > 1 && cfg.pipeline != "ekf" &&
      cfg.pipeline != "attitude-bench") {
    std::vector<int> codes(cfg.seeds, kOk);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int workers = std::min(jobs, cfg.seeds);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (int s = next.fetch_add(1); s < cfg.seeds; s = next.fetch_add(1)) {
          ExperimentConfig c = cfg;
          c.seeds = 1;
          c.scenario.noise.seed = cfg.scenario.noise.seed + s;
          codes[s] = run_one(c, fs::path(out) / ("seed_" + std::to_string(s)));
        }
      });
    }
    for (auto& th : pool) th.join();
    int worst = kOk;
    for (int c : codes) worst = std::max(worst, c);
    return worst;
  }
  return run_one(cfg, out);
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& out) {
  try {
    const MetricsReport a = metrics_from_json_file(a_path);
    const MetricsReport b = metrics_from_json_file(b_path);
    const auto rows = compare_metrics(a, b);
    std::cout << "metric,a,b,ratio\n";
    for (const auto& r : rows) {
      std::cout << r.key << "," << format_double(r.a) << ","
                << format_double(r.b) << "," << format_double(r.ratio) << "\n";
    }
    if (!out.empty()) {
      fs::create_directories(fs::path(out));
      CsvWriter w((fs::path(out) / "compare.csv").string(),
                  {"a", "b", "ratio"});
      std::ofstream names((fs::path(out) / "compare_keys.txt").string());
      for (const auto& r : rows) {
        w.row({r.a, r.b, r.ratio});
        names << r.key << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "compare failed: " << e.what() << "\n";
    return kPipelineError;
  }
  return kOk;
}

int cmd_bench(const std::string& out) {
  try {
    fs::create_directories(fs::path(out));
    MetricsReport m;

    // windowed vs full spectrum cost on one packet stream
    EquivalenceOptions eq;
    eq.scenarios = 2;
    eq.packets_per_scenario = 30;
    const EquivalenceResult eres = run_windowed_equivalence(eq);
    m.values["spectrum_speedup"] = eres.speedup();
    m.values["windowed_ms_per_packet"] =
        eres.packets ? eres.windowed_seconds * 1e3 / eres.packets : 0.0;
    m.values["full_ms_per_packet"] =
        eres.packets ? eres.full_seconds * 1e3 / eres.packets : 0.0;

    // fusion solve latency across window sizes
    CsvWriter w((fs::path(out) / "fusion_latency.csv").string(),
                {"window", "ms_per_solve"});
    for (int window : {10, 20, 30, 40, 50}) {
      FusionExperimentOptions opt;
      opt.scenario = fusion_reference_scenario();
      opt.scenario.trajectory.duration_s = 30.0;
      opt.window_frames = window;
      opt.convergence_period_s = 10.0;
      const FusionRunResult res = run_fusion_experiment(opt);
      const double ms =
          res.solves ? res.solver_seconds * 1e3 / res.solves : 0.0;
      w.row({static_cast<double>(window), ms});
      m.values["fusion_ms_window_" + std::to_string(window)] = ms;
    }
    write_file(fs::path(out) / "bench.json", metrics_to_json(m));
    std::cout << metrics_to_json(m);
  } catch (const std::exception& e) {
    std::cerr << "bench failed: " << e.what() << "\n";
    return kPipelineError;
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"WiFi-inertial pose estimation pipelines"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", pipeline;
  std::optional<uint64_t> seed;
  int jobs = 1;

  auto* sim = app.add_subcommand("sim", "synthesize a scenario to CSV");
  sim->add_option("--config", config_path, "scenario config file")
      ->required();
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--seed", seed, "seed override");

  auto* run = app.add_subcommand("run", "run an estimation pipeline");
  run->add_option("--config", config_path, "experiment config file")
      ->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "seed override");
  run->add_option("--pipeline", pipeline,
                  "fusion | ekf | aoa-bench | attitude-bench | observability "
                  "| rotary-bench");
  run->add_option("--jobs", jobs, "parallel independent seeds");

  std::string cmp_a, cmp_b;
  auto* cmp = app.add_subcommand("compare", "diff two metrics.json files");
  cmp->add_option("a", cmp_a, "first metrics.json")->required();
  cmp->add_option("b", cmp_b, "second metrics.json")->required();
  cmp->add_option("--out", out_dir, "optional output directory");

  auto* bench = app.add_subcommand("bench", "micro-benchmark report");
  bench->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (sim->parsed()) return cmd_sim(config_path, out_dir, seed);
  if (run->parsed()) return cmd_run(config_path, out_dir, seed, pipeline, jobs);
  if (cmp->parsed()) return cmd_compare(cmp_a, cmp_b, out_dir);
  if (bench->parsed()) return cmd_bench(out_dir);
  return kConfigError;
}

}  // namespace wins
