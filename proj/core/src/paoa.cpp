#include "wins/paoa.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "wins/csv.hpp"
#include "wins/preintegration.hpp"

namespace wins {

namespace {
constexpr double kDegPerRad = 180.0 / M_PI;

double azimuth_deg(const Vec3& d) {
  return std::atan2(d.x(), d.y()) * kDegPerRad;
}

Vec3 bearing_from_theta(double theta_deg) {
  const double th = theta_deg / kDegPerRad;
  return Vec3(std::sin(th), std::cos(th), 0.0);
}
}  // namespace

Vec3 predict_translation(std::span<const ImuSample> imu,
                         const Rotation& r_body_to_frame0,
                         const Vec3& gravity_frame0, double dt,
                         const std::optional<Vec3>& velocity_w) {
  if (imu.size() < 2 || dt <= 0.0) return Vec3::Zero();
  const Preintegrated pre = preintegrate(imu, 0.0, 0.0);
  Vec3 l = r_body_to_frame0 * pre.alpha - gravity_frame0 * (0.5 * dt * dt);
  if (velocity_w) l += *velocity_w * dt;
  return l;
}

AoaPrediction predict_aoa(double theta_prev_deg, const Vec3& translation0,
                          const Rotation& rel_rot, const RangeGuess& range,
                          const Vec3& bearing0, double window_halfwidth_deg) {
  if (range.r_m < 0.1) {
    throw std::invalid_argument("predict_aoa: range guess below minimum");
  }
  AoaPrediction out;
  out.window_halfwidth_deg = window_halfwidth_deg;
  // signed arc angle of the displacement component perpendicular to the
  // bearing, about the vertical
  out.theta_t_deg = (bearing0.x() * translation0.y() -
                     bearing0.y() * translation0.x()) /
                    range.r_m * kDegPerRad;
  out.theta_r_deg = rel_rot.yaw() * kDegPerRad;
  out.theta_pred_deg = std::clamp(
      theta_prev_deg + out.theta_t_deg + out.theta_r_deg, -90.0, 90.0);
  return out;
}

PaoaEstimator::PaoaEstimator(const PaoaConfig& cfg)
    : cfg_(cfg), range_{cfg.range_init_m}, gravity0_(cfg.gravity_frame0) {}

void PaoaEstimator::push_imu(const ImuSample& s) {
  if (!imu_.empty() && s.t < imu_.back().t) {
    throw std::invalid_argument("IMU samples must be time-ordered");
  }
  imu_.push_back(s);
}

void PaoaEstimator::update_range(double r_m) {
  range_.r_m = std::max(r_m, cfg_.min_range_m);
}

void PaoaEstimator::update_gravity(const Vec3& g) { gravity0_ = g; }

std::span<const ImuSample> PaoaEstimator::imu_between(double t0,
                                                      double t1) const {
  size_t lo = 0;
  while (lo + 1 < imu_.size() && imu_[lo + 1].t <= t0 + 1e-9) ++lo;
  size_t hi = lo;
  while (hi + 1 < imu_.size() && imu_[hi + 1].t <= t1 + 1e-9) ++hi;
  return std::span<const ImuSample>(imu_).subspan(lo, hi - lo + 1);
}

std::optional<Paoa> PaoaEstimator::push_csi(const CsiSnapshot& snap) {
  const long full_nodes =
      static_cast<long>(full_theta_axis(cfg_.theta_step_deg).size());

  if (!initialized_) {
    init_buffer_.push_back(snap);
    if (static_cast<int>(init_buffer_.size()) < cfg_.init_packets) {
      return std::nullopt;
    }
    SpotfiInitConfig init_cfg;
    init_cfg.n_paths = cfg_.n_paths;
    init_cfg.sub_antennas = cfg_.sub_antennas;
    init_cfg.sub_carriers = cfg_.sub_carriers;
    init_cfg.theta_step_deg = cfg_.theta_step_deg;
    init_cfg.tau_step_ns = cfg_.tau_step_ns;
    const AoaEstimate first = spotfi_initial_aoa(init_buffer_, init_cfg);
    const auto tau_nodes =
        default_tau_axis(snap.subcarrier_spacing_hz, cfg_.tau_step_ns).size();
    counts_.init +=
        static_cast<long>(init_buffer_.size()) * full_nodes * tau_nodes;
    init_buffer_.clear();

    prev_t_ = snap.t;
    prev_theta_deg_ = first.theta_deg;
    prev_attitude_ = Rotation();  // the initial pose anchors frame 0
    tracker_.emplace(cfg_.attitude_window, cfg_.attitude_opts,
                     cfg_.attitude_stride);
    initialized_ = true;

    Paoa p;
    p.t = snap.t;
    p.source = first;
    p.attitude = prev_attitude_;
    p.d0 = bearing_from_theta(first.theta_deg);
    p.theta0_deg = first.theta_deg;
    return p;
  }

  const double dt = snap.t - prev_t_;
  if (dt <= 0.0) throw std::invalid_argument("CSI packets must move forward");

  // predict the next bearing from the IMU
  const auto interval = imu_between(prev_t_, snap.t);
  const Rotation rel = gyro_increment(interval);
  const Vec3 l_hat =
      predict_translation(interval, prev_attitude_, gravity0_, dt);
  const Vec3 bearing0 = prev_attitude_ * bearing_from_theta(prev_theta_deg_);
  // a packet gap widens the search window proportionally
  const double widen =
      std::min(std::max(dt / cfg_.nominal_csi_period_s, 1.0), 4.0);
  const AoaPrediction pred =
      predict_aoa(prev_theta_deg_, l_hat, rel, range_, bearing0,
                  cfg_.window_halfwidth_deg * widen);

  // windowed spectrum search with fallback to the full grid
  const auto t_start = std::chrono::steady_clock::now();
  const SmoothedCsi smoothed =
      spatial_smooth(snap, cfg_.sub_antennas, cfg_.sub_carriers);
  const NoiseProjector proj = noise_projector(smoothed, cfg_.n_paths);
  const auto tau_axis =
      default_tau_axis(snap.subcarrier_spacing_hz, cfg_.tau_step_ns);
  const auto theta_axis = windowed_theta_axis(
      pred.theta_pred_deg, pred.window_halfwidth_deg, cfg_.theta_step_deg);
  SpectrumGrid grid = evaluate_spectrum(proj, smoothed, theta_axis, tau_axis);
  counts_.windowed += grid.evaluations;
  counts_.full_equiv += full_nodes * tau_axis.size();
  counts_.packets += 1;

  std::vector<AoaEstimate> peaks = find_peaks(grid);
  bool fallback = false;
  if (peaks.empty()) {
    fallback = true;
    counts_.fallback_packets += 1;
    grid = evaluate_spectrum(proj, smoothed,
                             full_theta_axis(cfg_.theta_step_deg), tau_axis);
    counts_.windowed += grid.evaluations;
    peaks = find_peaks(grid);
  }
  AoaEstimate selected;
  if (peaks.empty()) {
    // keep the per-packet output contract alive on a dead spectrum
    selected.theta_deg = pred.theta_pred_deg;
    selected.tof_ns = 0.0;
    selected.power = 0.0;
    fallback = true;
  } else {
    selected = select_direct_path(peaks);
  }
  selected.t = snap.t;
  spectrum_seconds_ +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  // bearing-derived yaw increment de-drifts the attitude
  const double dpsi_rad =
      (selected.theta_deg - pred.theta_t_deg - prev_theta_deg_) / kDegPerRad;
  const Rotation attitude = tracker_->push(rel, dpsi_rad);

  prev_t_ = snap.t;
  prev_theta_deg_ = selected.theta_deg;
  prev_attitude_ = attitude;

  Paoa p;
  p.t = snap.t;
  p.source = selected;
  p.attitude = attitude;
  p.d0 = attitude * bearing_from_theta(selected.theta_deg);
  p.theta0_deg = azimuth_deg(p.d0);
  p.fallback = fallback;
  return p;
}

PaoaStreamResult estimate_paoa_stream(std::span<const CsiSnapshot> csi,
                                      std::span<const ImuSample> imu,
                                      const PaoaConfig& cfg) {
  PaoaEstimator est(cfg);
  PaoaStreamResult out;
  size_t imu_idx = 0;
  for (const auto& snap : csi) {
    while (imu_idx < imu.size() && imu[imu_idx].t <= snap.t + 1e-9) {
      est.push_imu(imu[imu_idx++]);
    }
    if (auto p = est.push_csi(snap)) out.paoas.push_back(*p);
  }
  out.counts = est.eval_counts();
  out.spectrum_seconds = est.spectrum_seconds();
  return out;
}

void write_paoa_csv(const std::string& path, const std::vector<Paoa>& paoas) {
  CsvWriter w(path, {"t", "theta_raw", "tau", "theta0", "dx0", "dy0", "dz0",
                     "fallback_flag"});
  for (const auto& p : paoas) {
    w.row({p.t, p.source.theta_deg, p.source.tof_ns, p.theta0_deg, p.d0.x(),
           p.d0.y(), p.d0.z(), p.fallback ? 1.0 : 0.0});
  }
}

}  // namespace wins
