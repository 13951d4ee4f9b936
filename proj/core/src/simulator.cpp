#include "wins/simulator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "wins/csv.hpp"

namespace wins {

namespace {

constexpr double kGravity = 9.8;

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Natural cubic spline through (t_i, y_i), one scalar axis.
class CubicSpline {
 public:
  CubicSpline(const std::vector<double>& ts, const std::vector<double>& ys)
      : t_(ts), y_(ys) {
    const size_t n = ts.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
      const double h0 = t_[i] - t_[i - 1];
      const double h1 = t_[i + 1] - t_[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      d[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    }
    // Thomas algorithm, natural ends (m_0 = m_{n-1} = 0)
    for (size_t i = 2; i + 1 < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    for (size_t i = n - 2; i >= 1; --i) {
      m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
      if (i == 1) break;
    }
  }

  void eval(double t, double& y, double& dy, double& ddy) const {
    size_t i = 0;
    while (i + 2 < t_.size() && t > t_[i + 1]) ++i;
    const double h = t_[i + 1] - t_[i];
    const double u = (t_[i + 1] - t) / h;
    const double w = (t - t_[i]) / h;
    y = u * y_[i] + w * y_[i + 1] +
        ((u * u * u - u) * m_[i] + (w * w * w - w) * m_[i + 1]) * h * h / 6.0;
    dy = (y_[i + 1] - y_[i]) / h +
         h / 6.0 * (-(3.0 * u * u - 1.0) * m_[i] + (3.0 * w * w - 1.0) * m_[i + 1]);
    ddy = u * m_[i] + w * m_[i + 1];
  }

 private:
  std::vector<double> t_, y_;
  std::vector<double> m_;
};

struct TrajEval {
  const TrajectoryConfig& cfg;
  std::optional<CubicSpline> sx, sy, sz;

  explicit TrajEval(const TrajectoryConfig& c) : cfg(c) {
    if (cfg.shape == TrajectoryShape::kSpline) {
      if (cfg.waypoints.size() < 2) {
        throw std::invalid_argument("spline trajectory needs >= 2 waypoints");
      }
      std::vector<double> ts, xs, ys, zs;
      for (const auto& w : cfg.waypoints) {
        ts.push_back(w.t);
        xs.push_back(w.p.x());
        ys.push_back(w.p.y());
        zs.push_back(w.p.z());
      }
      sx.emplace(ts, xs);
      sy.emplace(ts, ys);
      sz.emplace(ts, zs);
    }
  }

  void kinematics(double t, Vec3& p, Vec3& v, Vec3& a) const {
    switch (cfg.shape) {
      case TrajectoryShape::kCircle: {
        const double w = cfg.angular_rate;
        const double r = cfg.radius_m;
        p = Vec3(r * std::cos(w * t), r * std::sin(w * t), cfg.height_m);
        v = Vec3(-r * w * std::sin(w * t), r * w * std::cos(w * t), 0.0);
        a = Vec3(-r * w * w * std::cos(w * t), -r * w * w * std::sin(w * t), 0.0);
        break;
      }
      case TrajectoryShape::kLine: {
        const Vec3 dir(std::sin(cfg.line_heading), std::cos(cfg.line_heading), 0.0);
        p = Vec3(0.0, 0.0, cfg.height_m) + cfg.line_speed * t * dir;
        v = cfg.line_speed * dir;
        a = Vec3::Zero();
        break;
      }
      case TrajectoryShape::kSpline: {
        Vec3 dp, ddp;
        sx->eval(t, p.x(), dp.x(), ddp.x());
        sy->eval(t, p.y(), dp.y(), ddp.y());
        sz->eval(t, p.z(), dp.z(), ddp.z());
        v = dp;
        a = ddp;
        break;
      }
    }
  }

  double heading(double t, const Vec3& v) const {
    switch (cfg.yaw_mode) {
      case YawMode::kFixed:
        return cfg.yaw0_rad;
      case YawMode::kSpin:
        return cfg.yaw0_rad + cfg.angular_rate * t;
      case YawMode::kOscillate:
        return cfg.yaw0_rad +
               cfg.yaw_amplitude_rad *
                   std::sin(2.0 * M_PI * t / cfg.yaw_period_s);
      case YawMode::kTangent: {
        if (v.head<2>().norm() < 1e-9) return cfg.yaw0_rad;
        return std::atan2(v.x(), v.y());
      }
    }
    return cfg.yaw0_rad;
  }

  Rotation attitude(double t) const {
    Vec3 p, v, a;
    kinematics(t, p, v, a);
    const double psi = heading(t, v);
    Vec3 bz(0.0, 0.0, 1.0);
    if (cfg.attitude_mode == AttitudeMode::kThrustAligned) {
      bz = (a + Vec3(0.0, 0.0, kGravity)).normalized();
    }
    const Vec3 h(std::sin(psi), std::cos(psi), 0.0);
    Vec3 by = h - h.dot(bz) * bz;
    if (by.norm() < 1e-9) by = Vec3(0.0, 1.0, 0.0);
    by.normalize();
    const Vec3 bx = by.cross(bz);
    Mat3 r;
    r.col(0) = bx;
    r.col(1) = by;
    r.col(2) = bz;
    return Rotation(r, Rotation::unchecked{});
  }
};

}  // namespace

std::vector<TrajectorySample> generate_trajectory(const TrajectoryConfig& cfg,
                                                  double rate_hz) {
  if (rate_hz <= 0.0) throw std::invalid_argument("trajectory rate must be > 0");
  if (cfg.duration_s <= 0.0) throw std::invalid_argument("duration must be > 0");
  if (cfg.shape == TrajectoryShape::kCircle && cfg.radius_m <= 0.0) {
    throw std::invalid_argument("circle radius must be > 0");
  }
  TrajEval eval(cfg);
  const auto n = static_cast<size_t>(std::llround(cfg.duration_s * rate_hz));
  std::vector<TrajectorySample> out;
  out.reserve(n + 1);
  for (size_t i = 0; i <= n; ++i) {
    TrajectorySample s;
    s.t = static_cast<double>(i) / rate_hz;
    eval.kinematics(s.t, s.p, s.v, s.a);
    s.rot = eval.attitude(s.t);
    out.push_back(s);
  }
  return out;
}

std::vector<ImuSample> synthesize_imu(
    const std::vector<TrajectorySample>& truth, const NoiseConfig& noise,
    double rate_hz) {
  if (truth.size() < 2) throw std::invalid_argument("trajectory too short");
  const double dt = truth[1].t - truth[0].t;
  if (std::abs(dt - 1.0 / rate_hz) > 1e-9) {
    throw std::invalid_argument("trajectory sample rate does not match IMU rate");
  }
  std::mt19937_64 rng(splitmix64(noise.seed ^ 0x494d55ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<ImuSample> out;
  out.reserve(truth.size());
  Vec3 bias = noise.gyro_bias;
  const Vec3 g_world(0.0, 0.0, -kGravity);
  for (size_t k = 0; k < truth.size(); ++k) {
    const auto& s = truth[k];
    // central log-difference of the attitude gives the body rate
    const size_t lo = k == 0 ? 0 : k - 1;
    const size_t hi = k + 1 < truth.size() ? k + 1 : k;
    const Vec3 omega =
        so3_log(truth[lo].rot.matrix().transpose() * truth[hi].rot.matrix()) /
        (truth[hi].t - truth[lo].t);

    ImuSample m;
    m.t = s.t;
    m.accel = s.rot.matrix().transpose() * (s.a - g_world) +
              noise.accel_std * Vec3(gauss(rng), gauss(rng), gauss(rng));
    if (noise.gyro_bias_drift > 0.0) {
      bias += noise.gyro_bias_drift * std::sqrt(dt) *
              Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    m.gyro = omega + bias +
             noise.gyro_std * Vec3(gauss(rng), gauss(rng), gauss(rng));
    out.push_back(m);
  }
  return out;
}

double bearing_azimuth(const Vec3& position, const Rotation& attitude,
                       const Vec3& target) {
  const Vec3 d = attitude.matrix().transpose() * (target - position);
  return std::atan2(d.x(), d.y());
}

CsiSnapshot synthesize_csi(const Vec3& position, const Rotation& attitude,
                           const Vec3& ap_position, const ArrayGeometry& array,
                           const MultipathConfig& mp, const NoiseConfig& noise,
                           uint64_t packet_index, double t,
                           const Vec3& body_rate) {
  if ((ap_position - position).norm() < 1e-6) {
    throw std::invalid_argument("AP coincides with the array");
  }
  for (const auto& r : mp.reflectors) {
    if (r.excess_delay_ns <= 0.0) {
      throw std::invalid_argument("reflector excess delay must be > 0");
    }
  }
  const int m_ant = array.antennas;
  const int k_sub = array.subcarriers;
  if (m_ant < 2 || k_sub < 2) {
    throw std::invalid_argument("array needs >= 2 antennas and subcarriers");
  }

  const double theta_d = bearing_azimuth(position, attitude, ap_position);
  const double tau_d_ns = (ap_position - position).norm() / kSpeedOfLight * 1e9;

  struct Path {
    double amp, theta, tau_ns;
  };
  std::vector<Path> paths;
  paths.push_back({std::pow(10.0, -mp.direct_attenuation_db / 20.0), theta_d,
                   tau_d_ns});
  for (const auto& r : mp.reflectors) {
    paths.push_back({r.relative_amplitude,
                     theta_d + r.aoa_offset_deg * M_PI / 180.0,
                     tau_d_ns + r.excess_delay_ns});
  }

  std::mt19937_64 rng(
      splitmix64(noise.seed ^ 0x437349ULL ^ splitmix64(packet_index)));
  std::normal_distribution<double> gauss(0.0, 1.0);

  CsiSnapshot snap;
  snap.t = t;
  snap.carrier_hz = array.carrier_hz;
  snap.subcarrier_spacing_hz = array.subcarrier_spacing_hz;
  snap.antenna_spacing_m = array.spacing();
  snap.behind_array = std::abs(theta_d) >= M_PI / 2.0 - 1e-9;
  snap.x.resize(m_ant, k_sub);

  const double noise_std = std::pow(10.0, -noise.csi_snr_db / 20.0);
  std::vector<double> phase_jitter(m_ant, 0.0);
  if (noise.coherence_phase_std > 0.0) {
    const double sigma = noise.coherence_phase_std * body_rate.norm();
    for (int m = 0; m < m_ant; ++m) phase_jitter[m] = sigma * gauss(rng);
  }

  for (int m = 0; m < m_ant; ++m) {
    for (int k = 0; k < k_sub; ++k) {
      std::complex<double> h(0.0, 0.0);
      for (const auto& p : paths) {
        const double phase =
            -2.0 * M_PI *
            (snap.antenna_spacing_m * m * std::sin(p.theta) * array.carrier_hz /
                 kSpeedOfLight +
             array.subcarrier_spacing_hz * k * p.tau_ns * 1e-9);
        h += p.amp * std::exp(std::complex<double>(0.0, phase));
      }
      h *= std::exp(std::complex<double>(0.0, phase_jitter[m]));
      h += noise_std * std::complex<double>(gauss(rng), gauss(rng)) / std::sqrt(2.0);
      snap.x(m, k) = h;
    }
  }
  return snap;
}

ScenarioBundle run_scenario(const ScenarioConfig& cfg) {
  if (cfg.csi_rate_hz > cfg.imu_rate_hz) {
    throw std::invalid_argument("CSI rate must not exceed the IMU rate");
  }
  ScenarioBundle b;
  b.ap_position = cfg.ap_position;
  b.truth = generate_trajectory(cfg.trajectory, cfg.imu_rate_hz);
  b.imu = synthesize_imu(b.truth, cfg.noise, cfg.imu_rate_hz);
  b.truth_at_csi = generate_trajectory(cfg.trajectory, cfg.csi_rate_hz);

  const Rotation r0 = b.truth_at_csi.front().rot;
  for (size_t i = 0; i < b.truth_at_csi.size(); ++i) {
    const auto& s = b.truth_at_csi[i];
    AoaTruth g;
    g.t = s.t;
    g.theta_deg = bearing_azimuth(s.p, s.rot, cfg.ap_position) * 180.0 / M_PI;
    const Vec3 d0 = r0.matrix().transpose() * (cfg.ap_position - s.p);
    g.theta0_deg = std::atan2(d0.x(), d0.y()) * 180.0 / M_PI;
    g.tof_ns = (cfg.ap_position - s.p).norm() / kSpeedOfLight * 1e9;
    b.aoa_truth.push_back(g);

    if (cfg.with_csi) {
      const size_t lo = i == 0 ? 0 : i - 1;
      const size_t hi = i + 1 < b.truth_at_csi.size() ? i + 1 : i;
      const Vec3 omega = so3_log(b.truth_at_csi[lo].rot.matrix().transpose() *
                                 b.truth_at_csi[hi].rot.matrix()) /
                         (b.truth_at_csi[hi].t - b.truth_at_csi[lo].t);
      b.csi.push_back(synthesize_csi(s.p, s.rot, cfg.ap_position, cfg.array,
                                     cfg.multipath, cfg.noise, i, s.t, omega));
    }
  }
  return b;
}

void write_imu_csv(const std::string& path,
                   const std::vector<ImuSample>& imu) {
  CsvWriter w(path, {"t", "ax", "ay", "az", "gx", "gy", "gz"});
  for (const auto& s : imu) {
    w.row({s.t, s.accel.x(), s.accel.y(), s.accel.z(), s.gyro.x(), s.gyro.y(),
           s.gyro.z()});
  }
}

void write_truth_csv(const std::string& path,
                     const std::vector<TrajectorySample>& truth) {
  CsvWriter w(path, {"t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy",
                     "qz"});
  for (const auto& s : truth) {
    const auto q = s.rot.quaternion();
    w.row({s.t, s.p.x(), s.p.y(), s.p.z(), s.v.x(), s.v.y(), s.v.z(), q.w(),
           q.x(), q.y(), q.z()});
  }
}

void write_csi_csv(const std::string& path,
                   const std::vector<CsiSnapshot>& csi) {
  CsvWriter w(path, {"t", "antenna", "subcarrier", "re", "im"});
  for (const auto& s : csi) {
    for (int m = 0; m < s.x.rows(); ++m) {
      for (int k = 0; k < s.x.cols(); ++k) {
        w.row({s.t, static_cast<double>(m), static_cast<double>(k),
               s.x(m, k).real(), s.x(m, k).imag()});
      }
    }
  }
}

}  // namespace wins
