#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wins/geometry.hpp"
#include "wins/sensors.hpp"

namespace wins {

enum class TrajectoryShape { kCircle, kLine, kSpline };
enum class YawMode { kFixed, kTangent, kSpin, kOscillate };
enum class AttitudeMode { kLevel, kThrustAligned };

struct Waypoint {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
};

struct TrajectoryConfig {
  TrajectoryShape shape = TrajectoryShape::kCircle;
  double radius_m = 2.0;        // circle
  double angular_rate = 0.3;    // rad/s; circle sweep or spin yaw rate
  double height_m = 1.5;
  double duration_s = 60.0;
  YawMode yaw_mode = YawMode::kTangent;
  double yaw0_rad = 0.0;
  double yaw_amplitude_rad = 0.7;  // oscillate mode
  double yaw_period_s = 10.0;      // oscillate mode
  AttitudeMode attitude_mode = AttitudeMode::kThrustAligned;
  double line_speed = 0.0;      // line
  double line_heading = 0.0;    // rad, world azimuth of motion
  std::vector<Waypoint> waypoints;  // spline
};

struct NoiseConfig {
  double accel_std = 0.01;          // m/s^2 per sample
  double gyro_std = 0.01;           // rad/s per sample
  Vec3 gyro_bias = Vec3::Zero();    // rad/s, constant
  double gyro_bias_drift = 0.0;     // rad/s per sqrt(s), random walk
  double aoa_std_deg = 1.0;         // for geometric bearing synthesis
  double csi_snr_db = 25.0;
  /// Antenna phase jitter, rad per (rad/s) of body angular rate. Models the
  /// loss of channel coherence while the array rotates; 0 disables it.
  double coherence_phase_std = 0.0;
  uint64_t seed = 1;
};

struct Reflector {
  double relative_amplitude = 0.5;  // of the unattenuated direct path
  double excess_delay_ns = 50.0;
  double aoa_offset_deg = -40.0;
};

struct MultipathConfig {
  std::vector<Reflector> reflectors;
  /// Obstacle emulation: extra loss applied to the direct path only, dB.
  double direct_attenuation_db = 0.0;
};

struct TrajectorySample {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Rotation rot;  // body -> world
};

std::vector<TrajectorySample> generate_trajectory(const TrajectoryConfig& cfg,
                                                  double rate_hz);

/// accel = R^T (a_world - g_world) + noise, gyro = omega_body + bias + noise;
/// g_world = (0,0,-9.8). Deterministic for a fixed NoiseConfig::seed.
std::vector<ImuSample> synthesize_imu(
    const std::vector<TrajectorySample>& truth, const NoiseConfig& noise,
    double rate_hz);

/// Forward multipath model:
///   X[m,k] = sum_p A_p exp(-j 2 pi (d m sin(theta_p) f_c / c
///                                    + f_delta k tau_p)) + noise.
/// theta is the azimuth in the array frame (boresight +y, positive toward
/// +x); tau the path delay. body_rate enables the coherence jitter model.
CsiSnapshot synthesize_csi(const Vec3& position, const Rotation& attitude,
                           const Vec3& ap_position, const ArrayGeometry& array,
                           const MultipathConfig& mp, const NoiseConfig& noise,
                           uint64_t packet_index, double t,
                           const Vec3& body_rate = Vec3::Zero());

/// Azimuth of a world-frame point in the array frame of a pose, radians.
double bearing_azimuth(const Vec3& position, const Rotation& attitude,
                       const Vec3& target);

struct AoaTruth {
  double t = 0.0;
  double theta_deg = 0.0;    // bearing in the array frame at t
  double theta0_deg = 0.0;   // bearing in the initial (frame-0) frame
  double tof_ns = 0.0;
};

struct ScenarioConfig {
  TrajectoryConfig trajectory;
  NoiseConfig noise;
  MultipathConfig multipath;
  ArrayGeometry array;
  Vec3 ap_position = Vec3(4.0, 0.0, 1.5);
  double imu_rate_hz = 200.0;
  double csi_rate_hz = 50.0;
  bool with_csi = true;  // CSI synthesis is the expensive part; optional
};

struct ScenarioBundle {
  std::vector<TrajectorySample> truth;    // at IMU rate
  std::vector<ImuSample> imu;
  std::vector<CsiSnapshot> csi;           // empty when with_csi = false
  std::vector<AoaTruth> aoa_truth;        // at CSI rate
  std::vector<TrajectorySample> truth_at_csi;
  Vec3 ap_position = Vec3::Zero();
};

/// Deterministic end-to-end synthesis; bit-identical for identical seeds.
/// Throws if the CSI rate exceeds the IMU rate.
ScenarioBundle run_scenario(const ScenarioConfig& cfg);

void write_imu_csv(const std::string& path, const std::vector<ImuSample>& imu);
void write_truth_csv(const std::string& path,
                     const std::vector<TrajectorySample>& truth);
void write_csi_csv(const std::string& path,
                   const std::vector<CsiSnapshot>& csi);

}  // namespace wins
