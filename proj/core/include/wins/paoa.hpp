#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "wins/array_signal.hpp"
#include "wins/attitude.hpp"
#include "wins/geometry.hpp"
#include "wins/sensors.hpp"

namespace wins {

/// Predicted bearing for the next packet, split into its translation and
/// rotation parts; theta_pred = theta_prev + theta_t + theta_r, clamped to
/// the linear-array range.
struct AoaPrediction {
  double theta_pred_deg = 0.0;
  double theta_t_deg = 0.0;
  double theta_r_deg = 0.0;
  double window_halfwidth_deg = 20.0;
};

/// Current distance estimate to the AP; refreshed by the fusion estimator.
struct RangeGuess {
  double r_m = 3.0;
};

/// Bearing with the attitude contribution removed: a world-frame (frame-0)
/// direction usable for triangulation.
struct Paoa {
  double t = 0.0;
  Vec3 d0 = Vec3::UnitY();    // unit direction in the initial body frame
  double theta0_deg = 0.0;    // azimuth of d0
  AoaEstimate source;         // raw (theta, tau) selection
  Rotation attitude;          // solved body-to-frame-0 rotation at t
  bool fallback = false;      // windowed search failed, full grid used
};

/// Acceleration-driven displacement over one packet interval, expressed in
/// the initial frame: R alpha - g0 dt^2 / 2. The velocity term is omitted by
/// construction (it is unobservable from the IMU alone over the interval);
/// pass velocity_w to add v dt when an external velocity estimate exists.
Vec3 predict_translation(std::span<const ImuSample> imu,
                         const Rotation& r_body_to_frame0,
                         const Vec3& gravity_frame0, double dt,
                         const std::optional<Vec3>& velocity_w = std::nullopt);

/// theta_t is the signed arc angle of the displacement component
/// perpendicular to the current bearing; theta_r the yaw of the relative
/// rotation. bearing0 is the current unit bearing in the initial frame.
AoaPrediction predict_aoa(double theta_prev_deg, const Vec3& translation0,
                          const Rotation& rel_rot, const RangeGuess& range,
                          const Vec3& bearing0,
                          double window_halfwidth_deg = 20.0);

struct PaoaConfig {
  double window_halfwidth_deg = 20.0;
  double theta_step_deg = 1.0;
  double tau_step_ns = 1.0;
  int n_paths = 3;
  int sub_antennas = 2;
  int sub_carriers = 15;
  int init_packets = 10;
  double range_init_m = 3.0;
  double min_range_m = 0.1;
  Vec3 gravity_frame0 = Vec3(0.0, 0.0, 9.8);
  int attitude_window = 30;
  int attitude_stride = 1;
  ConstraintOptions attitude_opts;
  /// Widen the search window in proportion to a packet gap, relative to the
  /// nominal CSI period.
  double nominal_csi_period_s = 0.02;
};

struct GridEvalCounts {
  long windowed = 0;    // nodes evaluated by the windowed path (+fallbacks)
  long full_equiv = 0;  // what a full-grid search would have evaluated
  long init = 0;        // initialization packets (full grid by design)
  long fallback_packets = 0;
  long packets = 0;
};

/// Streaming estimator: feed time-ordered IMU and CSI; each CSI packet after
/// initialization yields one PAoA. Single-owner state, results immutable.
class PaoaEstimator {
 public:
  explicit PaoaEstimator(const PaoaConfig& cfg);

  void push_imu(const ImuSample& s);
  std::optional<Paoa> push_csi(const CsiSnapshot& snap);

  /// Fusion feedback: refreshed distance to the AP.
  void update_range(double r_m);
  void update_gravity(const Vec3& gravity_frame0);

  const GridEvalCounts& eval_counts() const { return counts_; }
  const RangeGuess& range() const { return range_; }
  /// Wall-clock spent in spectrum evaluation + peak finding, seconds.
  double spectrum_seconds() const { return spectrum_seconds_; }
  bool initialized() const { return initialized_; }

 private:
  std::span<const ImuSample> imu_between(double t0, double t1) const;

  PaoaConfig cfg_;
  std::vector<ImuSample> imu_;
  std::vector<CsiSnapshot> init_buffer_;
  std::optional<AttitudeTracker> tracker_;
  double prev_t_ = 0.0;
  double prev_theta_deg_ = 0.0;
  Rotation prev_attitude_;
  RangeGuess range_;
  Vec3 gravity0_ = Vec3(0.0, 0.0, 9.8);
  GridEvalCounts counts_;
  double spectrum_seconds_ = 0.0;
  bool initialized_ = false;
};

struct PaoaStreamResult {
  std::vector<Paoa> paoas;
  GridEvalCounts counts;
  double spectrum_seconds = 0.0;
};

PaoaStreamResult estimate_paoa_stream(std::span<const CsiSnapshot> csi,
                                      std::span<const ImuSample> imu,
                                      const PaoaConfig& cfg);

void write_paoa_csv(const std::string& path, const std::vector<Paoa>& paoas);

}  // namespace wins
