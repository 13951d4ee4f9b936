#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wins/geometry.hpp"

namespace wins {

/// Pairwise relative rotation between frames i < j; rel maps frame-j
/// coordinates into frame i.
struct RelativeRotationConstraint {
  int i = 0;
  int j = 0;
  Rotation rel;
  double weight = 1.0;
};

/// Absolute rotations per frame, frame 0 anchored to the identity exactly.
/// Entry k maps frame-k coordinates into frame-0 coordinates.
struct AttitudeSolution {
  std::vector<Rotation> rot;
};

/// Solves the relaxed linear system over all rotation columns; the solution
/// subspace is read off the three smallest right-singular directions, each
/// 3x3 block projected back to SO(3), and the whole set re-anchored so the
/// first frame is exactly the identity. Throws if the constraint graph does
/// not connect every frame to frame 0, or if the system is rank deficient
/// beyond the expected three-dimensional solution space.
AttitudeSolution solve_rotations(
    std::span<const RelativeRotationConstraint> constraints, int n_frames);

/// Test seam: recover rotations from an explicit nullspace basis (3n x 3).
AttitudeSolution attitude_from_basis(const Eigen::MatrixXd& basis,
                                     int n_frames);

/// Yaw increment measured by the bearing change between two frames after
/// removing the translation-induced part, radians.
struct AoaYawIncrement {
  int from_frame = 0;
  int to_frame = 0;
  double dpsi_rad = 0.0;
};

enum class AoaYawMode {
  /// One edge per increment, between consecutive frames.
  kConsecutive,
  /// Increments composed from the first frame outward; intermediate bearing
  /// noise telescopes away, so each edge carries an absolute yaw reference
  /// and gyro bias cannot accumulate across the graph.
  kAnchored,
};

struct ConstraintOptions {
  double gyro_weight = 1.0;
  double aoa_weight = 2.0;
  AoaYawMode aoa_mode = AoaYawMode::kAnchored;
  Vec3 yaw_axis = Vec3(0, 0, 1);  // gravity direction in the body frame
};

/// Consecutive-frame gyro constraints plus optional bearing-derived yaw
/// constraints. frame_times must lie inside the IMU stream span.
std::vector<RelativeRotationConstraint> build_constraints(
    std::span<const ImuSample> imu, std::span<const double> frame_times,
    std::span<const AoaYawIncrement> aoa_yaw = {},
    const ConstraintOptions& opts = {});

/// Sliding-window attitude estimate: gyro increments chain frames, bearing
/// yaw increments de-drift them, the windowed rotation-averaging solve runs
/// every `stride` frames. Frames that leave the window freeze their solved
/// attitude, which anchors the next window.
class AttitudeTracker {
 public:
  AttitudeTracker(int window, const ConstraintOptions& opts, int stride = 1);

  /// rel maps the new frame into the previous one; dpsi is the bearing-
  /// derived yaw increment over the same interval. Returns the solved
  /// body-to-frame-0 attitude of the new frame.
  Rotation push(const Rotation& rel, double dpsi_rad);
  Rotation current() const;
  int frames() const { return static_cast<int>(entries_.size()); }

 private:
  void solve_window();

  struct Entry {
    Rotation rel;
    double dpsi = 0.0;
    Rotation attitude;
  };
  int window_;
  int stride_;
  ConstraintOptions opts_;
  std::vector<Entry> entries_;  // oldest first
  Rotation base_;
  int since_solve_ = 0;
  bool started_ = false;
};

}  // namespace wins
