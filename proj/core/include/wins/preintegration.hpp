#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "wins/geometry.hpp"

namespace wins {

using Mat9 = Eigen::Matrix<double, 9, 9>;

/// Relative IMU quantities over one inter-frame interval, independent of the
/// absolute initial state. alpha is the double-integrated rotated specific
/// force, beta the single integral, rot the gyro increment (maps end-frame
/// coordinates into the start frame). Gravity is not removed here; the
/// measurement model carries it.
struct Preintegrated {
  Vec3 alpha = Vec3::Zero();  // m
  Vec3 beta = Vec3::Zero();   // m/s
  Rotation rot;
  double dt = 0.0;
  /// Error covariance over (d_alpha, d_beta, d_theta); d_theta is the
  /// right-side rotation error of rot.
  Mat9 cov = Mat9::Zero();
};

/// Midpoint integration over the sample span. Noise stds are per-sample
/// (discrete); the covariance tracks each sample's noise exactly once even
/// though the midpoint rule consumes every interior sample twice.
Preintegrated preintegrate(std::span<const ImuSample> samples,
                           double accel_std, double gyro_std);

struct CovarianceCheckReport {
  Eigen::Matrix<double, 9, 1> propagated_diag;
  Eigen::Matrix<double, 9, 1> empirical_diag;
  /// Largest |empirical/propagated - 1| over the alpha and beta entries.
  double max_rel_dev_alpha_beta = 0.0;
  int trials = 0;
};

/// Monte-Carlo validation of the propagated covariance: re-draws sample
/// noise on top of the given noiseless samples and compares empirical
/// against propagated diagonals.
CovarianceCheckReport covariance_check(
    std::span<const ImuSample> noiseless_samples, double accel_std,
    double gyro_std, int trials, uint64_t seed = 1234);

}  // namespace wins
