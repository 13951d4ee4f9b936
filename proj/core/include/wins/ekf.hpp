#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "wins/geometry.hpp"

namespace wins {

using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;

/// Full state of the bearing-only feasibility filter: attitude, velocity and
/// position in the world frame, plus the (static) AP position. The error
/// state is 12-dim with a 3-dim body-side attitude error.
struct EkfState {
  Rotation r_bw;  // body -> world
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 c = Vec3::Zero();
};

struct EkfConfig {
  double accel_std = 0.01;        // m/s^2 per sample
  double gyro_std = 0.01;         // rad/s per sample
  double sigma_theta_rad = M_PI / 180.0;
  double gate_sigma = 5.0;
};

/// Exact Jacobian of one discrete propagation step with respect to the
/// error state (d_theta, d_v, d_p, d_c).
Mat12 ekf_transition(const Rotation& r_bw, const Vec3& f_body,
                     const Vec3& w_body, double dt);

/// Azimuth of the AP in the body frame, the scalar measurement.
double ekf_azimuth(const EkfState& x);
Eigen::Matrix<double, 1, 12> ekf_azimuth_jacobian(const EkfState& x);

class AoaEkf {
 public:
  AoaEkf(const EkfConfig& cfg, const EkfState& init, const Vec12& p0_diag);

  /// Strapdown propagation; dt comes from consecutive sample timestamps.
  void propagate(const ImuSample& s);

  struct UpdateOutcome {
    bool accepted = true;
    double innovation_rad = 0.0;
    double nis = 0.0;
  };
  UpdateOutcome update_azimuth(double theta_meas_rad);

  const EkfState& state() const { return x_; }
  const Mat12& covariance() const { return p_; }
  double time() const { return t_; }

 private:
  EkfConfig cfg_;
  EkfState x_;
  Mat12 p_;
  double t_ = 0.0;
  bool clock_set_ = false;
};

/// One node of a discrete linearization trajectory: the state the Jacobians
/// are evaluated at, the body force driving the step after it, and whether
/// a bearing row is emitted here.
struct LinearizationPoint {
  EkfState x;
  Vec3 f_body = Vec3::Zero();
  Vec3 w_body = Vec3::Zero();
  double dt = 0.0;
  bool aoa = false;
};

/// Runs the noiseless discrete propagation from x0 along the IMU inputs,
/// marking bearing rows at aoa_rate; the returned points lie exactly on one
/// trajectory of the discrete model, which is what makes the analytic
/// nullspace exact.
std::vector<LinearizationPoint> noiseless_linearization(
    const EkfState& x0, std::span<const ImuSample> imu, double aoa_rate_hz);

/// Independently perturbs every point, standing in for linearizing at
/// estimated states.
std::vector<LinearizationPoint> perturb_linearization(
    std::vector<LinearizationPoint> points, double pos_std_m,
    double angle_std_rad, uint64_t seed);

/// Stacked H_k Phi_{k,1} rows over the marked points.
Eigen::MatrixXd build_observability(std::span<const LinearizationPoint> pts);

int numerical_rank(const Eigen::MatrixXd& o, double tol_factor = 1e-8);

/// Analytic unobservable directions at the first linearization point:
/// three global translations and the rotation about gravity.
Eigen::Matrix<double, 12, 4> observability_nullspace(const EkfState& x1);

struct NullspaceReport {
  double ratio_full = 0.0;  // ||O N|| / ||O||
  double ratio_t = 0.0;     // translation block
  double ratio_r = 0.0;     // gravity-rotation column
};

NullspaceReport verify_nullspace(const Eigen::MatrixXd& o,
                                 const EkfState& x1);

}  // namespace wins
