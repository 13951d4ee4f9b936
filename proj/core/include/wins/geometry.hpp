#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace wins {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Timestamped accelerometer + gyroscope reading, body frame.
/// accel is specific force (includes the gravity reaction), m/s^2; gyro rad/s.
struct ImuSample {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
};

Mat3 skew(const Vec3& v);

/// Rodrigues exponential map so(3) -> SO(3).
Mat3 so3_exp(const Vec3& axis_angle);

/// Log map SO(3) -> so(3); safe near identity and near pi.
Vec3 so3_log(const Mat3& r);

/// SO(3) element. Stored as a 3x3 matrix; constructors validate
/// orthonormality (R^T R = I and det = +1 within 1e-9) unless the
/// matrix is produced by an operation that preserves the group.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation from_matrix(const Mat3& m);
  static Rotation from_quaternion(const Eigen::Quaterniond& q);
  static Rotation from_axis_angle(const Vec3& axis_angle) {
    return Rotation(so3_exp(axis_angle), unchecked{});
  }
  static Rotation rot_x(double angle_rad);
  static Rotation rot_y(double angle_rad);
  static Rotation rot_z(double angle_rad);

  const Mat3& matrix() const { return m_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(m_); }

  Rotation inverse() const { return Rotation(m_.transpose(), unchecked{}); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation operator*(const Rotation& o) const {
    return Rotation(m_ * o.m_, unchecked{});
  }

  /// Geodesic distance in radians.
  double angle_to(const Rotation& o) const;

  /// Yaw of the rotation about +z, atan2(m10, m00).
  double yaw() const { return std::atan2(m_(1, 0), m_(0, 0)); }

  /// Frobenius departure from orthonormality, for drift checks.
  double orthonormality_error() const {
    return (m_.transpose() * m_ - Mat3::Identity()).norm();
  }

  struct unchecked {};
  Rotation(const Mat3& m, unchecked) : m_(m) {}

 private:
  Mat3 m_;
};

/// Nearest rotation in Frobenius norm: U diag(1,1,det(UV^T)) V^T from the SVD
/// of m. The det factor guards against reflections. Throws if m is singular.
Rotation project_so3(const Mat3& m);

/// Integrates body angular rate over the sample span with the midpoint rule,
/// composing increments onto r_start (r_start maps the start frame to some
/// parent; the returned rotation maps the end frame to the same parent).
/// Empty span returns r_start. Throws on non-monotone timestamps.
Rotation integrate_gyro(std::span<const ImuSample> samples,
                        const Rotation& r_start);

/// Relative rotation over the span starting from identity; maps coordinates
/// of the end frame into the start frame.
inline Rotation gyro_increment(std::span<const ImuSample> samples) {
  return integrate_gyro(samples, Rotation());
}

}  // namespace wins
