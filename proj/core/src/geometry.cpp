#include "wins/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace wins {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  const Mat3 s = skew(axis_angle);
  if (angle < 1e-10) {
    // second-order Taylor keeps the result orthonormal to ~angle^3
    return Mat3::Identity() + s + 0.5 * s * s;
  }
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Mat3::Identity() + a * s + b * s * s;
}

Vec3 so3_log(const Mat3& r) {
  const double tr = r.trace();
  const double cos_angle = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
  const double angle = std::acos(cos_angle);
  if (angle < 1e-10) {
    return Vec3(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)),
                0.5 * (r(1, 0) - r(0, 1)));
  }
  if (angle > M_PI - 1e-6) {
    // near pi the antisymmetric part degenerates; recover the axis from
    // the symmetric part R + I = 2(cos + (1-cos) aa^T)-ish
    Mat3 sym = 0.5 * (r + Mat3::Identity());
    int k;
    sym.diagonal().maxCoeff(&k);
    Vec3 axis = sym.col(k) / std::sqrt(std::max(sym(k, k), 1e-12));
    axis.normalize();
    // fix the sign with the antisymmetric part when it is not exactly zero
    Vec3 w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (w.dot(axis) < 0.0) axis = -axis;
    return angle * axis;
  }
  const double f = angle / (2.0 * std::sin(angle));
  return f * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
}

Rotation Rotation::from_matrix(const Mat3& m) {
  const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
  if (ortho > 1e-9 || std::abs(m.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("Rotation::from_matrix: not orthonormal");
  }
  return Rotation(m, unchecked{});
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  return Rotation(q.normalized().toRotationMatrix(), unchecked{});
}

Rotation Rotation::rot_x(double a) {
  return from_axis_angle(Vec3(a, 0, 0));
}
Rotation Rotation::rot_y(double a) {
  return from_axis_angle(Vec3(0, a, 0));
}
Rotation Rotation::rot_z(double a) {
  return from_axis_angle(Vec3(0, 0, a));
}

double Rotation::angle_to(const Rotation& o) const {
  return so3_log(m_.transpose() * o.m_).norm();
}

Rotation project_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) < 1e-12) {
    throw std::invalid_argument("project_so3: singular matrix");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  const double d = (u * v.transpose()).determinant();
  return Rotation(u * Vec3(1.0, 1.0, d).asDiagonal() * v.transpose(),
                  Rotation::unchecked{});
}

Rotation integrate_gyro(std::span<const ImuSample> samples,
                        const Rotation& r_start) {
  if (samples.empty()) return r_start;
  Mat3 r = r_start.matrix();
  for (size_t i = 0; i + 1 < samples.size(); ++i) {
    const double dt = samples[i + 1].t - samples[i].t;
    if (dt < 0.0) {
      throw std::invalid_argument("integrate_gyro: non-monotone timestamps");
    }
    if (dt == 0.0) continue;
    const Vec3 w_mid = 0.5 * (samples[i].gyro + samples[i + 1].gyro);
    r = r * so3_exp(w_mid * dt);
  }
  Rotation out(r, Rotation::unchecked{});
  if (out.orthonormality_error() > 1e-10) {
    out = project_so3(r);
  }
  return out;
}

}  // namespace wins
