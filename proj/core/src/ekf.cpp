#include "wins/ekf.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace wins {

namespace {
const Vec3 kGravityWorld(0.0, 0.0, -9.8);
const Vec3 kGravityColumn(0.0, 0.0, 9.8);

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}
}  // namespace

Mat12 ekf_transition(const Rotation& r_bw, const Vec3& f_body,
                     const Vec3& w_body, double dt) {
  Mat12 phi = Mat12::Identity();
  const Mat3 rs = r_bw.matrix() * skew(f_body);
  phi.block<3, 3>(0, 0) = so3_exp(w_body * dt).transpose();
  phi.block<3, 3>(3, 0) = -rs * dt;
  phi.block<3, 3>(6, 0) = -0.5 * rs * dt * dt;
  phi.block<3, 3>(6, 3) = dt * Mat3::Identity();
  return phi;
}

double ekf_azimuth(const EkfState& x) {
  const Vec3 d = x.r_bw.matrix().transpose() * (x.c - x.p);
  return std::atan2(d.x(), d.y());
}

Eigen::Matrix<double, 1, 12> ekf_azimuth_jacobian(const EkfState& x) {
  const Mat3 rt = x.r_bw.matrix().transpose();
  const Vec3 d = rt * (x.c - x.p);
  const double den = d.x() * d.x() + d.y() * d.y();
  Eigen::RowVector3d j(d.y() / den, -d.x() / den, 0.0);
  Eigen::Matrix<double, 1, 12> h = Eigen::Matrix<double, 1, 12>::Zero();
  h.block<1, 3>(0, 0) = j * skew(d);
  h.block<1, 3>(0, 6) = -j * rt;
  h.block<1, 3>(0, 9) = j * rt;
  return h;
}

AoaEkf::AoaEkf(const EkfConfig& cfg, const EkfState& init,
               const Vec12& p0_diag)
    : cfg_(cfg), x_(init), p_(p0_diag.asDiagonal()) {}

void AoaEkf::propagate(const ImuSample& s) {
  if (!clock_set_) {
    clock_set_ = true;
    t_ = s.t;
    return;
  }
  const double dt = s.t - t_;
  t_ = s.t;
  if (dt <= 0.0) return;

  const Mat12 phi = ekf_transition(x_.r_bw, s.accel, s.gyro, dt);

  const Mat3 r = x_.r_bw.matrix();
  Eigen::Matrix<double, 12, 6> g = Eigen::Matrix<double, 12, 6>::Zero();
  g.block<3, 3>(0, 0) = dt * Mat3::Identity();  // gyro -> attitude
  g.block<3, 3>(3, 3) = dt * r;                 // accel -> velocity
  g.block<3, 3>(6, 3) = 0.5 * dt * dt * r;      // accel -> position
  Eigen::Matrix<double, 6, 6> q = Eigen::Matrix<double, 6, 6>::Zero();
  q.topLeftCorner<3, 3>() = cfg_.gyro_std * cfg_.gyro_std * Mat3::Identity();
  q.bottomRightCorner<3, 3>() =
      cfg_.accel_std * cfg_.accel_std * Mat3::Identity();

  p_ = phi * p_ * phi.transpose() + g * q * g.transpose();

  const Vec3 a_w = r * s.accel + kGravityWorld;
  x_.p += x_.v * dt + 0.5 * a_w * dt * dt;
  x_.v += a_w * dt;
  x_.r_bw = Rotation(r * so3_exp(s.gyro * dt), Rotation::unchecked{});
  if (x_.r_bw.orthonormality_error() > 1e-10) {
    x_.r_bw = project_so3(x_.r_bw.matrix());
  }
}

AoaEkf::UpdateOutcome AoaEkf::update_azimuth(double theta_meas_rad) {
  if ((x_.c - x_.p).head<2>().norm() < 1e-6) {
    throw std::invalid_argument("update_azimuth: AP overhead or coincident");
  }
  UpdateOutcome out;
  const Eigen::Matrix<double, 1, 12> h = ekf_azimuth_jacobian(x_);
  const double s = (h * p_ * h.transpose())(0, 0) +
                   cfg_.sigma_theta_rad * cfg_.sigma_theta_rad;
  const double nu = wrap_angle(theta_meas_rad - ekf_azimuth(x_));
  out.innovation_rad = nu;
  out.nis = nu * nu / s;
  if (std::abs(nu) > cfg_.gate_sigma * std::sqrt(s)) {
    out.accepted = false;
    return out;
  }
  const Vec12 k = p_ * h.transpose() / s;
  const Vec12 dx = k * nu;
  x_.r_bw = Rotation(x_.r_bw.matrix() * so3_exp(dx.segment<3>(0)),
                     Rotation::unchecked{});
  if (x_.r_bw.orthonormality_error() > 1e-10) {
    x_.r_bw = project_so3(x_.r_bw.matrix());
  }
  x_.v += dx.segment<3>(3);
  x_.p += dx.segment<3>(6);
  x_.c += dx.segment<3>(9);
  const Mat12 ikh = Mat12::Identity() - k * h;
  p_ = ikh * p_ * ikh.transpose() +
       k * cfg_.sigma_theta_rad * cfg_.sigma_theta_rad * k.transpose();
  return out;
}

std::vector<LinearizationPoint> noiseless_linearization(
    const EkfState& x0, std::span<const ImuSample> imu, double aoa_rate_hz) {
  std::vector<LinearizationPoint> pts;
  if (imu.size() < 2) throw std::invalid_argument("IMU stream too short");
  EkfState x = x0;
  const double aoa_period = 1.0 / aoa_rate_hz;
  double next_aoa = imu.front().t;
  for (size_t i = 0; i + 1 < imu.size(); ++i) {
    const double dt = imu[i + 1].t - imu[i].t;
    LinearizationPoint pt;
    pt.x = x;
    pt.f_body = imu[i].accel;
    pt.w_body = imu[i].gyro;
    pt.dt = dt;
    if (imu[i].t >= next_aoa - 1e-9) {
      pt.aoa = true;
      next_aoa += aoa_period;
    }
    pts.push_back(pt);

    const Mat3 r = x.r_bw.matrix();
    const Vec3 a_w = r * imu[i].accel + kGravityWorld;
    x.p += x.v * dt + 0.5 * a_w * dt * dt;
    x.v += a_w * dt;
    x.r_bw = Rotation(r * so3_exp(imu[i].gyro * dt), Rotation::unchecked{});
  }
  return pts;
}

std::vector<LinearizationPoint> perturb_linearization(
    std::vector<LinearizationPoint> points, double pos_std_m,
    double angle_std_rad, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& pt : points) {
    const Vec3 dtheta =
        angle_std_rad * Vec3(gauss(rng), gauss(rng), gauss(rng));
    pt.x.r_bw = Rotation(pt.x.r_bw.matrix() * so3_exp(dtheta),
                         Rotation::unchecked{});
    pt.x.p += pos_std_m * Vec3(gauss(rng), gauss(rng), gauss(rng));
    pt.x.v += pos_std_m * Vec3(gauss(rng), gauss(rng), gauss(rng));
    pt.x.c += pos_std_m * Vec3(gauss(rng), gauss(rng), gauss(rng));
  }
  return points;
}

Eigen::MatrixXd build_observability(std::span<const LinearizationPoint> pts) {
  if (pts.size() < 4) {
    throw std::invalid_argument("build_observability: need >= 4 points");
  }
  std::vector<Eigen::Matrix<double, 1, 12>> rows;
  Mat12 phi_cum = Mat12::Identity();
  for (const auto& pt : pts) {
    if (pt.aoa) {
      rows.push_back(ekf_azimuth_jacobian(pt.x) * phi_cum);
    }
    phi_cum = ekf_transition(pt.x.r_bw, pt.f_body, pt.w_body, pt.dt) * phi_cum;
  }
  Eigen::MatrixXd o(rows.size(), 12);
  for (size_t i = 0; i < rows.size(); ++i) o.row(i) = rows[i];
  return o;
}

int numerical_rank(const Eigen::MatrixXd& o, double tol_factor) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(o);
  const auto& sv = svd.singularValues();
  const double tol = tol_factor * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  return rank;
}

Eigen::Matrix<double, 12, 4> observability_nullspace(const EkfState& x1) {
  Eigen::Matrix<double, 12, 4> n = Eigen::Matrix<double, 12, 4>::Zero();
  n.block<3, 3>(6, 0) = Mat3::Identity();
  n.block<3, 3>(9, 0) = Mat3::Identity();
  n.block<3, 1>(0, 3) = x1.r_bw.matrix().transpose() * kGravityColumn;
  n.block<3, 1>(3, 3) = -skew(x1.v) * kGravityColumn;
  n.block<3, 1>(6, 3) = -skew(x1.p) * kGravityColumn;
  n.block<3, 1>(9, 3) = -skew(x1.c) * kGravityColumn;
  return n;
}

NullspaceReport verify_nullspace(const Eigen::MatrixXd& o,
                                 const EkfState& x1) {
  const auto n = observability_nullspace(x1);
  const double o_norm = std::max(o.norm(), 1e-300);
  NullspaceReport rep;
  rep.ratio_full = (o * n).norm() / o_norm;
  rep.ratio_t = (o * n.leftCols<3>()).norm() / o_norm;
  rep.ratio_r = (o * n.col(3)).norm() / o_norm;
  return rep;
}

}  // namespace wins
