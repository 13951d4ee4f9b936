#include "wins/preintegration.hpp"

#include <random>
#include <stdexcept>

namespace wins {

namespace {
using Mat15 = Eigen::Matrix<double, 15, 15>;
using Mat15x6 = Eigen::Matrix<double, 15, 6>;
}  // namespace

Preintegrated preintegrate(std::span<const ImuSample> samples,
                           double accel_std, double gyro_std) {
  if (samples.empty()) {
    throw std::invalid_argument("preintegrate: empty sample span");
  }
  Preintegrated out;
  out.dt = samples.back().t - samples.front().t;
  if (samples.size() == 1) return out;

  Mat3 r = Mat3::Identity();
  Vec3 alpha = Vec3::Zero();
  Vec3 beta = Vec3::Zero();

  // Error state augmented with the most recent sample's noise: the midpoint
  // rule consumes sample n in steps n-1 and n, and the pending slots carry
  // the correlation across the step boundary.
  // layout: [d_alpha, d_beta, d_theta, pending_accel, pending_gyro]
  Mat15 p = Mat15::Zero();
  p.block<3, 3>(9, 9) = accel_std * accel_std * Mat3::Identity();
  p.block<3, 3>(12, 12) = gyro_std * gyro_std * Mat3::Identity();
  Eigen::Matrix<double, 6, 6> qw = Eigen::Matrix<double, 6, 6>::Zero();
  qw.topLeftCorner<3, 3>() = accel_std * accel_std * Mat3::Identity();
  qw.bottomRightCorner<3, 3>() = gyro_std * gyro_std * Mat3::Identity();

  for (size_t i = 0; i + 1 < samples.size(); ++i) {
    const double dt = samples[i + 1].t - samples[i].t;
    if (dt < 0.0) {
      throw std::invalid_argument("preintegrate: non-monotone timestamps");
    }
    if (dt == 0.0) continue;
    const Vec3 w_mid = 0.5 * (samples[i].gyro + samples[i + 1].gyro);
    const Mat3 e = so3_exp(w_mid * dt);
    const Mat3 r_next = r * e;
    const Vec3 a0 = r * samples[i].accel;
    const Vec3 a1 = r_next * samples[i + 1].accel;
    const Vec3 a_int = 0.5 * (a0 + a1);

    const Mat3 s_bar =
        0.5 * (r * skew(samples[i].accel) + r_next * skew(samples[i + 1].accel));

    Mat15 f = Mat15::Zero();
    f.block<3, 3>(0, 0) = Mat3::Identity();
    f.block<3, 3>(0, 3) = dt * Mat3::Identity();
    f.block<3, 3>(0, 6) = -0.5 * dt * dt * s_bar;
    f.block<3, 3>(0, 9) = 0.25 * dt * dt * r;
    f.block<3, 3>(3, 3) = Mat3::Identity();
    f.block<3, 3>(3, 6) = -dt * s_bar;
    f.block<3, 3>(3, 9) = 0.5 * dt * r;
    f.block<3, 3>(6, 6) = e.transpose();
    f.block<3, 3>(6, 12) = 0.5 * dt * Mat3::Identity();

    Mat15x6 g = Mat15x6::Zero();
    g.block<3, 3>(0, 0) = 0.25 * dt * dt * r_next;
    g.block<3, 3>(3, 0) = 0.5 * dt * r_next;
    g.block<3, 3>(6, 3) = 0.5 * dt * Mat3::Identity();
    g.block<3, 3>(9, 0) = Mat3::Identity();
    g.block<3, 3>(12, 3) = Mat3::Identity();

    p = f * p * f.transpose() + g * qw * g.transpose();

    alpha += beta * dt + 0.5 * a_int * dt * dt;
    beta += a_int * dt;
    r = r_next;
  }

  out.alpha = alpha;
  out.beta = beta;
  out.rot = Rotation(r, Rotation::unchecked{});
  if (out.rot.orthonormality_error() > 1e-10) out.rot = project_so3(r);
  out.cov = p.topLeftCorner<9, 9>();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

CovarianceCheckReport covariance_check(
    std::span<const ImuSample> noiseless_samples, double accel_std,
    double gyro_std, int trials, uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("covariance_check: trials < 1");
  const Preintegrated nominal =
      preintegrate(noiseless_samples, accel_std, gyro_std);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Matrix<double, 9, 1> mean = Eigen::Matrix<double, 9, 1>::Zero();
  Eigen::Matrix<double, 9, 1> m2 = Eigen::Matrix<double, 9, 1>::Zero();
  std::vector<ImuSample> noisy(noiseless_samples.begin(),
                               noiseless_samples.end());
  for (int trial = 0; trial < trials; ++trial) {
    for (size_t i = 0; i < noisy.size(); ++i) {
      noisy[i] = noiseless_samples[i];
      noisy[i].accel += accel_std * Vec3(gauss(rng), gauss(rng), gauss(rng));
      noisy[i].gyro += gyro_std * Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    const Preintegrated pi = preintegrate(noisy, accel_std, gyro_std);
    Eigen::Matrix<double, 9, 1> err;
    err.segment<3>(0) = pi.alpha - nominal.alpha;
    err.segment<3>(3) = pi.beta - nominal.beta;
    err.segment<3>(6) =
        so3_log(nominal.rot.matrix().transpose() * pi.rot.matrix());
    mean += err;
    m2 += err.cwiseProduct(err);
  }
  mean /= trials;
  const Eigen::Matrix<double, 9, 1> var =
      m2 / trials - mean.cwiseProduct(mean);

  CovarianceCheckReport report;
  report.trials = trials;
  report.propagated_diag = nominal.cov.diagonal();
  report.empirical_diag = var;
  for (int i = 0; i < 6; ++i) {
    const double prop = report.propagated_diag(i);
    if (prop < 1e-30) continue;
    report.max_rel_dev_alpha_beta =
        std::max(report.max_rel_dev_alpha_beta,
                 std::abs(report.empirical_diag(i) / prop - 1.0));
  }
  return report;
}

}  // namespace wins
