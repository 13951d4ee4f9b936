#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "wins/geometry.hpp"

using namespace wins;

namespace {

std::mt19937_64 rng(42);

Vec3 random_vec(double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return Vec3(n(rng), n(rng), n(rng));
}

Rotation random_rotation() {
  return Rotation::from_axis_angle(random_vec(1.0));
}

// Dense reference integration at a much higher rate than the input stream;
// used as the oracle for the midpoint integrator.
Rotation dense_gyro_reference(double t0, double t1, double rate_hz,
                              const std::function<Vec3(double)>& omega) {
  const double dt = 1.0 / rate_hz;
  Mat3 r = Mat3::Identity();
  for (double t = t0; t < t1 - 0.5 * dt; t += dt) {
    r = r * so3_exp(omega(t + 0.5 * dt) * dt);
  }
  return project_so3(r);
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("skew basics") {
  CHECK(skew(Vec3::Zero()).isZero(0.0));
  CHECK(((skew(Vec3(0, 0, 1)) * Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() ==
        doctest::Approx(0.0));
  for (int i = 0; i < 20; ++i) {
    const Vec3 v = random_vec(3.0);
    CHECK((skew(v) * v).norm() < 1e-12);
    CHECK((skew(v) + skew(v).transpose()).norm() == doctest::Approx(0.0));
    const Vec3 u = random_vec(3.0);
    CHECK((skew(v) * u - v.cross(u)).norm() < 1e-12);
  }
}

TEST_CASE("skew conjugation by rotations") {
  for (int i = 0; i < 20; ++i) {
    const Rotation r = random_rotation();
    const Vec3 v = random_vec(2.0);
    const Mat3 lhs = skew(r * v);
    const Mat3 rhs = r.matrix() * skew(v) * r.matrix().transpose();
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("integrate_gyro constant rate closed form") {
  std::vector<ImuSample> samples;
  const double rate = 200.0;
  for (int i = 0; i <= 200; ++i) {
    samples.push_back({i / rate, Vec3::Zero(), Vec3(0, 0, M_PI / 2.0)});
  }
  const Rotation r = integrate_gyro(samples, Rotation());
  CHECK(r.angle_to(Rotation::rot_z(M_PI / 2.0)) < 1e-6);
}

TEST_CASE("integrate_gyro zero rate keeps start") {
  std::vector<ImuSample> samples;
  for (int i = 0; i <= 50; ++i) samples.push_back({i * 0.005});
  const Rotation start = random_rotation();
  const Rotation r = integrate_gyro(samples, start);
  CHECK(r.angle_to(start) == doctest::Approx(0.0));
}

TEST_CASE("integrate_gyro empty and bad input") {
  const Rotation start = random_rotation();
  CHECK(integrate_gyro({}, start).angle_to(start) == doctest::Approx(0.0));
  std::vector<ImuSample> bad = {{0.1}, {0.0}};
  CHECK_THROWS_AS(integrate_gyro(bad, Rotation()), std::invalid_argument);
}

TEST_CASE("integrate_gyro sinusoidal profile vs 10 kHz reference") {
  auto omega = [](double t) {
    return Vec3(0.8 * std::sin(2.0 * t), -0.5 * std::cos(3.0 * t),
                1.2 * std::sin(1.3 * t + 0.4));
  };
  std::vector<ImuSample> samples;
  const double rate = 200.0;
  for (int i = 0; i <= 200; ++i) {
    const double t = i / rate;
    samples.push_back({t, Vec3::Zero(), omega(t)});
  }
  const Rotation coarse = integrate_gyro(samples, Rotation());
  const Rotation ref = dense_gyro_reference(0.0, 1.0, 10000.0, omega);
  CHECK((coarse.matrix() - ref.matrix()).norm() < 1e-4);
}

TEST_CASE("integrate_gyro composes over subintervals") {
  std::vector<ImuSample> samples;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i <= 100; ++i) {
    samples.push_back({i * 0.01, Vec3::Zero(), random_vec(0.7)});
  }
  auto span_all = std::span<const ImuSample>(samples);
  const Rotation whole = integrate_gyro(span_all, Rotation());
  const Rotation first = integrate_gyro(span_all.subspan(0, 51), Rotation());
  const Rotation second = integrate_gyro(span_all.subspan(50), first);
  CHECK(whole.angle_to(second) < 1e-8);
}

TEST_CASE("project_so3 idempotence and scaling") {
  for (int i = 0; i < 10; ++i) {
    const Rotation r = random_rotation();
    CHECK(project_so3(r.matrix()).angle_to(r) < 1e-12);
  }
  CHECK(project_so3(2.0 * Mat3::Identity()).angle_to(Rotation()) ==
        doctest::Approx(0.0));
  const Mat3 m = random_rotation().matrix() * 1.7;
  const Rotation once = project_so3(m);
  CHECK(project_so3(once.matrix()).angle_to(once) < 1e-12);
}

TEST_CASE("project_so3 singular input throws") {
  Mat3 m = Mat3::Zero();
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  CHECK_THROWS_AS(project_so3(m), std::invalid_argument);
}

TEST_CASE("project_so3 matches brute-force axis-angle search on noisy input") {
  // Grid search over SO(3) is the independent oracle: no candidate rotation
  // may be meaningfully closer in Frobenius norm than the SVD projection.
  std::mt19937_64 local(7);
  std::normal_distribution<double> n(0.0, 0.01);
  for (int trial = 0; trial < 3; ++trial) {
    const Rotation truth = random_rotation();
    Mat3 noisy = truth.matrix();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) noisy(i, j) += n(local);

    const Rotation proj = project_so3(noisy);
    CHECK((proj.matrix() - truth.matrix()).norm() < 0.02);

    const double proj_dist = (proj.matrix() - noisy).norm();
    double best = std::numeric_limits<double>::max();
    // axis grid x angle grid around the found solution's neighborhood plus
    // a global coarse sweep
    for (int a = 0; a < 2000; ++a) {
      std::uniform_real_distribution<double> u(-M_PI, M_PI);
      Vec3 aa(u(local), u(local), u(local));
      if (aa.norm() > M_PI) continue;
      const double d = (so3_exp(aa) - noisy).norm();
      best = std::min(best, d);
    }
    CHECK(proj_dist <= best + 1e-9);
  }
}

TEST_CASE("rotation validation rejects non-orthonormal input") {
  Mat3 m = Mat3::Identity();
  m(0, 1) = 1e-3;
  CHECK_THROWS_AS(Rotation::from_matrix(m), std::invalid_argument);
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  CHECK_THROWS_AS(Rotation::from_matrix(reflect), std::invalid_argument);
}

TEST_CASE("yaw extraction") {
  CHECK(Rotation::rot_z(0.3).yaw() == doctest::Approx(0.3));
  CHECK(Rotation::rot_z(-1.2).yaw() == doctest::Approx(-1.2));
}

TEST_SUITE_END();
