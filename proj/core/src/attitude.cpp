#include "wins/attitude.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wins {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

AttitudeSolution attitude_from_basis(const Eigen::MatrixXd& basis,
                                     int n_frames) {
  if (basis.rows() != 3 * n_frames || basis.cols() != 3) {
    throw std::invalid_argument("attitude basis has wrong shape");
  }
  // The basis spans {stacked world-to-body blocks} up to a common right
  // factor; an orthogonal factor with det -1 would turn every block into a
  // reflection, so flip one basis column if the blocks come out left-handed.
  double det_sum = 0.0;
  for (int k = 0; k < n_frames; ++k) {
    det_sum += basis.block<3, 3>(3 * k, 0).determinant();
  }
  Eigen::MatrixXd b = basis;
  if (det_sum < 0.0) b.col(2) *= -1.0;

  std::vector<Rotation> world_to_body;
  world_to_body.reserve(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    world_to_body.push_back(project_so3(b.block<3, 3>(3 * k, 0)));
  }

  AttitudeSolution out;
  out.rot.reserve(n_frames);
  const Mat3 anchor = world_to_body[0].matrix();  // = A_0^T
  for (int k = 0; k < n_frames; ++k) {
    // body-to-frame0 attitude, re-anchored so frame 0 is exactly identity
    out.rot.emplace_back(anchor * world_to_body[k].matrix().transpose(),
                         Rotation::unchecked{});
  }
  return out;
}

AttitudeSolution solve_rotations(
    std::span<const RelativeRotationConstraint> constraints, int n_frames) {
  if (n_frames < 2) throw std::invalid_argument("need at least two frames");
  if (constraints.empty()) throw std::invalid_argument("no constraints");

  UnionFind uf(n_frames);
  for (const auto& c : constraints) {
    if (c.i < 0 || c.j >= n_frames || c.i >= c.j) {
      throw std::invalid_argument("constraint indices out of range");
    }
    uf.unite(c.i, c.j);
  }
  for (int k = 1; k < n_frames; ++k) {
    if (uf.find(k) != uf.find(0)) {
      throw std::invalid_argument(
          "constraint graph does not connect every frame to the anchor");
    }
  }

  // Unknowns: world-to-body blocks B_k stacked column-wise; a constraint
  // (i, j, rel) with x^i = rel * x^j gives B_j - rel^T B_i = 0, acting on
  // each of the three columns independently.
  const int n = 3 * n_frames;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3 * constraints.size(), n);
  for (size_t r = 0; r < constraints.size(); ++r) {
    const auto& c = constraints[r];
    l.block<3, 3>(3 * r, 3 * c.j) =
        c.weight * Mat3::Identity();
    l.block<3, 3>(3 * r, 3 * c.i) =
        -c.weight * c.rel.matrix().transpose();
  }

  const Eigen::MatrixXd gram = l.transpose() * l;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("solve_rotations: eigendecomposition failed");
  }
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  const double scale = std::max(ev(n - 1), 1e-300);
  if (n > 3 && ev(3) < 1e-12 * scale) {
    throw std::runtime_error(
        "solve_rotations: rank deficient beyond the 3-dim solution space "
        "(4th singular value " +
        std::to_string(std::sqrt(std::max(ev(3), 0.0))) + ")");
  }
  return attitude_from_basis(eig.eigenvectors().leftCols<3>(), n_frames);
}

std::vector<RelativeRotationConstraint> build_constraints(
    std::span<const ImuSample> imu, std::span<const double> frame_times,
    std::span<const AoaYawIncrement> aoa_yaw, const ConstraintOptions& opts) {
  if (frame_times.size() < 2) {
    throw std::invalid_argument("need at least two frame times");
  }
  if (imu.size() < 2) throw std::invalid_argument("IMU stream too short");
  const double t_begin = imu.front().t;
  const double t_end = imu.back().t;
  for (double t : frame_times) {
    if (t < t_begin - 1e-9 || t > t_end + 1e-9) {
      throw std::invalid_argument("frame time outside the IMU stream span");
    }
  }

  std::vector<RelativeRotationConstraint> out;
  size_t lo = 0;
  for (size_t k = 0; k + 1 < frame_times.size(); ++k) {
    while (lo + 1 < imu.size() && imu[lo + 1].t <= frame_times[k] + 1e-9) ++lo;
    size_t hi = lo;
    while (hi + 1 < imu.size() && imu[hi + 1].t <= frame_times[k + 1] + 1e-9) {
      ++hi;
    }
    const Rotation rel = gyro_increment(imu.subspan(lo, hi - lo + 1));
    out.push_back({static_cast<int>(k), static_cast<int>(k + 1), rel,
                   opts.gyro_weight});
    lo = hi;
  }

  if (!aoa_yaw.empty()) {
    if (opts.aoa_mode == AoaYawMode::kConsecutive) {
      for (const auto& inc : aoa_yaw) {
        out.push_back({inc.from_frame, inc.to_frame,
                       Rotation::from_axis_angle(opts.yaw_axis.normalized() *
                                                 inc.dpsi_rad),
                       opts.aoa_weight});
      }
    } else {
      // compose from the first frame outward; intermediate bearings cancel
      double acc = 0.0;
      const int base = aoa_yaw.front().from_frame;
      for (const auto& inc : aoa_yaw) {
        acc += inc.dpsi_rad;
        if (inc.to_frame <= base) continue;
        out.push_back({base, inc.to_frame,
                       Rotation::from_axis_angle(opts.yaw_axis.normalized() *
                                                 acc),
                       opts.aoa_weight});
      }
    }
  }
  return out;
}

AttitudeTracker::AttitudeTracker(int window, const ConstraintOptions& opts,
                                 int stride)
    : window_(window), stride_(stride), opts_(opts) {
  if (window_ < 2) throw std::invalid_argument("attitude window too small");
}

Rotation AttitudeTracker::current() const {
  return entries_.empty() ? base_ : entries_.back().attitude;
}

void AttitudeTracker::solve_window() {
  const int n = static_cast<int>(entries_.size()) + 1;  // + base frame
  if (n < 2) return;
  std::vector<RelativeRotationConstraint> constraints;
  const Vec3 axis = opts_.yaw_axis.normalized();
  double acc = 0.0;
  for (int k = 1; k < n; ++k) {
    const auto& e = entries_[k - 1];
    constraints.push_back({k - 1, k, e.rel, opts_.gyro_weight});
    if (opts_.aoa_mode == AoaYawMode::kConsecutive) {
      constraints.push_back({k - 1, k,
                             Rotation::from_axis_angle(axis * e.dpsi),
                             opts_.aoa_weight});
    } else {
      acc += e.dpsi;
      constraints.push_back({0, k, Rotation::from_axis_angle(axis * acc),
                             opts_.aoa_weight});
    }
  }
  const AttitudeSolution sol = solve_rotations(constraints, n);
  for (int k = 1; k < n; ++k) {
    entries_[k - 1].attitude = base_ * sol.rot[k];
  }
}

Rotation AttitudeTracker::push(const Rotation& rel, double dpsi_rad) {
  if (!started_) {
    // the very first push seeds the anchor frame
    started_ = true;
    base_ = Rotation();
  }
  Entry e;
  e.rel = rel;
  e.dpsi = dpsi_rad;
  e.attitude = current() * rel;  // chained until the next window solve
  entries_.push_back(e);
  while (static_cast<int>(entries_.size()) + 1 > window_) {
    base_ = entries_.front().attitude;
    entries_.erase(entries_.begin());
  }
  if (++since_solve_ >= stride_) {
    solve_window();
    since_solve_ = 0;
  }
  return current();
}

}  // namespace wins
