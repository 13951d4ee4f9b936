#include "wins/fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "wins/csv.hpp"

namespace wins {

Vec3 apply_extrinsics(const Vec3& d_array, const Extrinsics& x) {
  return (x.rot * d_array).normalized();
}

StateLayout::StateLayout(std::vector<bool> has_p, bool planar, int n_aps)
    : has_p_(std::move(has_p)), planar_(planar), n_aps_(n_aps) {
  frame_base_.resize(has_p_.size());
  int col = 0;
  for (size_t k = 0; k < has_p_.size(); ++k) {
    frame_base_[k] = col;
    col += (has_p_[k] ? p_dim() : 0) + 6;
  }
  frame_section_ = col;
  total_ = col + n_aps_ * p_dim();
}

int StateLayout::p_col(int k) const {
  return has_p_[k] ? frame_base_[k] : -1;
}
int StateLayout::v_col(int k) const {
  return frame_base_[k] + (has_p_[k] ? p_dim() : 0);
}
int StateLayout::g_col(int k) const { return v_col(k) + 3; }
int StateLayout::ap_col(int l) const { return frame_section_ + l * p_dim(); }

std::string StateLayout::describe(int col) const {
  static const char* xyz = "xyz";
  for (int k = 0; k < n_frames(); ++k) {
    if (has_p_[k] && col < frame_base_[k] + p_dim()) {
      return "frame" + std::to_string(k) + ".p." +
             xyz[col - frame_base_[k]];
    }
    if (col < g_col(k)) {
      return "frame" + std::to_string(k) + ".v." + xyz[col - v_col(k)];
    }
    if (col < g_col(k) + 3) {
      return "frame" + std::to_string(k) + ".g." + xyz[col - g_col(k)];
    }
  }
  const int l = (col - frame_section_) / p_dim();
  return "ap" + std::to_string(l) + "." +
         xyz[(col - frame_section_) % p_dim()];
}

namespace {

// Scatter a 3-column coefficient into the layout, folding fixed components
// (anchored p = 0, planar z) into the measurement vector.
void add_position_coeff(MeasurementBlock& blk, const StateLayout& lay,
                        int row, int p_col_or_neg, const Mat3& coeff,
                        double fixed_z) {
  if (p_col_or_neg >= 0) {
    const int dim = lay.p_dim();
    blk.h.block(row, p_col_or_neg, 3, dim) += coeff.leftCols(dim);
    if (dim == 2) blk.z.segment<3>(row) -= coeff.col(2) * fixed_z;
  }
  // anchored frame: p = (0,0,0), nothing to fold
}

Eigen::MatrixXd weight_of(const Eigen::MatrixXd& cov, double floor) {
  Eigen::MatrixXd c = cov;
  c.diagonal().array() += floor;
  return c.ldlt().solve(
      Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

}  // namespace

MeasurementBlock build_imu_block(const Preintegrated& pre, int k,
                                 const std::vector<Rotation>& rot_b0,
                                 const StateLayout& layout,
                                 const FusionConfig& cfg,
                                 const Vec3& v_next_nominal,
                                 const Vec3& g_next_nominal) {
  if (k + 1 >= static_cast<int>(rot_b0.size())) {
    throw std::invalid_argument("build_imu_block: missing rotation");
  }
  const double dt = pre.dt;
  const Mat3 q = rot_b0[k].matrix().transpose();     // frame0 -> body k
  const Mat3 s = pre.rot.matrix();                   // body k+1 -> body k

  MeasurementBlock blk;
  blk.z = Eigen::VectorXd::Zero(9);
  blk.h = Eigen::MatrixXd::Zero(9, layout.size());
  blk.z.segment<3>(0) = pre.alpha;
  blk.z.segment<3>(3) = pre.beta;

  // alpha row: q (p_{k+1} - p_k) - v_k dt + g_k dt^2/2
  add_position_coeff(blk, layout, 0, layout.p_col(k + 1), q,
                     cfg.planar_frame_z);
  add_position_coeff(blk, layout, 0, layout.p_col(k), -q, cfg.planar_frame_z);
  blk.h.block<3, 3>(0, layout.v_col(k)) = -dt * Mat3::Identity();
  blk.h.block<3, 3>(0, layout.g_col(k)) = 0.5 * dt * dt * Mat3::Identity();
  // beta row: s v_{k+1} - v_k + g_k dt
  blk.h.block<3, 3>(3, layout.v_col(k + 1)) = s;
  blk.h.block<3, 3>(3, layout.v_col(k)) = -Mat3::Identity();
  blk.h.block<3, 3>(3, layout.g_col(k)) = dt * Mat3::Identity();
  // gravity chain: s g_{k+1} - g_k
  blk.h.block<3, 3>(6, layout.g_col(k + 1)) = s;
  blk.h.block<3, 3>(6, layout.g_col(k)) = -Mat3::Identity();

  // Map the (d_alpha, d_beta, d_theta) covariance into measurement noise;
  // the rotation error enters the beta and gravity rows through s.
  Eigen::Matrix<double, 9, 9> t = Eigen::Matrix<double, 9, 9>::Zero();
  t.block<3, 3>(0, 0) = Mat3::Identity();
  t.block<3, 3>(3, 3) = Mat3::Identity();
  t.block<3, 3>(3, 6) = -s * skew(v_next_nominal);
  t.block<3, 3>(6, 6) = -s * skew(g_next_nominal);
  blk.cov = t * pre.cov * t.transpose();
  return blk;
}

MeasurementBlock build_paoa_block(const PaoaMeasurement& m, int j,
                                  const Rotation& rot_b0_j, double lambda_m,
                                  const StateLayout& layout,
                                  const FusionConfig& cfg) {
  const Vec3 u = rot_b0_j * m.d_body;  // direction in the first body frame
  // orthonormal basis of the plane normal to u
  const Vec3 seed = std::abs(u.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 b1 = u.cross(seed).normalized();
  const Vec3 b2 = u.cross(b1);
  Eigen::Matrix<double, 2, 3> basis;
  basis.row(0) = b1.transpose();
  basis.row(1) = b2.transpose();

  const Eigen::Matrix<double, 2, 3> hrow = basis * skew(u);

  MeasurementBlock blk;
  blk.z = Eigen::VectorXd::Zero(2);
  blk.h = Eigen::MatrixXd::Zero(2, layout.size());

  auto scatter = [&](int col, double sign) {
    if (col < 0) return;  // anchored p = 0
    const int dim = layout.p_dim();
    blk.h.block(0, col, 2, dim) += sign * hrow.leftCols(dim);
    if (dim == 2) {
      const double fixed =
          sign > 0 ? cfg.planar_ap_z : cfg.planar_frame_z;
      blk.z -= sign * hrow.col(2) * fixed;
    }
  };
  scatter(layout.ap_col(m.ap), 1.0);
  scatter(layout.p_col(j), -1.0);
  // lever arm: the bearing is taken at the antenna, offset from the body
  // origin by the extrinsic translation
  blk.z += hrow * (rot_b0_j.matrix() * cfg.extrinsics.trans);

  blk.cov = lambda_m * lambda_m * m.sigma_theta_rad * m.sigma_theta_rad *
            Eigen::Matrix2d::Identity();
  return blk;
}

SlidingWindowEstimator::SlidingWindowEstimator(const FusionConfig& cfg)
    : cfg_(cfg), aps_(cfg.n_aps, Vec3::Zero()) {}

StateLayout SlidingWindowEstimator::layout() const {
  std::vector<bool> has_p;
  has_p.reserve(frames_.size());
  for (const auto& f : frames_) has_p.push_back(f.global != 0);
  return StateLayout(std::move(has_p), cfg_.planar, cfg_.n_aps);
}

void SlidingWindowEstimator::add_frame(
    double t, const Rotation& rot_b0,
    std::optional<Preintegrated> preint_from_prev,
    std::vector<PaoaMeasurement> paoas) {
  if (!frames_.empty() && !preint_from_prev.has_value()) {
    throw std::invalid_argument("non-initial frames need a preintegrated block");
  }
  Frame f;
  f.global = next_global_++;
  f.t = t;
  f.rot = rot_b0;
  f.pre = std::move(preint_from_prev);
  f.paoas = std::move(paoas);
  if (!frames_.empty()) {
    f.est = frames_.back().est;  // warm start; the solve overwrites it
    f.est.p.z() = cfg_.planar ? cfg_.planar_frame_z : f.est.p.z();
  } else {
    f.est.g = rot_b0.matrix().transpose() * Vec3(0.0, 0.0, 9.8);
  }
  frames_.push_back(std::move(f));
}

double SlidingWindowEstimator::lambda_for(const Frame& f,
                                          const PaoaMeasurement& m) const {
  const Vec3 antenna = f.est.p + f.rot.matrix() * cfg_.extrinsics.trans;
  const double d = (aps_[m.ap] - antenna).norm();
  if (d < cfg_.lambda_min_m) {
    return std::max(cfg_.lambda_init_m, cfg_.lambda_min_m);
  }
  return d;
}

Eigen::VectorXd SlidingWindowEstimator::pack_state(
    const StateLayout& lay) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.size());
  for (int k = 0; k < lay.n_frames(); ++k) {
    const auto& f = frames_[k];
    if (lay.p_col(k) >= 0) {
      x.segment(lay.p_col(k), lay.p_dim()) = f.est.p.head(lay.p_dim());
    }
    x.segment<3>(lay.v_col(k)) = f.est.v;
    x.segment<3>(lay.g_col(k)) = f.est.g;
  }
  for (int l = 0; l < cfg_.n_aps; ++l) {
    x.segment(lay.ap_col(l), lay.p_dim()) = aps_[l].head(lay.p_dim());
  }
  return x;
}

void SlidingWindowEstimator::unpack_state(const StateLayout& lay,
                                          const Eigen::VectorXd& x) {
  for (int k = 0; k < lay.n_frames(); ++k) {
    auto& f = frames_[k];
    if (lay.p_col(k) >= 0) {
      f.est.p.head(lay.p_dim()) = x.segment(lay.p_col(k), lay.p_dim());
      if (cfg_.planar) f.est.p.z() = cfg_.planar_frame_z;
    } else {
      f.est.p = Vec3::Zero();
    }
    f.est.v = x.segment<3>(lay.v_col(k));
    f.est.g = x.segment<3>(lay.g_col(k));
  }
  for (int l = 0; l < cfg_.n_aps; ++l) {
    aps_[l].head(lay.p_dim()) = x.segment(lay.ap_col(l), lay.p_dim());
    if (cfg_.planar) aps_[l].z() = cfg_.planar_ap_z;
  }
}

void SlidingWindowEstimator::accumulate_blocks(
    const StateLayout& lay, std::vector<MeasurementBlock>& blocks,
    std::vector<double>& lambdas) const {
  std::vector<Rotation> rots;
  rots.reserve(frames_.size());
  for (const auto& f : frames_) rots.push_back(f.rot);

  for (int k = 1; k < static_cast<int>(frames_.size()); ++k) {
    if (!frames_[k].pre) continue;
    blocks.push_back(build_imu_block(*frames_[k].pre, k - 1, rots, lay, cfg_,
                                     frames_[k].est.v, frames_[k].est.g));
  }
  for (int j = 0; j < static_cast<int>(frames_.size()); ++j) {
    for (const auto& m : frames_[j].paoas) {
      const double lam = lambda_for(frames_[j], m);
      lambdas.push_back(lam);
      blocks.push_back(build_paoa_block(m, j, frames_[j].rot, lam, lay, cfg_));
    }
  }
}

void SlidingWindowEstimator::add_prior(const StateLayout& lay,
                                       Eigen::MatrixXd& a,
                                       Eigen::VectorXd& rhs) const {
  if (!prior_) return;
  // prior frames are always a prefix of the current window
  std::vector<int> map(prior_->lambda.rows(), -1);
  int old_col = 0;
  for (size_t pk = 0; pk < prior_->frame_globals.size(); ++pk) {
    if (frames_[pk].global != prior_->frame_globals[pk]) {
      throw std::logic_error("prior does not align with the window");
    }
    const int k = static_cast<int>(pk);
    const int width = (lay.p_col(k) >= 0 ? lay.p_dim() : 0) + 6;
    const int new_base = lay.p_col(k) >= 0 ? lay.p_col(k) : lay.v_col(k);
    for (int i = 0; i < width; ++i) map[old_col + i] = new_base + i;
    old_col += width;
  }
  for (int l = 0; l < cfg_.n_aps; ++l) {
    for (int i = 0; i < lay.p_dim(); ++i) {
      map[old_col++] = lay.ap_col(l) + i;
    }
  }
  for (int i = 0; i < prior_->lambda.rows(); ++i) {
    rhs(map[i]) += prior_->b(i);
    for (int j = 0; j < prior_->lambda.cols(); ++j) {
      a(map[i], map[j]) += prior_->lambda(i, j);
    }
  }
}

SolveReport SlidingWindowEstimator::solve(bool diagnose_nullspace) {
  if (frames_.empty()) throw std::logic_error("solve: no frames");
  const StateLayout lay = layout();
  SolveReport report;
  const Eigen::VectorXd x0 = pack_state(lay);

  Eigen::VectorXd x = x0;
  std::vector<MeasurementBlock> blocks;
  std::vector<double> lambdas;
  // pass 1 weights come from the current estimates; pass 2 re-derives the
  // distance scales from the pass-1 solution
  for (int pass = 0; pass < 2; ++pass) {
    blocks.clear();
    lambdas.clear();
    accumulate_blocks(lay, blocks, lambdas);

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(lay.size(), lay.size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(lay.size());
    for (const auto& blk : blocks) {
      const Eigen::MatrixXd w = weight_of(blk.cov, cfg_.cov_floor);
      const Eigen::MatrixXd wh = w * blk.h;
      a.noalias() += blk.h.transpose() * wh;
      rhs.noalias() += wh.transpose() * blk.z;
    }
    add_prior(lay, a, rhs);

    auto objective = [&](const Eigen::VectorXd& xv) {
      double obj = xv.dot(a * xv) - 2.0 * rhs.dot(xv);
      for (const auto& blk : blocks) {
        // constant term of the quadratic so the objective is the true
        // weighted residual sum (prior constant unknown, reported as-is)
        const Eigen::MatrixXd w = weight_of(blk.cov, cfg_.cov_floor);
        obj += blk.z.dot(w * blk.z);
      }
      return obj;
    };

    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    Eigen::VectorXd sol = ldlt.solve(rhs);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.cwiseAbs().minCoeff();
    report.cond_proxy = dmax / std::max(dmin, 1e-300);
    report.underdetermined = dmin < 1e-12 * std::max(dmax, 1e-300);

    if (ldlt.info() != Eigen::Success || !sol.allFinite() ||
        report.underdetermined) {
      Eigen::MatrixXd ridged = a;
      ridged.diagonal().array() += cfg_.ridge;
      sol = ridged.ldlt().solve(rhs);
      report.ridge_used = true;
      if (!sol.allFinite()) {
        throw std::runtime_error("solve_window: factorization failed");
      }
    }

    if (pass == 0) {
      report.objective_initial = objective(x0);
    } else {
      report.objective_initial = std::min(report.objective_initial,
                                          objective(x0));
      report.objective_final = objective(sol);
      report.lambdas = lambdas;
      if (diagnose_nullspace) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
        report.min_eig = eig.eigenvalues()(0);
        const double scale = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
        for (int e = 0; e < eig.eigenvalues().size(); ++e) {
          if (eig.eigenvalues()(e) > 1e-10 * scale) break;
          const Eigen::VectorXd v = eig.eigenvectors().col(e);
          const double top = v.cwiseAbs().maxCoeff();
          for (int i = 0; i < v.size(); ++i) {
            if (std::abs(v(i)) > 0.3 * top) {
              report.near_null.push_back(lay.describe(i));
            }
          }
        }
      }
    }
    x = sol;
    unpack_state(lay, x);  // refreshes the distance scales for pass 2
  }
  return report;
}

void SlidingWindowEstimator::marginalize_front() {
  const StateLayout lay = layout();
  // only the blocks that touch the departing frame are absorbed
  std::vector<MeasurementBlock> blocks;
  std::vector<Rotation> rots;
  for (const auto& f : frames_) rots.push_back(f.rot);
  if (frames_.size() > 1 && frames_[1].pre) {
    blocks.push_back(build_imu_block(*frames_[1].pre, 0, rots, lay, cfg_,
                                     frames_[1].est.v, frames_[1].est.g));
  }
  for (const auto& m : frames_[0].paoas) {
    blocks.push_back(build_paoa_block(m, 0, frames_[0].rot,
                                      lambda_for(frames_[0], m), lay, cfg_));
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(lay.size(), lay.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(lay.size());
  for (const auto& blk : blocks) {
    const Eigen::MatrixXd w = weight_of(blk.cov, cfg_.cov_floor);
    const Eigen::MatrixXd wh = w * blk.h;
    a.noalias() += blk.h.transpose() * wh;
    rhs.noalias() += wh.transpose() * blk.z;
  }
  add_prior(lay, a, rhs);

  const int m_base = lay.p_col(0) >= 0 ? lay.p_col(0) : lay.v_col(0);
  const int m_width = (lay.p_col(0) >= 0 ? lay.p_dim() : 0) + 6;
  const int n = lay.size();
  const int r = n - m_width;

  if (cfg_.marginalize) {
    // reorder: departing vars first
    Eigen::MatrixXd amm = a.block(m_base, m_base, m_width, m_width);
    Eigen::MatrixXd arm(r, m_width);
    Eigen::MatrixXd arr(r, r);
    Eigen::VectorXd bm = rhs.segment(m_base, m_width);
    Eigen::VectorXd br(r);
    std::vector<int> rest;
    rest.reserve(r);
    for (int i = 0; i < n; ++i) {
      if (i < m_base || i >= m_base + m_width) rest.push_back(i);
    }
    for (int i = 0; i < r; ++i) {
      br(i) = rhs(rest[i]);
      for (int j = 0; j < r; ++j) arr(i, j) = a(rest[i], rest[j]);
      for (int j = 0; j < m_width; ++j) arm(i, j) = a(rest[i], m_base + j);
    }
    amm.diagonal().array() += 1e-12 * std::max(1.0, amm.trace() / m_width);
    const Eigen::MatrixXd amm_inv =
        amm.ldlt().solve(Eigen::MatrixXd::Identity(m_width, m_width));
    Prior next;
    next.lambda = arr - arm * amm_inv * arm.transpose();
    next.lambda = 0.5 * (next.lambda + next.lambda.transpose()).eval();
    next.b = br - arm * amm_inv * bm;
    for (size_t k = 1; k < frames_.size(); ++k) {
      next.frame_globals.push_back(frames_[k].global);
    }
    prior_ = std::move(next);
  } else {
    prior_.reset();
  }

  if (frames_.size() > 1) frames_[1].pre.reset();  // consumed
  frames_.pop_front();
}

void SlidingWindowEstimator::slide() {
  while (static_cast<int>(frames_.size()) > cfg_.window_frames) {
    marginalize_front();
  }
}

WindowState SlidingWindowEstimator::state() const {
  WindowState s;
  for (const auto& f : frames_) {
    s.t.push_back(f.t);
    s.frames.push_back(f.est);
    s.rotations.push_back(f.rot);
  }
  s.aps = aps_;
  return s;
}

void write_pose_csv(const std::string& path, const std::vector<double>& t,
                    const std::vector<FrameState>& frames) {
  CsvWriter w(path, {"t", "px", "py", "pz", "vx", "vy", "vz", "gx", "gy",
                     "gz"});
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    w.row({t[i], f.p.x(), f.p.y(), f.p.z(), f.v.x(), f.v.y(), f.v.z(),
           f.g.x(), f.g.y(), f.g.z()});
  }
}

void write_ap_csv(const std::string& path, const std::vector<Vec3>& aps) {
  CsvWriter w(path, {"l", "cx", "cy", "cz"});
  for (size_t l = 0; l < aps.size(); ++l) {
    w.row({static_cast<double>(l), aps[l].x(), aps[l].y(), aps[l].z()});
  }
}

}  // namespace wins
