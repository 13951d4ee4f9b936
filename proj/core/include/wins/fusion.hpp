#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "wins/geometry.hpp"
#include "wins/preintegration.hpp"

namespace wins {

/// Antenna-array-to-IMU-body transform; measured by hand on the vehicle.
struct Extrinsics {
  Rotation rot;
  Vec3 trans = Vec3::Zero();
};

/// Unit direction rotated into the body frame. The translation part acts as
/// a lever arm and is folded into the measurement row, not the direction.
Vec3 apply_extrinsics(const Vec3& d_array, const Extrinsics& x);

/// Per-frame unknowns: position in the first body frame, velocity in the
/// current body frame, gravity in the current body frame.
struct FrameState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 g = Vec3::Zero();
};

/// One bearing observation attached to a frame, already in the body frame.
struct PaoaMeasurement {
  int ap = 0;
  Vec3 d_body = Vec3::UnitY();
  double sigma_theta_rad = 0.0175;
};

struct WindowState {
  std::vector<double> t;
  std::vector<FrameState> frames;
  std::vector<Rotation> rotations;  // body-to-frame-0, inputs to the solve
  std::vector<Vec3> aps;
};

/// Marginalization prior in information form over (a prefix of the window's
/// frames) + all AP states.
struct Prior {
  Eigen::MatrixXd lambda;
  Eigen::VectorXd b;
  std::vector<long> frame_globals;
};

struct FusionConfig {
  int window_frames = 30;
  int n_aps = 1;
  bool planar = false;
  /// Fixed heights in first-body-frame coordinates when planar is set.
  double planar_frame_z = 0.0;
  double planar_ap_z = 0.0;
  double lambda_init_m = 1.0;
  double lambda_min_m = 0.3;
  bool marginalize = true;  // plain drop-oldest available for ablation
  Extrinsics extrinsics;
  double cov_floor = 1e-12;
  double ridge = 1e-8;
};

/// Column bookkeeping for the stacked state vector: per frame [p?, v, g]
/// then AP positions. The anchor frame (global index 0) carries no p; in
/// planar mode p and AP columns hold x,y only.
class StateLayout {
 public:
  StateLayout(std::vector<bool> has_p, bool planar, int n_aps);

  int p_dim() const { return planar_ ? 2 : 3; }
  bool has_p(int k) const { return has_p_[k]; }
  int p_col(int k) const;  // -1 when the frame has no p columns
  int v_col(int k) const;
  int g_col(int k) const;
  int ap_col(int l) const;
  int n_frames() const { return static_cast<int>(has_p_.size()); }
  int frame_section_size() const { return frame_section_; }
  int size() const { return total_; }
  std::string describe(int col) const;

 private:
  std::vector<bool> has_p_;
  std::vector<int> frame_base_;
  bool planar_ = false;
  int n_aps_ = 0;
  int frame_section_ = 0;
  int total_ = 0;
};

struct MeasurementBlock {
  Eigen::VectorXd z;
  Eigen::MatrixXd h;    // rows x layout.size()
  Eigen::MatrixXd cov;  // rows x rows
};

/// Three block rows tying consecutive frames k -> k+1 (indices within the
/// layout): double-integrated force, integrated force, and the gravity
/// chain. v_next / g_next nominals feed the rotation-error part of the
/// measurement covariance.
MeasurementBlock build_imu_block(const Preintegrated& pre, int k,
                                 const std::vector<Rotation>& rot_b0,
                                 const StateLayout& layout,
                                 const FusionConfig& cfg,
                                 const Vec3& v_next_nominal,
                                 const Vec3& g_next_nominal);

/// Bearing row block for frame j: the cross product of the world-frame
/// direction with (c - p) vanishes at the truth. The skew residual has rank
/// 2, so it is projected onto an orthonormal basis of the plane normal to
/// the direction; the weight scales with the squared distance.
MeasurementBlock build_paoa_block(const PaoaMeasurement& m, int j,
                                  const Rotation& rot_b0_j, double lambda_m,
                                  const StateLayout& layout,
                                  const FusionConfig& cfg);

struct SolveReport {
  double objective_initial = 0.0;
  double objective_final = 0.0;
  double cond_proxy = 0.0;  // |d_max| / |d_min| of the normal-equation LDLT
  bool ridge_used = false;
  bool underdetermined = false;
  std::vector<double> lambdas;
  std::vector<std::string> near_null;  // filled when diagnostics requested
  double min_eig = 0.0;
};

/// Sliding-window maximum-likelihood estimator. Rotations are inputs, never
/// decision variables, which keeps the whole problem linear; the anchor
/// (global frame 0) position is eliminated, and older frames are folded
/// into a Schur-complement prior as the window slides.
class SlidingWindowEstimator {
 public:
  explicit SlidingWindowEstimator(const FusionConfig& cfg);

  void add_frame(double t, const Rotation& rot_b0,
                 std::optional<Preintegrated> preint_from_prev,
                 std::vector<PaoaMeasurement> paoas);

  /// Two passes: distance weights are refreshed from the first solution and
  /// the system is solved once more.
  SolveReport solve(bool diagnose_nullspace = false);

  /// Marginalizes the oldest frames until the window is at capacity.
  void slide();

  int frames_in_window() const { return static_cast<int>(frames_.size()); }
  long first_global_index() const {
    return frames_.empty() ? 0 : frames_.front().global;
  }
  WindowState state() const;
  Vec3 ap_position(int l) const { return aps_[l]; }
  bool has_prior() const { return prior_.has_value(); }
  const Prior& prior() const { return *prior_; }
  const FusionConfig& config() const { return cfg_; }

 private:
  struct Frame {
    long global = 0;
    double t = 0.0;
    Rotation rot;
    std::optional<Preintegrated> pre;  // from the previous frame
    std::vector<PaoaMeasurement> paoas;
    FrameState est;
  };

  StateLayout layout() const;
  double lambda_for(const Frame& f, const PaoaMeasurement& m) const;
  Eigen::VectorXd pack_state(const StateLayout& lay) const;
  void unpack_state(const StateLayout& lay, const Eigen::VectorXd& x);
  void accumulate_blocks(const StateLayout& lay,
                         std::vector<MeasurementBlock>& blocks,
                         std::vector<double>& lambdas) const;
  void add_prior(const StateLayout& lay, Eigen::MatrixXd& a,
                 Eigen::VectorXd& rhs) const;
  void marginalize_front();

  FusionConfig cfg_;
  std::deque<Frame> frames_;
  std::vector<Vec3> aps_;
  std::optional<Prior> prior_;
  long next_global_ = 0;
};

void write_pose_csv(const std::string& path, const std::vector<double>& t,
                    const std::vector<FrameState>& frames);
void write_ap_csv(const std::string& path, const std::vector<Vec3>& aps);

}  // namespace wins
