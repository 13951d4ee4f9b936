#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "wins/sensors.hpp"

namespace wins {

/// Sub-array/sub-band rearrangement of one CSI snapshot. Rows enumerate the
/// (sub-antenna, sub-subcarrier) pattern, columns the (antenna, subcarrier)
/// shifts; restores covariance rank under coherent multipath.
struct SmoothedCsi {
  Eigen::MatrixXcd m;
  int sub_antennas = 0;
  int sub_carriers = 0;
  double antenna_spacing_m = 0.0;
  double carrier_hz = 0.0;
  double subcarrier_spacing_hz = 0.0;
};

struct NoiseProjector {
  Eigen::MatrixXcd h;  // E_n E_n^H, Hermitian idempotent
  int rank = 0;        // rows - n_paths
  /// Smallest signal eigenvalue less than 2x the largest noise eigenvalue;
  /// the model order is probably wrong but the spectrum is still usable.
  bool degenerate_gap = false;
};

struct SpectrumGrid {
  Eigen::VectorXd theta_deg;  // strictly increasing
  Eigen::VectorXd tau_ns;     // strictly increasing
  Eigen::MatrixXd power;      // theta x tau, positive
  long evaluations = 0;       // grid nodes evaluated, |theta| * |tau|
};

struct AoaEstimate {
  double theta_deg = 0.0;
  double tof_ns = 0.0;
  double t = 0.0;
  double power = 0.0;
};

SmoothedCsi spatial_smooth(const CsiSnapshot& snap, int sub_antennas = 2,
                           int sub_carriers = 15);

NoiseProjector noise_projector(const SmoothedCsi& s, int n_paths);

/// Expected phase pattern for a path at (theta, tau); entry (m,k) is
/// Phi^m Omega^k with Phi = exp(-j 2 pi d sin(theta) f_c / c) and
/// Omega = exp(-j 2 pi f_delta tau). Unit-modulus entries.
Eigen::VectorXcd steering_vector(double theta_deg, double tau_ns,
                                 const SmoothedCsi& geom);

Eigen::VectorXd full_theta_axis(double step_deg = 1.0);
/// Grid-aligned axis centered on the prediction, clamped to [-90, 90]; node
/// positions coincide with the full axis so windowed and full searches can
/// be compared grid-node for grid-node.
Eigen::VectorXd windowed_theta_axis(double center_deg, double halfwidth_deg,
                                    double step_deg = 1.0);
/// Half-open [0, 1/f_delta) span; tau and tau + 1/f_delta alias.
Eigen::VectorXd default_tau_axis(double subcarrier_spacing_hz,
                                 double step_ns = 1.0);

/// P(theta, tau) = 1 / |s^H H s| on every grid node.
SpectrumGrid evaluate_spectrum(const NoiseProjector& proj,
                               const SmoothedCsi& geom,
                               const Eigen::VectorXd& theta_axis,
                               const Eigen::VectorXd& tau_axis);

/// Strict 8-neighborhood local maxima above rel_threshold of the global
/// max, sorted by descending power.
std::vector<AoaEstimate> find_peaks(const SpectrumGrid& grid,
                                    int max_peaks = 8,
                                    double rel_threshold = 0.1);

/// The direct path is the peak with the smallest time of flight; ties go to
/// the stronger peak. Throws "no path detected" on an empty list.
AoaEstimate select_direct_path(const std::vector<AoaEstimate>& peaks);

struct SpotfiInitConfig {
  int n_paths = 3;
  int sub_antennas = 2;
  int sub_carriers = 15;
  double theta_step_deg = 1.0;
  double tau_step_ns = 1.0;
};

/// Full-window spectra of >= 10 packets averaged, then peak selection.
AoaEstimate spotfi_initial_aoa(std::span<const CsiSnapshot> snapshots,
                               const SpotfiInitConfig& cfg = {});

}  // namespace wins
