#include "wins/array_signal.hpp"

#include <cmath>
#include <stdexcept>

namespace wins {

SmoothedCsi spatial_smooth(const CsiSnapshot& snap, int sub_antennas,
                           int sub_carriers) {
  const int m = static_cast<int>(snap.x.rows());
  const int k = static_cast<int>(snap.x.cols());
  if (sub_antennas < 1 || sub_antennas >= m || sub_carriers < 1 ||
      sub_carriers > k) {
    throw std::invalid_argument("spatial_smooth: bad sub-array dimensions");
  }
  const int shifts_m = m - sub_antennas + 1;
  const int shifts_k = k - sub_carriers + 1;
  if (shifts_m * shifts_k < 2) {
    throw std::invalid_argument("spatial_smooth: not enough shifted columns");
  }

  SmoothedCsi out;
  out.sub_antennas = sub_antennas;
  out.sub_carriers = sub_carriers;
  out.antenna_spacing_m = snap.antenna_spacing_m;
  out.carrier_hz = snap.carrier_hz;
  out.subcarrier_spacing_hz = snap.subcarrier_spacing_hz;
  out.m.resize(sub_antennas * sub_carriers, shifts_m * shifts_k);
  for (int dm = 0; dm < shifts_m; ++dm) {
    for (int dk = 0; dk < shifts_k; ++dk) {
      const int col = dm * shifts_k + dk;
      for (int mm = 0; mm < sub_antennas; ++mm) {
        for (int kk = 0; kk < sub_carriers; ++kk) {
          out.m(mm * sub_carriers + kk, col) = snap.x(mm + dm, kk + dk);
        }
      }
    }
  }
  return out;
}

NoiseProjector noise_projector(const SmoothedCsi& s, int n_paths) {
  const int rows = static_cast<int>(s.m.rows());
  if (n_paths < 0 || n_paths >= rows) {
    throw std::invalid_argument("noise_projector: n_paths out of range");
  }
  const Eigen::MatrixXcd cov = s.m * s.m.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("noise_projector: eigendecomposition failed");
  }
  // eigenvalues ascending: the first rows - n_paths span the noise subspace
  const int n_noise = rows - n_paths;
  const Eigen::MatrixXcd en = eig.eigenvectors().leftCols(n_noise);

  NoiseProjector out;
  out.h = en * en.adjoint();
  out.rank = n_noise;
  if (n_paths > 0 && n_noise > 0) {
    const double noise_max = eig.eigenvalues()(n_noise - 1);
    const double signal_min = eig.eigenvalues()(n_noise);
    out.degenerate_gap = signal_min < 2.0 * std::max(noise_max, 1e-300);
  }
  return out;
}

Eigen::VectorXcd steering_vector(double theta_deg, double tau_ns,
                                 const SmoothedCsi& g) {
  const double phi_step = -2.0 * M_PI * g.antenna_spacing_m *
                          std::sin(theta_deg * M_PI / 180.0) * g.carrier_hz /
                          kSpeedOfLight;
  const double omega_step =
      -2.0 * M_PI * g.subcarrier_spacing_hz * tau_ns * 1e-9;
  Eigen::VectorXcd s(g.sub_antennas * g.sub_carriers);
  for (int m = 0; m < g.sub_antennas; ++m) {
    for (int k = 0; k < g.sub_carriers; ++k) {
      s(m * g.sub_carriers + k) =
          std::exp(std::complex<double>(0.0, phi_step * m + omega_step * k));
    }
  }
  return s;
}

Eigen::VectorXd full_theta_axis(double step_deg) {
  const int n = static_cast<int>(std::llround(180.0 / step_deg)) + 1;
  Eigen::VectorXd axis(n);
  for (int i = 0; i < n; ++i) axis(i) = -90.0 + i * step_deg;
  return axis;
}

Eigen::VectorXd windowed_theta_axis(double center_deg, double halfwidth_deg,
                                    double step_deg) {
  const double snapped = std::round(center_deg / step_deg) * step_deg;
  const int half = static_cast<int>(std::llround(halfwidth_deg / step_deg));
  std::vector<double> nodes;
  for (int i = -half; i <= half; ++i) {
    const double theta = snapped + i * step_deg;
    if (theta >= -90.0 - 1e-12 && theta <= 90.0 + 1e-12) nodes.push_back(theta);
  }
  return Eigen::Map<Eigen::VectorXd>(nodes.data(), nodes.size());
}

Eigen::VectorXd default_tau_axis(double subcarrier_spacing_hz,
                                 double step_ns) {
  const double span_ns = 1e9 / subcarrier_spacing_hz;
  const int n = static_cast<int>(std::floor(span_ns / step_ns - 1e-9));
  Eigen::VectorXd axis(n);
  for (int i = 0; i < n; ++i) axis(i) = i * step_ns;
  return axis;
}

SpectrumGrid evaluate_spectrum(const NoiseProjector& proj,
                               const SmoothedCsi& g,
                               const Eigen::VectorXd& theta_axis,
                               const Eigen::VectorXd& tau_axis) {
  if (theta_axis.size() == 0 || tau_axis.size() == 0) {
    throw std::invalid_argument("evaluate_spectrum: empty window");
  }
  const int ms = g.sub_antennas;
  const int ks = g.sub_carriers;
  const int rows = ms * ks;
  if (proj.h.rows() != rows) {
    throw std::invalid_argument("evaluate_spectrum: projector size mismatch");
  }

  SpectrumGrid grid;
  grid.theta_deg = theta_axis;
  grid.tau_ns = tau_axis;
  grid.power.resize(theta_axis.size(), tau_axis.size());
  grid.evaluations = static_cast<long>(theta_axis.size()) *
                     static_cast<long>(tau_axis.size());

  // s = a(theta) (x) b(tau) factorizes the quadratic form: fold the antenna
  // index into lag sums over the subcarrier index once per theta column,
  // then each tau costs O(K_s) instead of O((M_s K_s)^2).
  std::vector<std::complex<double>> lag(ks);
  for (int ti = 0; ti < theta_axis.size(); ++ti) {
    const double phi_step = -2.0 * M_PI * g.antenna_spacing_m *
                            std::sin(theta_axis(ti) * M_PI / 180.0) *
                            g.carrier_hz / kSpeedOfLight;
    std::vector<std::complex<double>> phi_pow(2 * ms - 1);
    for (int d = -(ms - 1); d <= ms - 1; ++d) {
      phi_pow[d + ms - 1] = std::exp(std::complex<double>(0.0, phi_step * d));
    }
    std::fill(lag.begin(), lag.end(), std::complex<double>(0.0, 0.0));
    for (int m = 0; m < ms; ++m) {
      for (int mp = 0; mp < ms; ++mp) {
        const auto w = phi_pow[mp - m + ms - 1];
        for (int k = 0; k < ks; ++k) {
          for (int kp = 0; kp < ks; ++kp) {
            const int l = kp - k;
            if (l < 0) continue;  // Hermitian: negative lags are conjugates
            lag[l] += w * proj.h(m * ks + k, mp * ks + kp);
          }
        }
      }
    }
    for (int qi = 0; qi < tau_axis.size(); ++qi) {
      const double om = -2.0 * M_PI * g.subcarrier_spacing_hz *
                        tau_axis(qi) * 1e-9;
      const std::complex<double> omega(std::cos(om), std::sin(om));
      std::complex<double> w(1.0, 0.0);
      double q = lag[0].real();
      for (int l = 1; l < ks; ++l) {
        w *= omega;
        q += 2.0 * (lag[l] * w).real();
      }
      grid.power(ti, qi) = 1.0 / std::max(std::abs(q), 1e-18);
    }
  }
  return grid;
}

std::vector<AoaEstimate> find_peaks(const SpectrumGrid& grid, int max_peaks,
                                    double rel_threshold) {
  const auto rows = grid.power.rows();
  const auto cols = grid.power.cols();
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("find_peaks: empty grid");
  }
  const double floor = grid.power.maxCoeff() * rel_threshold;
  std::vector<AoaEstimate> peaks;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = grid.power(i, j);
      if (v < floor) continue;
      bool is_peak = true;
      for (int di = -1; di <= 1 && is_peak; ++di) {
        for (int dj = -1; dj <= 1 && is_peak; ++dj) {
          if (di == 0 && dj == 0) continue;
          const Eigen::Index ni = i + di;
          const Eigen::Index nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= rows || nj >= cols) continue;
          if (grid.power(ni, nj) >= v) is_peak = false;
        }
      }
      if (is_peak) {
        peaks.push_back({grid.theta_deg(i), grid.tau_ns(j), 0.0, v});
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const AoaEstimate& a, const AoaEstimate& b) {
              return a.power > b.power;
            });
  if (static_cast<int>(peaks.size()) > max_peaks) peaks.resize(max_peaks);
  return peaks;
}

AoaEstimate select_direct_path(const std::vector<AoaEstimate>& peaks) {
  if (peaks.empty()) throw std::runtime_error("no path detected");
  const AoaEstimate* best = &peaks.front();
  for (const auto& p : peaks) {
    if (p.tof_ns < best->tof_ns - 1e-9 ||
        (std::abs(p.tof_ns - best->tof_ns) <= 1e-9 && p.power > best->power)) {
      best = &p;
    }
  }
  return *best;
}

AoaEstimate spotfi_initial_aoa(std::span<const CsiSnapshot> snapshots,
                               const SpotfiInitConfig& cfg) {
  if (snapshots.size() < 10) {
    throw std::invalid_argument("spotfi_initial_aoa: needs >= 10 snapshots");
  }
  const auto theta = full_theta_axis(cfg.theta_step_deg);
  const auto tau = default_tau_axis(snapshots[0].subcarrier_spacing_hz,
                                    cfg.tau_step_ns);
  SpectrumGrid avg;
  for (size_t i = 0; i < snapshots.size(); ++i) {
    const auto smoothed =
        spatial_smooth(snapshots[i], cfg.sub_antennas, cfg.sub_carriers);
    const auto proj = noise_projector(smoothed, cfg.n_paths);
    SpectrumGrid grid = evaluate_spectrum(proj, smoothed, theta, tau);
    if (i == 0) {
      avg = std::move(grid);
    } else {
      avg.power += grid.power;
      avg.evaluations += grid.evaluations;
    }
  }
  avg.power /= static_cast<double>(snapshots.size());
  auto est = select_direct_path(find_peaks(avg));
  est.t = snapshots.back().t;
  return est;
}

}  // namespace wins
