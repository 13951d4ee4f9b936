#pragma once

#include <Eigen/Dense>
#include <complex>

#include "wins/geometry.hpp"

namespace wins {

constexpr double kSpeedOfLight = 2.998e8;  // m/s

/// Uniform linear array with OFDM subcarriers, Intel-5300-like defaults.
struct ArrayGeometry {
  int antennas = 3;
  int subcarriers = 30;
  double carrier_hz = 5.32e9;
  double subcarrier_spacing_hz = 312.5e3;
  double spacing_m = 0.0;  // 0 = lambda/2

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  double spacing() const {
    return spacing_m > 0.0 ? spacing_m : 0.5 * wavelength();
  }
  /// Unambiguous time-of-flight span, ns.
  double tof_span_ns() const { return 1e9 / subcarrier_spacing_hz; }
};

/// One complex channel matrix [antennas x subcarriers].
struct CsiSnapshot {
  double t = 0.0;
  Eigen::MatrixXcd x;
  double carrier_hz = 5.32e9;
  double subcarrier_spacing_hz = 312.5e3;
  double antenna_spacing_m = 0.0;
  /// Set when the source direction is outside (-90, 90) deg in the array
  /// frame; a linear array cannot disambiguate such bearings.
  bool behind_array = false;
};

}  // namespace wins
