#pragma once

// Per-unit quantities, phasors and three-phase frames shared by every module.
//
// Per-unit convention used across the library:
//   P = v_d * i_d + v_q * i_q
//   Q = v_q * i_d - v_d * i_q
// The 3/2 factor of the amplitude-invariant transforms is absorbed into the
// base definitions, so a balanced 1 pu set carrying 1 pu current delivers
// 1 pu power.

#include <cmath>
#include <complex>
#include <numbers>

namespace csync {

using Phasor = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct PerUnitBase {
  double s_base = 5000.0;  // VA
  double v_base = 208.0;   // line-to-line RMS volts
  double f_nom = 60.0;     // Hz

  double omega_base() const { return kTwoPi * f_nom; }
  bool valid() const { return s_base > 0.0 && v_base > 0.0 && f_nom > 0.0; }
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double theta) {
  double w = std::remainder(theta, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double degrees) { return degrees * kPi / 180.0; }

/// Angle of a phasor, wrapped to (-pi, pi].
inline double phasor_angle(Phasor p) { return wrap_angle(std::arg(p)); }

inline Phasor polar_deg(double mag, double angle_deg) { return std::polar(mag, rad(angle_deg)); }

struct SequenceSet {
  Phasor pos{};
  Phasor neg{};
  Phasor zero{};
};

struct AbcSample {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double t = 0.0;
};

struct AlphaBeta {
  double alpha = 0.0;
  double beta = 0.0;
};

struct DqFrame {
  double d = 0.0;
  double q = 0.0;

  double magnitude() const { return std::hypot(d, q); }
};

struct PhaseTriple {
  Phasor a{};
  Phasor b{};
  Phasor c{};
};

}  // namespace csync
