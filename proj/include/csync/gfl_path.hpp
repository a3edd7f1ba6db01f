#pragma once

// Grid-following path: positive-sequence phase detection on sampled
// three-phase waveforms (dual SOGI + synchronous-frame PLL) and the P/Q to
// current-reference inversion.

#include <array>

#include "csync/core_types.hpp"

namespace csync {

struct PllParams {
  double f_nom = 60.0;
  double k_sogi = 1.4142135623730951;
  double zeta = 0.707;
  double omega_n = kTwoPi * 20.0;  // rad/s
  double lock_threshold = 0.02;    // pu, filtered |q|
  double lock_time = 0.1;          // s
  double lock_filter_tc = 0.01;    // s
  double uv_threshold = 0.05;      // pu
  double uv_time = 0.1;            // s

  double kp() const { return 2.0 * zeta * omega_n; }
  double ki() const { return omega_n * omega_n; }
  double omega_nom() const { return kTwoPi * f_nom; }
};

/// PLL estimator state. `theta_est` is the unwrapped phase of the estimated
/// positive sequence measured in the frame rotating at nominal frequency;
/// the absolute waveform angle is theta_est + omega_nom * t.
struct PllState {
  double theta_est = 0.0;
  double omega_est = kTwoPi * 60.0;  // rad/s
  double pi_integrator = 0.0;        // rad/s, offset from nominal
  // alpha direct, alpha quadrature, beta direct, beta quadrature
  std::array<double, 4> sogi{};
  double prev_alpha = 0.0;
  double prev_beta = 0.0;
  bool lock = false;

  double q_filtered = 1.0;
  double lock_timer = 0.0;
  double uv_timer = 0.0;
  double omega_locked = kTwoPi * 60.0;
  DqFrame v_pos{};   // positive sequence in the PLL frame
  double v_mag = 0.0;

  double theta_absolute(double t, double omega_nom) const { return theta_est + omega_nom * t; }
  double frequency_hz() const { return omega_est / kTwoPi; }
};

/// Fresh, unlocked estimator at nominal frequency.
PllState make_pll_state(const PllParams& params);

/// Estimator state in exact discrete steady state for a sinusoidal input at
/// nominal frequency with the given sequence phasors, as if the sample at
/// time `t` had just been processed.
PllState make_locked_pll_state(const PllParams& params, Phasor v_pos, Phasor v_neg, double t, double dt);

PllState pll_step(const AbcSample& v, double dt, const PllState& state, const PllParams& params);

struct PqSetpoint {
  double p_set = 0.0;
  double q_set = 0.0;
};

struct CurrentRefs {
  double i_d = 0.0;
  double i_q = 0.0;
  bool under_voltage = false;
  bool clamped = false;
};

/// Inverts P = v_d i_d + v_q i_q, Q = v_q i_d - v_d i_q. The magnitude is
/// clamped to `i_max` with the P:Q ratio preserved. Below 0.05 pu the
/// references are zero and `under_voltage` is set.
CurrentRefs current_refs_from_pq(const PqSetpoint& sp, const DqFrame& v, double i_max = 1.2);

/// Rotates dq current references into the network phasor frame.
Phasor gfl_injection(const CurrentRefs& refs, double theta);

}  // namespace csync
