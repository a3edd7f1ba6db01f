#pragma once

// Grid-forming path: P-f / Q-V droop with filtered power measurement,
// communication-free frequency restoration, local voltage restoration,
// virtual impedance and soft-start ramping.
//
// All frequencies are per unit of nominal. theta_gfm is measured in the frame
// rotating at nominal frequency, so it advances by (omega - 1) * omega_base * dt
// per step; the absolute angle is theta_gfm + omega_base * t.

#include "csync/core_types.hpp"

namespace csync {

struct DroopParams {
  double m_p = 0.01;             // pu frequency per pu power
  double n_q = 0.05;             // pu voltage per pu reactive power
  double omega_c = kTwoPi * 10;  // rad/s, power filter cutoff
  double k_r = 0.5;              // 1/s, frequency restoration gain
  double k_v = 0.1;              // 1/s, voltage restoration gain
  double u_limit = 0.05;         // pu
  double u_v_limit = 0.05;       // pu
  double p_set = 0.0;
  double q_set = 0.0;
  double v_nom = 1.0;
  double f_nom = 60.0;

  double omega_base() const { return kTwoPi * f_nom; }
};

enum class RampMode { None, BlackStart, Slew };

struct DroopState {
  double p_f = 0.0;
  double q_f = 0.0;
  double u = 0.0;      // frequency restoration offset, pu
  double u_v = 0.0;    // voltage restoration offset, pu
  double theta_gfm = 0.0;
  double v_gfm = 1.0;
  double omega = 1.0;  // pu

  RampMode ramp = RampMode::None;
  double ramp_rate = 0.5;    // pu/s
  double ramp_target = 1.0;  // pu, black-start target
};

struct VirtualImpedance {
  double r_v = 0.0;
  double x_v = 0.05;
  double x_v_min = 0.0;
  double x_v_max = 0.3;
  double k_adapt = 0.0;
  double i_thresh = 1.0;
  double filter_tc = 0.02;  // s, current-magnitude filter
  double i_filtered = 0.0;

  Phasor impedance() const { return {r_v, x_v}; }
};

DroopState power_filter_step(double p_raw, double q_raw, double dt, const DroopState& state,
                             const DroopParams& params);

/// omega = 1 - m_p (p_f - p_set) + u; voltage from the Q-V droop plus the local
/// voltage offset, subject to any active ramp.
DroopState droop_step(const DroopParams& params, const DroopState& state, double dt);

/// u += dt k_r (1 - omega), halted at +-u_limit.
DroopState restoration_step(const DroopParams& params, const DroopState& state, double dt);

/// u_v += dt k_v (v_nom - v_meas), halted at +-u_v_limit. Inactive during a
/// black-start ramp.
DroopState voltage_restoration_step(const DroopParams& params, const DroopState& state, double v_meas, double dt);

struct VirtualImpedanceOutput {
  Phasor v_out{};
  VirtualImpedance vz;
};

/// v_out = v_ref - (r_v + j x_v) i_meas; x_v adapts on the filtered current
/// magnitude and stays within [x_v_min, x_v_max].
VirtualImpedanceOutput virtual_impedance_step(Phasor v_ref, Phasor i_meas, const VirtualImpedance& vz, double dt);

/// Soft start: v_gfm rises toward `target` at `ramp_rate` and never overshoots.
DroopState black_start_ramp(const DroopState& state, double dt, double ramp_rate, double target);

/// Rate-limited move of `value` toward `target`.
double slew_toward(double value, double target, double rate, double dt);

/// Q-V droop target before any ramp limiting.
double droop_voltage_target(const DroopParams& params, const DroopState& state);

}  // namespace csync
