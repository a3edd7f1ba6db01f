#include "csync/gfm_path.hpp"

#include <algorithm>
#include <cmath>

namespace csync {

namespace {
constexpr double kVMax = 1.2;
}

DroopState power_filter_step(double p_raw, double q_raw, double dt, const DroopState& state,
                             const DroopParams& params) {
  DroopState s = state;
  const double a = dt * params.omega_c;
  s.p_f += a * (p_raw - s.p_f);
  s.q_f += a * (q_raw - s.q_f);
  return s;
}

double droop_voltage_target(const DroopParams& params, const DroopState& state) {
  return std::clamp(params.v_nom - params.n_q * (state.q_f - params.q_set) + state.u_v, 0.0, kVMax);
}

double slew_toward(double value, double target, double rate, double dt) {
  const double step = rate * dt;
  if (std::abs(target - value) <= step) return target;
  return value + (target > value ? step : -step);
}

DroopState black_start_ramp(const DroopState& state, double dt, double ramp_rate, double target) {
  DroopState s = state;
  if (s.v_gfm < target) s.v_gfm = std::min(s.v_gfm + ramp_rate * dt, target);
  return s;
}

DroopState droop_step(const DroopParams& params, const DroopState& state, double dt) {
  DroopState s = state;
  s.omega = 1.0 - params.m_p * (s.p_f - params.p_set) + s.u;
  s.theta_gfm += (s.omega - 1.0) * params.omega_base() * dt;

  switch (s.ramp) {
    case RampMode::BlackStart:
      s = black_start_ramp(s, dt, s.ramp_rate, s.ramp_target);
      if (s.v_gfm >= s.ramp_target) s.ramp = RampMode::Slew;
      break;
    case RampMode::Slew: {
      const double target = droop_voltage_target(params, s);
      s.v_gfm = slew_toward(s.v_gfm, target, s.ramp_rate, dt);
      if (s.v_gfm == target) s.ramp = RampMode::None;
      break;
    }
    case RampMode::None:
      s.v_gfm = droop_voltage_target(params, s);
      break;
  }
  return s;
}

DroopState restoration_step(const DroopParams& params, const DroopState& state, double dt) {
  DroopState s = state;
  s.u = std::clamp(s.u + dt * params.k_r * (1.0 - s.omega), -params.u_limit, params.u_limit);
  return s;
}

DroopState voltage_restoration_step(const DroopParams& params, const DroopState& state, double v_meas, double dt) {
  DroopState s = state;
  if (s.ramp == RampMode::BlackStart) return s;
  s.u_v = std::clamp(s.u_v + dt * params.k_v * (params.v_nom - v_meas), -params.u_v_limit, params.u_v_limit);
  return s;
}

VirtualImpedanceOutput virtual_impedance_step(Phasor v_ref, Phasor i_meas, const VirtualImpedance& vz, double dt) {
  VirtualImpedanceOutput out{v_ref - vz.impedance() * i_meas, vz};
  auto& z = out.vz;
  z.i_filtered += (dt / z.filter_tc) * (std::abs(i_meas) - z.i_filtered);
  if (z.k_adapt > 0.0) z.x_v += dt * z.k_adapt * (z.i_filtered - z.i_thresh);
  z.x_v = std::clamp(z.x_v, z.x_v_min, z.x_v_max);
  return out;
}

}  // namespace csync
