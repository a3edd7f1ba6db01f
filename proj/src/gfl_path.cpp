#include "csync/gfl_path.hpp"

#include <algorithm>
#include <cmath>

#include "csync/transforms.hpp"

namespace csync {

namespace {

constexpr double kMinVoltage = 0.05;

// One trapezoidal step of a SOGI tuned to `w` (already prewarped):
//   x1' = k w (u - x1) - w x2
//   x2' = w x1
// x1 tracks the input in phase, x2 lags it by 90 degrees.
void sogi_step(double& x1, double& x2, double u, double u_prev, double w, double k, double h) {
  const double a11 = -k * w, a12 = -w, a21 = w;
  const double hh = 0.5 * h;
  // (I - A h/2)
  const double m11 = 1.0 - a11 * hh, m12 = -a12 * hh, m21 = -a21 * hh, m22 = 1.0;
  // (I + A h/2) x + (h/2) B (u + u_prev)
  const double b = k * w;
  const double r1 = (1.0 + a11 * hh) * x1 + a12 * hh * x2 + hh * b * (u + u_prev);
  const double r2 = a21 * hh * x1 + x2;
  const double det = m11 * m22 - m12 * m21;
  x1 = (m22 * r1 - m12 * r2) / det;
  x2 = (-m21 * r1 + m11 * r2) / det;
}

double prewarp(double w, double h) { return (2.0 / h) * std::tan(0.5 * w * h); }

}  // namespace

PllState make_pll_state(const PllParams& params) {
  PllState s;
  s.omega_est = params.omega_nom();
  s.omega_locked = params.omega_nom();
  return s;
}

PllState make_locked_pll_state(const PllParams& params, Phasor v_pos, Phasor v_neg, double t, double /*dt*/) {
  PllState s = make_pll_state(params);
  const double w = params.omega_nom();
  const Phasor alpha = v_pos + v_neg;
  const Phasor beta = Phasor{0.0, -1.0} * v_pos + Phasor{0.0, 1.0} * v_neg;
  const Phasor rot = std::polar(1.0, w * t);
  const Phasor lag{0.0, -1.0};
  s.sogi = {(alpha * rot).real(), (lag * alpha * rot).real(), (beta * rot).real(), (lag * beta * rot).real()};
  s.prev_alpha = (alpha * rot).real();
  s.prev_beta = (beta * rot).real();
  s.theta_est = std::arg(v_pos);
  s.v_mag = std::abs(v_pos);
  s.v_pos = {s.v_mag, 0.0};
  s.q_filtered = 0.0;
  s.lock = s.v_mag >= params.uv_threshold;
  s.lock_timer = s.lock ? params.lock_time : 0.0;
  return s;
}

PllState pll_step(const AbcSample& v, double dt, const PllState& state, const PllParams& params) {
  PllState s = state;
  const double w_nom = params.omega_nom();
  const AlphaBeta ab = clarke(v);

  const double w = prewarp(s.omega_est, dt);
  sogi_step(s.sogi[0], s.sogi[1], ab.alpha, s.prev_alpha, w, params.k_sogi, dt);
  sogi_step(s.sogi[2], s.sogi[3], ab.beta, s.prev_beta, w, params.k_sogi, dt);
  s.prev_alpha = ab.alpha;
  s.prev_beta = ab.beta;

  const double pos_alpha = 0.5 * (s.sogi[0] - s.sogi[3]);
  const double pos_beta = 0.5 * (s.sogi[1] + s.sogi[2]);

  s.theta_est += (s.omega_est - w_nom) * dt;
  s.v_pos = park(pos_alpha, pos_beta, s.theta_est + w_nom * v.t);
  s.v_mag = s.v_pos.magnitude();

  // Loss of input is judged on the raw sample; the filter outputs ring on
  // for a few milliseconds after the input dies.
  if (std::hypot(ab.alpha, ab.beta) < params.uv_threshold) {
    s.uv_timer += dt;
    s.lock_timer = 0.0;
    if (s.uv_timer > params.uv_time) {
      s.lock = false;
      s.omega_est = s.omega_locked;
      s.pi_integrator = s.omega_locked - w_nom;
    }
    return s;
  }
  s.uv_timer = 0.0;
  if (s.v_mag < params.uv_threshold) return s;  // filter still charging

  const double err = s.v_pos.q / s.v_mag;
  const double w_lo = 0.8 * w_nom - w_nom, w_hi = 1.2 * w_nom - w_nom;
  s.pi_integrator = std::clamp(s.pi_integrator + params.ki() * err * dt, w_lo, w_hi);
  s.omega_est = w_nom + std::clamp(s.pi_integrator + params.kp() * err, w_lo, w_hi);

  s.q_filtered += (dt / params.lock_filter_tc) * (std::abs(err) - s.q_filtered);
  if (s.q_filtered < params.lock_threshold) {
    s.lock_timer = std::min(s.lock_timer + dt, params.lock_time);
  } else {
    s.lock_timer = 0.0;
  }
  s.lock = s.lock_timer >= params.lock_time;
  if (s.lock) s.omega_locked = w_nom + s.pi_integrator;
  return s;
}

CurrentRefs current_refs_from_pq(const PqSetpoint& sp, const DqFrame& v, double i_max) {
  CurrentRefs out;
  const double v2 = v.d * v.d + v.q * v.q;
  if (v2 < kMinVoltage * kMinVoltage) {
    out.under_voltage = true;
    return out;
  }
  out.i_d = (v.d * sp.p_set + v.q * sp.q_set) / v2;
  out.i_q = (v.q * sp.p_set - v.d * sp.q_set) / v2;
  const double mag = std::hypot(out.i_d, out.i_q);
  if (mag > i_max) {
    const double scale = i_max / mag;
    out.i_d *= scale;
    out.i_q *= scale;
    out.clamped = true;
  }
  return out;
}

Phasor gfl_injection(const CurrentRefs& refs, double theta) {
  return Phasor{refs.i_d, refs.i_q} * std::polar(1.0, theta);
}

}  // namespace csync
