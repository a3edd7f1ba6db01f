#include "csync/supervisor.hpp"

#include <cmath>

namespace csync {

std::string_view to_string(Mode m) { return m == Mode::GFM ? "GFM" : "GFL"; }

std::string_view to_string(DenialReason r) {
  switch (r) {
    case DenialReason::None: return "none";
    case DenialReason::Stale: return "stale";
    case DenialReason::Unlocked: return "unlocked";
    case DenialReason::Angle: return "angle";
    case DenialReason::Voltage: return "voltage";
    case DenialReason::Frequency: return "frequency";
    case DenialReason::Hold: return "hold";
  }
  return "unknown";
}

Phasor gfm_terminal_output(const DroopState& gfm, const VirtualImpedance& vz, Phasor i_out) {
  return std::polar(gfm.v_gfm, gfm.theta_gfm) - vz.impedance() * i_out;
}

SyncStatus shadow_sync_step(Mode mode, const Measurements& meas, PllState& gfl, DroopState& gfm,
                            const VirtualImpedance& vz, const SyncThresholds& thr, double f_nom,
                            const SyncStatus& prev) {
  SyncStatus st;
  if (mode == Mode::GFL) {
    const Phasor emf = meas.v_term + vz.impedance() * meas.i_out;
    // Keep theta_gfm unwrapped: move by the wrapped difference.
    gfm.theta_gfm += wrap_angle(std::arg(emf) - gfm.theta_gfm);
    gfm.v_gfm = std::abs(emf);
    gfm.p_f = meas.p;
    gfm.q_f = meas.q;
    gfm.u = 0.0;
    gfm.u_v = 0.0;
    gfm.omega = gfl.omega_est / (kTwoPi * f_nom);
    gfm.ramp = RampMode::None;
  } else if (!meas.pll_input_live) {
    st.stale = true;
    gfl.lock = false;
  }

  const Phasor out = gfm_terminal_output(gfm, vz, meas.i_out);
  st.d_theta = wrap_angle(std::arg(out) - gfl.theta_est);
  st.d_v = std::abs(out) - gfl.v_mag;
  st.d_f = gfm.omega * f_nom - gfl.frequency_hz();

  const bool within = !st.stale && std::abs(st.d_theta) <= thr.d_theta &&
                      std::abs(st.d_v) <= thr.d_v && std::abs(st.d_f) <= thr.d_f;
  if (within) {
    st.holds_since = std::isfinite(prev.holds_since) ? prev.holds_since : meas.t;
  }
  return st;
}

TransitionDecision request_transition(Mode /*target*/, const SyncStatus& status, const SyncThresholds& thr, double t,
                                      bool pll_locked) {
  auto deny = [](DenialReason r) { return TransitionDecision{false, r}; };
  if (status.stale) return deny(DenialReason::Stale);
  if (!pll_locked) return deny(DenialReason::Unlocked);
  if (std::abs(status.d_theta) > thr.d_theta) return deny(DenialReason::Angle);
  if (std::abs(status.d_v) > thr.d_v) return deny(DenialReason::Voltage);
  if (std::abs(status.d_f) > thr.d_f) return deny(DenialReason::Frequency);
  if (!(t - status.holds_since >= thr.hold - 1e-12)) return deny(DenialReason::Hold);
  return {true, DenialReason::None};
}

ActiveReference active_reference(Mode mode, const PllState& gfl, const DroopState& gfm) {
  if (mode == Mode::GFM) return {gfm.theta_gfm, gfm.v_gfm};
  return {gfl.theta_est, gfl.v_mag};
}

}  // namespace csync
