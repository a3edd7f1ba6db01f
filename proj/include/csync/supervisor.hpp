#pragma once

// Per-inverter mode manager. One of the two reference pairs drives the
// inverter; the other is kept aligned in the background so that a handover
// starts from the same voltage the inverter is already producing.

#include <limits>
#include <string_view>

#include "csync/core_types.hpp"
#include "csync/gfl_path.hpp"
#include "csync/gfm_path.hpp"

namespace csync {

enum class Mode { GFL = 0, GFM = 1 };

std::string_view to_string(Mode m);

struct SyncThresholds {
  double d_theta = rad(5.0);  // rad
  double d_v = 0.03;          // pu
  double d_f = 0.1;           // Hz
  double hold = 0.2;          // s
};

struct SyncStatus {
  double d_theta = 0.0;  // rad, wrapped
  double d_v = 0.0;      // pu
  double d_f = 0.0;      // Hz
  double holds_since = std::numeric_limits<double>::infinity();  // inf: not holding
  bool stale = false;     // PLL input de-energized
};

/// Local measurements at the inverter terminal for one control step. Powers
/// and currents are on the inverter's own rating.
struct Measurements {
  double t = 0.0;
  Phasor v_term{};
  Phasor i_out{};
  double p = 0.0;
  double q = 0.0;
  bool pll_input_live = true;
};

/// Angle/magnitude the GFM path would put on the terminal: its reference
/// minus the virtual-impedance drop.
Phasor gfm_terminal_output(const DroopState& gfm, const VirtualImpedance& vz, Phasor i_out);

/// GFL mode: overwrite the GFM pair with the measured virtual EMF
/// (v_term + z_v i_out), reset the power filters and restoration offsets to
/// the measured state. GFM mode: flag a dead PLL input as stale. Returns the
/// alignment between the two pairs; `prev` carries the hold timer.
SyncStatus shadow_sync_step(Mode mode, const Measurements& meas, PllState& gfl, DroopState& gfm,
                            const VirtualImpedance& vz, const SyncThresholds& thr, double f_nom,
                            const SyncStatus& prev);

enum class DenialReason { None, Stale, Unlocked, Angle, Voltage, Frequency, Hold };

std::string_view to_string(DenialReason r);

struct TransitionDecision {
  bool accepted = false;
  DenialReason reason = DenialReason::None;
};

TransitionDecision request_transition(Mode target, const SyncStatus& status, const SyncThresholds& thr, double t,
                                      bool pll_locked = true);

struct ActiveReference {
  double theta = 0.0;
  double v = 0.0;
};

ActiveReference active_reference(Mode mode, const PllState& gfl, const DroopState& gfm);

}  // namespace csync
