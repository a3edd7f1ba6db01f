#pragma once

// Setpoint screening against an analytical reference model of the plant: the
// droop steady-state algebra predicts the island frequency and voltage a new
// setpoint would produce, and harmful commands are dropped before they reach
// the controller.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csync/gfm_path.hpp"
#include "csync/supervisor.hpp"

namespace csync {

struct Setpoint {
  double p_set = 0.0;
  double q_set = 0.0;
  double v_nom = 1.0;
  std::optional<Mode> mode_cmd;
  double t_issued = 0.0;
  std::string source_id;
};

enum class GuardReason { None, Range, Rate, PredictedFrequency, PredictedVoltage };

std::string_view to_string(GuardReason r);

struct GuardVerdict {
  bool accepted = true;
  GuardReason reason = GuardReason::None;
  double predicted_f = 0.0;  // Hz
  double predicted_v = 0.0;  // pu
};

struct GuardLimits {
  double s_max = 1.0;
  double v_nom_min = 0.9;
  double v_nom_max = 1.1;
  double dp_max = 0.2;
  double dv_nom_max = 0.05;
  double f_min = 59.5;  // Hz
  double f_max = 60.5;  // Hz
  double v_min = 0.9;
  double v_max = 1.1;
};

/// Controller gains and currently accepted setpoints, plus the local load
/// estimate (the inverter's filtered output power).
struct PlantSnapshot {
  DroopParams params;
  DroopState state;
  double p_load_est = 0.0;
  double q_load_est = 0.0;
};

double predict_frequency(const PlantSnapshot& plant, double p_set_new);
double predict_voltage(const PlantSnapshot& plant, double q_set_new, double v_nom_new);

/// Checks in order: range, rate, predicted frequency, predicted voltage.
GuardVerdict validate(const Setpoint& sp, const PlantSnapshot& plant, const GuardLimits& limits);

struct AuditEntry {
  double t = 0.0;
  std::string source_id;
  GuardVerdict verdict;
};

/// Per-inverter guard with an append-only audit log.
class SetpointGuard {
 public:
  explicit SetpointGuard(GuardLimits limits = {}) : limits_(limits) {}

  GuardVerdict submit(const Setpoint& sp, const PlantSnapshot& plant);

  const GuardLimits& limits() const { return limits_; }
  const std::vector<AuditEntry>& audit() const { return audit_; }

 private:
  GuardLimits limits_;
  std::vector<AuditEntry> audit_;
};

}  // namespace csync
