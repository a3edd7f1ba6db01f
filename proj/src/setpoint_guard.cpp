#include "csync/setpoint_guard.hpp"

#include <cmath>

namespace csync {

namespace {
// absorbs representation error in decimal setpoints such as 0.8 - 0.6
constexpr double kEps = 1e-9;
}  // namespace

std::string_view to_string(GuardReason r) {
  switch (r) {
    case GuardReason::None: return "none";
    case GuardReason::Range: return "range";
    case GuardReason::Rate: return "rate";
    case GuardReason::PredictedFrequency: return "predicted-frequency";
    case GuardReason::PredictedVoltage: return "predicted-voltage";
  }
  return "unknown";
}

double predict_frequency(const PlantSnapshot& plant, double p_set_new) {
  return plant.params.f_nom * (1.0 - plant.params.m_p * (plant.p_load_est - p_set_new) + plant.state.u);
}

double predict_voltage(const PlantSnapshot& plant, double q_set_new, double v_nom_new) {
  return v_nom_new - plant.params.n_q * (plant.q_load_est - q_set_new) + plant.state.u_v;
}

GuardVerdict validate(const Setpoint& sp, const PlantSnapshot& plant, const GuardLimits& lim) {
  GuardVerdict v;
  v.predicted_f = predict_frequency(plant, sp.p_set);
  v.predicted_v = predict_voltage(plant, sp.q_set, sp.v_nom);

  auto reject = [&](GuardReason r) {
    v.accepted = false;
    v.reason = r;
    return v;
  };
  const bool finite = std::isfinite(sp.p_set) && std::isfinite(sp.q_set) && std::isfinite(sp.v_nom);
  if (!finite || std::hypot(sp.p_set, sp.q_set) > lim.s_max + kEps ||
      sp.v_nom < lim.v_nom_min - kEps || sp.v_nom > lim.v_nom_max + kEps) {
    return reject(GuardReason::Range);
  }
  if (std::abs(sp.p_set - plant.params.p_set) > lim.dp_max + kEps ||
      std::abs(sp.v_nom - plant.params.v_nom) > lim.dv_nom_max + kEps) {
    return reject(GuardReason::Rate);
  }
  if (v.predicted_f < lim.f_min || v.predicted_f > lim.f_max) return reject(GuardReason::PredictedFrequency);
  if (v.predicted_v < lim.v_min || v.predicted_v > lim.v_max) return reject(GuardReason::PredictedVoltage);
  return v;
}

GuardVerdict SetpointGuard::submit(const Setpoint& sp, const PlantSnapshot& plant) {
  const GuardVerdict v = validate(sp, plant, limits_);
  audit_.push_back({sp.t_issued, sp.source_id, v});
  return v;
}

}  // namespace csync
