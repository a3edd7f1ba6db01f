#include "csync/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "csync/core_types.hpp"

namespace csync {

namespace {

constexpr double kBand = 0.01;  // Hz
constexpr double kTimeEps = 1e-9;

bool counts_for_frequency(const InverterSample& s) { return s.online && (s.mode == Mode::GFM || s.lock); }

nlohmann::json opt(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return "n/a";
}

}  // namespace

bool is_scripted_event_type(const std::string& type) {
  static const std::set<std::string> names = {"load_step",      "breaker_set", "source_freq",
                                              "source_unbalance", "source_voltage", "setpoint",
                                              "mode_command",   "inverter_plug_in", "pulse_load"};
  return names.count(type) > 0;
}

double MetricsReport::max_phase_jump_deg() const {
  double m = 0.0;
  for (const auto& t : transitions) m = std::max(m, t.phase_jump_deg);
  return m;
}

double MetricsReport::max_magnitude_jump_pu() const {
  double m = 0.0;
  for (const auto& t : transitions) m = std::max(m, t.magnitude_jump_pu);
  return m;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["aborted"] = aborted;
  j["abort_reason"] = aborted ? nlohmann::json(abort_reason) : nlohmann::json("n/a");
  j["steps"] = steps;
  j["frequency_nadir_hz"] = opt(nadir_hz);
  j["frequency_nadir_time_s"] = opt(nadir_t);
  j["settling_time_s"] = opt(settling_time);
  if (transitions.empty()) {
    j["transitions"] = "n/a";
    j["max_phase_jump_deg"] = "n/a";
    j["max_magnitude_jump_pu"] = "n/a";
  } else {
    j["transitions"] = nlohmann::json::array();
    for (const auto& t : transitions) {
      j["transitions"].push_back({{"t", t.t},
                                  {"inverter", t.inverter},
                                  {"transition", t.detail},
                                  {"phase_jump_deg", t.phase_jump_deg},
                                  {"magnitude_jump_pu", t.magnitude_jump_pu}});
    }
    j["max_phase_jump_deg"] = max_phase_jump_deg();
    j["max_magnitude_jump_pu"] = max_magnitude_jump_pu();
  }
  j["islanding_detection_latency_s"] = opt(detection_latency);
  j["reconnection_ready_time_s"] = opt(reconnection_ready_time);
  j["power_sharing_error"] = opt(sharing_error);
  if (guard_audit.empty()) {
    j["guard_audit"] = "n/a";
  } else {
    nlohmann::json g;
    std::size_t accepted = 0;
    nlohmann::json by_reason = nlohmann::json::object();
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& a : guard_audit) {
      if (a.accepted) {
        ++accepted;
      } else {
        const std::string r(to_string(a.reason));
        by_reason[r] = by_reason.value(r, 0) + 1;
      }
      lines.push_back({{"t", a.t},
                       {"inverter", a.inverter},
                       {"source_id", a.source_id},
                       {"verdict", a.accepted ? "accepted" : "rejected"},
                       {"reason", std::string(to_string(a.reason))},
                       {"predicted_f_hz", a.predicted_f},
                       {"predicted_v_pu", a.predicted_v}});
    }
    g["submitted"] = guard_audit.size();
    g["accepted"] = accepted;
    g["rejected"] = guard_audit.size() - accepted;
    g["rejected_by_reason"] = by_reason;
    g["entries"] = lines;
    j["guard_audit"] = g;
  }
  j["power_balance_max_residual"] = max_balance_residual;
  return j;
}

MetricsAccumulator::MetricsAccumulator(MetricsLayout layout) : layout_(std::move(layout)) {}

void MetricsAccumulator::on_event(const EventRecord& e) {
  if (is_scripted_event_type(e.type) && !first_event_t_) first_event_t_ = e.t;
  if (e.type == "breaker_set" && e.detail == "open" && !pcc_open_t_ &&
      std::find(layout_.pcc_breakers.begin(), layout_.pcc_breakers.end(), e.target) != layout_.pcc_breakers.end()) {
    pcc_open_t_ = e.t;
  }
  if (e.type == "islanding_detected" && pcc_open_t_ && !detect_t_) detect_t_ = e.t;
  if (e.type == "reconnection_ready" && !ready_t_) ready_t_ = e.t;
  if (e.type == "transition") pending_.push_back({e.t, e.target, e.detail, 0.0, 0.0});
}

void MetricsAccumulator::on_row(const TimeseriesRow& row) {
  ++steps_;
  max_residual_ = std::max(max_residual_, row.balance_residual);

  bool out = false;
  for (const auto& s : row.inverters) {
    if (!counts_for_frequency(s)) continue;
    if (!nadir_hz_ || s.f < *nadir_hz_) {
      nadir_hz_ = s.f;
      nadir_t_ = row.t;
    }
    if (std::abs(s.f - layout_.f_nom) > kBand) out = true;
  }
  if (out) last_out_of_band_t_ = row.t;
  final_out_of_band_ = out;

  if (prev_ && !pending_.empty()) {
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (row.t > it->t + kTimeEps) {
        const auto inv = std::find(layout_.inverter_ids.begin(), layout_.inverter_ids.end(), it->inverter);
        if (inv != layout_.inverter_ids.end()) {
          const std::size_t b = layout_.inverter_bus[static_cast<std::size_t>(inv - layout_.inverter_ids.begin())];
          it->phase_jump_deg = std::abs(deg(wrap_angle(rad(row.v_ang_deg[b] - prev_->v_ang_deg[b]))));
          it->magnitude_jump_pu = std::abs(row.v_mag[b] - prev_->v_mag[b]);
        }
        done_.push_back(*it);
        it = pending_.erase(it);
      } else {
        ++it;
      }
    }
  }
  prev_ = row;
  last_ = row;
}

std::optional<double> sharing_error(const MetricsLayout& layout, const TimeseriesRow& row) {
  std::vector<std::size_t> gfm;
  for (std::size_t i = 0; i < row.inverters.size(); ++i) {
    if (row.inverters[i].online && row.inverters[i].mode == Mode::GFM) gfm.push_back(i);
  }
  if (gfm.size() < 2) return std::nullopt;
  const std::size_t r = gfm.front();
  double err = 0.0;
  for (std::size_t k = 1; k < gfm.size(); ++k) {
    const std::size_t i = gfm[k];
    const double pi = row.inverters[i].p;
    if (std::abs(pi) < 1e-9) return std::nullopt;
    err = std::max(err, std::abs(row.inverters[r].p / pi - layout.m_p[i] / layout.m_p[r]));
  }
  return err;
}

MetricsReport MetricsAccumulator::finish(bool aborted, std::string abort_reason) const {
  MetricsReport m;
  m.scenario = layout_.scenario;
  m.aborted = aborted;
  m.abort_reason = std::move(abort_reason);
  m.steps = steps_;
  m.nadir_hz = nadir_hz_;
  m.nadir_t = nadir_t_;
  if (steps_ > 0 && !final_out_of_band_) {
    const double t0 = first_event_t_.value_or(0.0);
    m.settling_time = last_out_of_band_t_ ? std::max(0.0, *last_out_of_band_t_ - t0) : 0.0;
  }
  m.transitions = done_;
  if (pcc_open_t_ && detect_t_) m.detection_latency = *detect_t_ - *pcc_open_t_;
  m.reconnection_ready_time = ready_t_;
  if (last_) m.sharing_error = sharing_error(layout_, *last_);
  m.max_balance_residual = max_residual_;
  return m;
}

MetricsReport compute_metrics(const MetricsLayout& layout, const std::vector<TimeseriesRow>& rows,
                              const std::vector<EventRecord>& events, const std::vector<GuardAuditLine>& audit) {
  MetricsAccumulator acc(layout);
  std::size_t e = 0;
  bool aborted = false;
  std::string reason;
  for (const auto& row : rows) {
    while (e < events.size() && events[e].t <= row.t + kTimeEps) {
      acc.on_event(events[e]);
      if (events[e].type == "abort") {
        aborted = true;
        reason = events[e].detail;
      }
      ++e;
    }
    acc.on_row(row);
  }
  for (; e < events.size(); ++e) {
    acc.on_event(events[e]);
    if (events[e].type == "abort") {
      aborted = true;
      reason = events[e].detail;
    }
  }
  MetricsReport m = acc.finish(aborted, reason);
  m.guard_audit = audit;
  return m;
}

}  // namespace csync
