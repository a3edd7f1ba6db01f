#pragma once

// Run summary metrics. The same accumulator serves the live runner (fed one
// control step at a time, so decimation never affects values) and offline
// recomputation from a recorded run.

#include <optional>
#include <string>
#include <vector>

#include "csync/setpoint_guard.hpp"
#include "csync/supervisor.hpp"

#include "json.hpp"

namespace csync {

struct InverterSample {
  double f = 0.0;  // Hz
  double p = 0.0;  // pu, own rating
  double q = 0.0;
  Mode mode = Mode::GFL;
  bool lock = false;
  bool island = false;
  bool recon = false;
  bool online = true;
};

struct TimeseriesRow {
  double t = 0.0;
  std::vector<double> v_mag;      // pu, per bus
  std::vector<double> v_ang_deg;  // deg in the nominal rotating frame, wrapped
  std::vector<InverterSample> inverters;
  double balance_residual = 0.0;  // not part of the CSV
};

struct EventRecord {
  double t = 0.0;
  std::string type;
  std::string target;
  std::string detail;
};

/// True for types that originate from the scenario script.
bool is_scripted_event_type(const std::string& type);

struct MetricsLayout {
  std::string scenario;
  double f_nom = 60.0;
  std::vector<std::string> bus_ids;
  std::vector<std::string> inverter_ids;
  std::vector<std::size_t> inverter_bus;
  std::vector<double> m_p;
  std::vector<std::string> pcc_breakers;
};

struct TransitionMetric {
  double t = 0.0;
  std::string inverter;
  std::string detail;
  double phase_jump_deg = 0.0;
  double magnitude_jump_pu = 0.0;
};

struct GuardAuditLine {
  double t = 0.0;
  std::string inverter;
  std::string source_id;
  bool accepted = true;
  GuardReason reason = GuardReason::None;
  double predicted_f = 0.0;
  double predicted_v = 0.0;
};

struct MetricsReport {
  std::string scenario;
  bool aborted = false;
  std::string abort_reason;
  std::size_t steps = 0;
  std::optional<double> nadir_hz;
  std::optional<double> nadir_t;
  std::optional<double> settling_time;
  std::vector<TransitionMetric> transitions;
  std::optional<double> detection_latency;
  std::optional<double> reconnection_ready_time;
  std::optional<double> sharing_error;
  std::vector<GuardAuditLine> guard_audit;
  double max_balance_residual = 0.0;

  double max_phase_jump_deg() const;
  double max_magnitude_jump_pu() const;
  nlohmann::json to_json() const;
};

class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(MetricsLayout layout);

  /// Events at time t must be fed before the row at t.
  void on_event(const EventRecord& e);
  void on_row(const TimeseriesRow& row);
  MetricsReport finish(bool aborted = false, std::string abort_reason = {}) const;

 private:
  MetricsLayout layout_;
  std::size_t steps_ = 0;
  std::optional<double> first_event_t_;
  std::optional<double> last_out_of_band_t_;
  bool final_out_of_band_ = false;
  std::optional<double> nadir_hz_, nadir_t_;
  std::optional<double> pcc_open_t_;
  std::optional<double> detect_t_;
  std::optional<double> ready_t_;
  std::vector<TransitionMetric> pending_;
  std::vector<TransitionMetric> done_;
  std::optional<TimeseriesRow> prev_;
  std::optional<TimeseriesRow> last_;
  double max_residual_ = 0.0;
};

std::optional<double> sharing_error(const MetricsLayout& layout, const TimeseriesRow& row);

MetricsReport compute_metrics(const MetricsLayout& layout, const std::vector<TimeseriesRow>& rows,
                              const std::vector<EventRecord>& events,
                              const std::vector<GuardAuditLine>& audit = {});

}  // namespace csync
