#pragma once

// Fixed-step runner: composes the network, one controller stack per inverter
// and the event script, and records the time series.
//
// Per step: due events, guarded setpoints, network solve, waveform
// synthesis, GFL/GFM paths, supervisor, detectors, record. Controllers act on
// the previous solve (one-step sample delay).

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "csync/gfl_path.hpp"
#include "csync/gfm_path.hpp"
#include "csync/grid_edge_detect.hpp"
#include "csync/metrics.hpp"
#include "csync/network.hpp"
#include "csync/scenario_config.hpp"
#include "csync/setpoint_guard.hpp"
#include "csync/supervisor.hpp"

namespace csync {

/// Live state of one inverter's controller stack. Powers, currents and
/// impedances are on the inverter's own rating.
struct InverterRuntime {
  InverterConfig cfg;
  double k = 1.0;  // rating / s_base
  BusIndex bus = 0;
  Mode mode = Mode::GFL;
  Mode preferred = Mode::GFL;
  bool online = true;
  bool enabled = true;      // GFL output released after PLL lock
  double gfl_scale = 1.0;   // soft release after lock
  DroopParams droop;
  DroopState gfm;
  VirtualImpedance vz;
  PllState pll;
  PqSetpoint gfl_sp;
  SyncStatus sync;
  IslandingDetector detector;
  ReconnectionMonitor recon;
  SetpointGuard guard;
  std::optional<Mode> manual_request;
  DenialReason last_denial = DenialReason::None;
  double last_denial_t = -1e9;
  bool islanded = false;
  bool was_tripped = false;
  bool was_ready = false;
  // latest measurements
  Phasor v_bus{}, v_term{}, i_out{};
  double p = 0.0, q = 0.0;
  Phasor i_next{};  // GFL injection for the next solve, system base

  InverterRuntime(const InverterConfig& c, double dt)
      : cfg(c), detector(c.detector, dt), recon(c.detector), guard(c.guard) {}

  double frequency_hz() const;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> decimation;  // overrides the config
  std::optional<std::uint64_t> seed;
  bool keep_rows = false;         // keep decimated rows in memory
};

struct RunResult {
  MetricsReport metrics;
  std::vector<EventRecord> events;
  std::vector<TimeseriesRow> rows;
  bool aborted = false;
  std::string abort_message;
};

class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  std::size_t step_index() const { return k_; }
  std::size_t step_count() const { return n_steps_; }
  double time() const { return static_cast<double>(k_) * cfg_.dt; }
  bool done() const { return k_ > n_steps_; }

  /// Advances one control step and returns its row. Throws NonConvergence or
  /// NoSourceInIsland on a failed solve.
  const TimeseriesRow& step();

  const std::vector<InverterRuntime>& inverters() const { return inv_; }
  const Network& network() const { return net_; }
  const NetworkState& network_state() const { return state_; }
  const std::vector<EventRecord>& events() const { return events_; }
  std::vector<GuardAuditLine> audit() const;
  MetricsLayout layout() const;
  std::vector<std::string> csv_header() const;

  /// Logs an abort record at the current step.
  void record_abort(const std::string& message);

  /// Called for every new event record, in order.
  std::function<void(const EventRecord&)> on_event;

 private:
  void initialize();
  void apply_due_events(double t);
  void apply_event(const ScriptedEvent& e, double t);
  void solve(double t);
  void measure();
  void control(double t);
  void control_inverter(InverterRuntime& inv, double t);
  void refresh_gfl_current(InverterRuntime& inv);
  void initialize_controllers();
  void supervise(InverterRuntime& inv, double t);
  void detect(InverterRuntime& inv, double t);
  TimeseriesRow record(double t) const;
  void log(double t, std::string type, std::string target, std::string detail);
  AbcSample pll_sample(const InverterRuntime& inv, double t);
  bool pll_input_live(const InverterRuntime& inv) const;
  BusIndex pll_input_bus(const InverterRuntime& inv, bool& terminal) const;
  InverterRuntime& find_inverter(const std::string& id);

  ScenarioConfig cfg_;
  Network net_;
  NetworkSolver solver_;
  NetworkState state_;
  std::vector<Phasor> v_neg_;
  std::vector<InverterRuntime> inv_;
  struct PulseEnd {
    double t;
    std::string target;
    Phasor delta;
  };
  std::size_t next_event_ = 0;
  std::vector<PulseEnd> pulse_ends_;
  std::vector<EventRecord> events_;
  std::size_t k_ = 0;
  std::size_t n_steps_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  TimeseriesRow row_;
};

/// Runs to completion. Solver failures do not throw: the result is marked
/// aborted, and any partial output is still written.
RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

/// CSV writers, 9 significant digits.
std::string format_number(double v);

}  // namespace csync
