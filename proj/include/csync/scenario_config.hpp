#pragma once

// Declarative scenario description: bases, topology, inverters, timed events
// and outputs. The concrete syntax is JSON; see README.md for the schema.

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "csync/core_types.hpp"
#include "csync/gfl_path.hpp"
#include "csync/gfm_path.hpp"
#include "csync/grid_edge_detect.hpp"
#include "csync/network.hpp"
#include "csync/setpoint_guard.hpp"
#include "csync/supervisor.hpp"

#include "json.hpp"

namespace csync {

struct LineConfig {
  std::string id, from, to;
  double r = 0.0, x = 0.0;
};

struct BreakerConfig {
  std::string id, from, to;
  bool closed = true;
};

struct GridSourceConfig {
  std::string id, bus;
  double e_mag = 1.0;
  double e_angle_deg = 0.0;
  double r_s = 0.0;
  double x_s = 0.01;
  double f_hz = 60.0;
  double rating_va = 30000.0;
};

struct LoadConfig {
  std::string id, bus;
  LoadKind kind = LoadKind::ConstantImpedance;
  double p = 0.0;  // pu at 1 pu voltage
  double q = 0.0;
};

struct BlackStartConfig {
  double ramp_rate = 0.5;  // pu/s
  double target = 1.0;     // pu
};

struct InverterConfig {
  std::string id, bus;
  double rating_va = 5000.0;
  Mode mode = Mode::GFL;
  Mode preferred_mode = Mode::GFL;
  bool online = true;
  double p_set = 0.0, q_set = 0.0, v_nom = 1.0;
  double r_c = 0.005, x_c = 0.05;  // own base
  double i_max = 1.2;
  DroopParams droop;
  VirtualImpedance vz;
  PllParams pll;
  DetectorConfig detector;
  GuardLimits guard;
  SyncThresholds sync;
  std::string pcc_breaker;
  bool auto_transition = true;
  bool auto_reconnect = false;
  std::optional<BlackStartConfig> black_start;
};

namespace ev {
struct LoadStep { std::string target; double dp = 0.0, dq = 0.0; };
struct BreakerSet { std::string target; bool closed = false; };
struct SourceFreq { std::string target; double f_hz = 60.0; };
struct SourceUnbalance { std::string target; double neg_mag = 0.0, neg_angle_deg = 0.0; };
struct SourceVoltage { std::string target; double e_mag = 1.0; };
struct SetpointCmd { std::string target; Setpoint sp; };
struct ModeCommand { std::string target; Mode mode = Mode::GFM; };
struct PlugIn { std::string target; };
struct PulseLoad { std::string target; double dp = 0.0, dq = 0.0, duration = 0.0; };
}  // namespace ev

using EventBody = std::variant<ev::LoadStep, ev::BreakerSet, ev::SourceFreq, ev::SourceUnbalance, ev::SourceVoltage,
                               ev::SetpointCmd, ev::ModeCommand, ev::PlugIn, ev::PulseLoad>;

struct ScriptedEvent {
  double t = 0.0;
  EventBody body;
};

std::string event_type_name(const EventBody& body);
std::string event_target(const EventBody& body);

struct OutputConfig {
  std::string directory;
  int decimation = 1;
};

struct ScenarioConfig {
  std::string name = "scenario";
  PerUnitBase bases;
  double dt = 1e-4;
  double t_end = 1.0;
  std::uint64_t seed = 0;
  double measurement_noise = 0.0;  // pu standard deviation, 0 disables
  std::vector<std::string> buses;
  std::vector<LineConfig> lines;
  std::vector<BreakerConfig> breakers;
  std::vector<GridSourceConfig> grid_sources;
  std::vector<LoadConfig> loads;
  std::vector<InverterConfig> inverters;
  std::vector<ScriptedEvent> events;
  OutputConfig outputs;
};

/// Throws ParseError for malformed input and ValidationError (with a field
/// path) for schema or invariant violations. Omitted gains take defaults.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Checks every invariant; parse_config already calls this.
void validate_config(const ScenarioConfig& cfg);

/// Fully resolved configuration, defaults included.
nlohmann::json to_json(const ScenarioConfig& cfg);

}  // namespace csync
