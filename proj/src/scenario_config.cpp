#include "csync/scenario_config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "csync/errors.hpp"

namespace csync {

using nlohmann::json;

namespace {

// Typed access to one JSON object with field-path error messages and
// rejection of unknown keys.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T def) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return def;
    return convert<T>(j_.at(key), at(key));
  }

  template <typename T>
  T req(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ValidationError(at(key), "required field missing");
    return convert<T>(j_.at(key), at(key));
  }

  const json* child(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ValidationError(at(it.key()), "unknown field");
    }
  }

 private:
  template <typename T>
  static T convert(const json& v, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ValidationError(path, "expected a number");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(path, e.what());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Mode parse_mode(const std::string& s, const std::string& path) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "gfm") return Mode::GFM;
  if (l == "gfl") return Mode::GFL;
  throw ValidationError(path, "mode must be 'gfm' or 'gfl'");
}

std::string mode_name(Mode m) { return m == Mode::GFM ? "gfm" : "gfl"; }

void parse_droop(Reader r, DroopParams& d) {
  d.m_p = r.get("m_p", d.m_p);
  d.n_q = r.get("n_q", d.n_q);
  d.omega_c = r.get("omega_c", d.omega_c);
  d.k_r = r.get("k_r", d.k_r);
  d.k_v = r.get("k_v", d.k_v);
  d.u_limit = r.get("u_limit", d.u_limit);
  d.u_v_limit = r.get("u_v_limit", d.u_v_limit);
  r.finish();
}

void parse_vz(Reader r, VirtualImpedance& z) {
  z.r_v = r.get("r_v", z.r_v);
  z.x_v = r.get("x_v", z.x_v);
  z.x_v_min = r.get("x_v_min", z.x_v_min);
  z.x_v_max = r.get("x_v_max", z.x_v_max);
  z.k_adapt = r.get("k_adapt", z.k_adapt);
  z.i_thresh = r.get("i_thresh", z.i_thresh);
  z.filter_tc = r.get("filter_tc", z.filter_tc);
  r.finish();
}

void parse_pll(Reader r, PllParams& p) {
  p.k_sogi = r.get("k_sogi", p.k_sogi);
  p.zeta = r.get("zeta", p.zeta);
  p.omega_n = kTwoPi * r.get("f_n_hz", p.omega_n / kTwoPi);
  p.lock_threshold = r.get("lock_threshold", p.lock_threshold);
  p.lock_time = r.get("lock_time", p.lock_time);
  p.lock_filter_tc = r.get("lock_filter_tc", p.lock_filter_tc);
  p.uv_threshold = r.get("uv_threshold", p.uv_threshold);
  p.uv_time = r.get("uv_time", p.uv_time);
  r.finish();
}

void parse_detector(Reader r, DetectorConfig& d) {
  d.f_min = r.get("f_min", d.f_min);
  d.f_max = r.get("f_max", d.f_max);
  d.v_min = r.get("v_min", d.v_min);
  d.v_max = r.get("v_max", d.v_max);
  d.rocof_max = r.get("rocof_max", d.rocof_max);
  d.rocof_span = r.get("rocof_span", d.rocof_span);
  d.persist = r.get("persist", d.persist);
  d.recon_dv = r.get("recon_dv", d.recon_dv);
  d.recon_df = r.get("recon_df", d.recon_df);
  d.recon_dtheta = rad(r.get("recon_dtheta_deg", deg(d.recon_dtheta)));
  d.recon_hold = r.get("recon_hold", d.recon_hold);
  d.energized_v = r.get("energized_v", d.energized_v);
  r.finish();
}

void parse_guard(Reader r, GuardLimits& g) {
  g.s_max = r.get("s_max", g.s_max);
  g.v_nom_min = r.get("v_nom_min", g.v_nom_min);
  g.v_nom_max = r.get("v_nom_max", g.v_nom_max);
  g.dp_max = r.get("dp_max", g.dp_max);
  g.dv_nom_max = r.get("dv_nom_max", g.dv_nom_max);
  g.f_min = r.get("f_min", g.f_min);
  g.f_max = r.get("f_max", g.f_max);
  g.v_min = r.get("v_min", g.v_min);
  g.v_max = r.get("v_max", g.v_max);
  r.finish();
}

void parse_sync(Reader r, SyncThresholds& s) {
  s.d_theta = rad(r.get("d_theta_deg", deg(s.d_theta)));
  s.d_v = r.get("d_v", s.d_v);
  s.d_f = r.get("d_f_hz", s.d_f);
  s.hold = r.get("hold", s.hold);
  r.finish();
}

InverterConfig parse_inverter(Reader r, const PerUnitBase& bases) {
  InverterConfig inv;
  inv.id = r.req<std::string>("id");
  inv.bus = r.req<std::string>("bus");
  inv.rating_va = r.get("rating_va", inv.rating_va);
  inv.mode = parse_mode(r.get<std::string>("mode", "gfl"), r.at("mode"));
  inv.preferred_mode = parse_mode(r.get<std::string>("preferred_mode", mode_name(inv.mode)), r.at("preferred_mode"));
  inv.online = r.get("online", inv.online);
  inv.p_set = r.get("p_set", inv.p_set);
  inv.q_set = r.get("q_set", inv.q_set);
  inv.v_nom = r.get("v_nom", inv.v_nom);
  inv.i_max = r.get("i_max", inv.i_max);
  if (const json* c = r.child("coupling")) {
    Reader cr(*c, r.at("coupling"));
    inv.r_c = cr.get("r", inv.r_c);
    inv.x_c = cr.get("x", inv.x_c);
    cr.finish();
  }
  if (const json* c = r.child("droop")) parse_droop(Reader(*c, r.at("droop")), inv.droop);
  if (const json* c = r.child("virtual_impedance")) parse_vz(Reader(*c, r.at("virtual_impedance")), inv.vz);
  if (const json* c = r.child("pll")) parse_pll(Reader(*c, r.at("pll")), inv.pll);
  if (const json* c = r.child("detector")) parse_detector(Reader(*c, r.at("detector")), inv.detector);
  if (const json* c = r.child("guard")) parse_guard(Reader(*c, r.at("guard")), inv.guard);
  if (const json* c = r.child("sync")) parse_sync(Reader(*c, r.at("sync")), inv.sync);
  inv.pcc_breaker = r.get<std::string>("pcc_breaker", "");
  inv.auto_transition = r.get("auto_transition", inv.auto_transition);
  inv.auto_reconnect = r.get("auto_reconnect", inv.auto_reconnect);
  if (const json* c = r.child("black_start")) {
    Reader br(*c, r.at("black_start"));
    BlackStartConfig bs;
    bs.ramp_rate = br.get("ramp_rate", bs.ramp_rate);
    bs.target = br.get("target", inv.v_nom);
    br.finish();
    inv.black_start = bs;
  }
  r.finish();

  inv.droop.p_set = inv.p_set;
  inv.droop.q_set = inv.q_set;
  inv.droop.v_nom = inv.v_nom;
  inv.droop.f_nom = bases.f_nom;
  inv.pll.f_nom = bases.f_nom;
  return inv;
}

ScriptedEvent parse_event(Reader r) {
  ScriptedEvent e;
  e.t = r.req<double>("t");
  const auto type = r.req<std::string>("type");
  const auto target = r.req<std::string>("target");
  if (type == "load_step") {
    e.body = ev::LoadStep{target, r.get("delta_p", 0.0), r.get("delta_q", 0.0)};
  } else if (type == "breaker_set") {
    const auto state = r.req<std::string>("state");
    if (state != "open" && state != "closed") throw ValidationError(r.at("state"), "must be 'open' or 'closed'");
    e.body = ev::BreakerSet{target, state == "closed"};
  } else if (type == "source_freq") {
    e.body = ev::SourceFreq{target, r.req<double>("f_hz")};
  } else if (type == "source_unbalance") {
    e.body = ev::SourceUnbalance{target, r.req<double>("neg_mag"), r.get("neg_angle_deg", 0.0)};
  } else if (type == "source_voltage") {
    e.body = ev::SourceVoltage{target, r.req<double>("e_mag")};
  } else if (type == "setpoint") {
    ev::SetpointCmd cmd{target, {}};
    cmd.sp.p_set = r.req<double>("p_set");
    cmd.sp.q_set = r.get("q_set", 0.0);
    cmd.sp.v_nom = r.get("v_nom", 1.0);
    cmd.sp.source_id = r.get<std::string>("source_id", "operator");
    if (r.has("mode_cmd")) cmd.sp.mode_cmd = parse_mode(r.get<std::string>("mode_cmd", ""), r.at("mode_cmd"));
    cmd.sp.t_issued = e.t;
    e.body = cmd;
  } else if (type == "mode_command") {
    e.body = ev::ModeCommand{target, parse_mode(r.req<std::string>("mode"), r.at("mode"))};
  } else if (type == "inverter_plug_in") {
    e.body = ev::PlugIn{target};
  } else if (type == "pulse_load") {
    e.body = ev::PulseLoad{target, r.get("delta_p", 0.0), r.get("delta_q", 0.0), r.req<double>("duration")};
  } else {
    throw ValidationError(r.at("type"), "unknown event type '" + type + "'");
  }
  r.finish();
  return e;
}

template <typename T>
std::vector<T> parse_list(Reader& root, const std::string& key, auto&& fn) {
  std::vector<T> out;
  const json* arr = root.child(key);
  if (arr == nullptr) return out;
  if (!arr->is_array()) throw ValidationError(key, "expected an array");
  for (std::size_t i = 0; i < arr->size(); ++i) {
    out.push_back(fn(Reader((*arr)[i], key + "[" + std::to_string(i) + "]")));
  }
  return out;
}

}  // namespace

std::string event_type_name(const EventBody& body) {
  static const char* names[] = {"load_step",  "breaker_set", "source_freq",      "source_unbalance", "source_voltage",
                                "setpoint",   "mode_command", "inverter_plug_in", "pulse_load"};
  return names[body.index()];
}

std::string event_target(const EventBody& body) {
  return std::visit([](const auto& e) { return e.target; }, body);
}

ScenarioConfig parse_config(const json& j) {
  ScenarioConfig cfg;
  Reader r(j, "");
  cfg.name = r.get<std::string>("name", cfg.name);
  if (const json* b = r.child("bases")) {
    Reader br(*b, "bases");
    cfg.bases.s_base = br.get("s_base_va", cfg.bases.s_base);
    cfg.bases.v_base = br.get("v_base_v", cfg.bases.v_base);
    cfg.bases.f_nom = br.get("f_nom_hz", cfg.bases.f_nom);
    br.finish();
  }
  cfg.dt = r.get("dt", cfg.dt);
  cfg.t_end = r.req<double>("t_end");
  cfg.seed = r.get<std::uint64_t>("seed", cfg.seed);
  cfg.measurement_noise = r.get("measurement_noise", cfg.measurement_noise);
  cfg.buses = r.req<std::vector<std::string>>("buses");

  cfg.lines = parse_list<LineConfig>(r, "lines", [](Reader lr) {
    LineConfig l{lr.req<std::string>("id"), lr.req<std::string>("from"), lr.req<std::string>("to"),
                 lr.get("r", 0.0), lr.get("x", 0.0)};
    lr.finish();
    return l;
  });
  cfg.breakers = parse_list<BreakerConfig>(r, "breakers", [](Reader br) {
    BreakerConfig b{br.req<std::string>("id"), br.req<std::string>("from"), br.req<std::string>("to"), true};
    const auto state = br.get<std::string>("state", "closed");
    if (state != "open" && state != "closed") throw ValidationError(br.at("state"), "must be 'open' or 'closed'");
    b.closed = state == "closed";
    br.finish();
    return b;
  });
  const double f_nom = cfg.bases.f_nom;
  cfg.grid_sources = parse_list<GridSourceConfig>(r, "grid_sources", [f_nom](Reader sr) {
    GridSourceConfig s;
    s.id = sr.req<std::string>("id");
    s.bus = sr.req<std::string>("bus");
    s.e_mag = sr.get("e_mag", s.e_mag);
    s.e_angle_deg = sr.get("e_angle_deg", s.e_angle_deg);
    s.r_s = sr.get("r_s", s.r_s);
    s.x_s = sr.get("x_s", s.x_s);
    s.f_hz = sr.get("f_hz", f_nom);
    s.rating_va = sr.get("rating_va", s.rating_va);
    sr.finish();
    return s;
  });
  cfg.loads = parse_list<LoadConfig>(r, "loads", [](Reader lr) {
    LoadConfig l;
    l.id = lr.req<std::string>("id");
    l.bus = lr.req<std::string>("bus");
    const auto kind = lr.get<std::string>("kind", "impedance");
    if (kind == "impedance") {
      l.kind = LoadKind::ConstantImpedance;
    } else if (kind == "power") {
      l.kind = LoadKind::ConstantPower;
    } else {
      throw ValidationError(lr.at("kind"), "must be 'impedance' or 'power'");
    }
    if (lr.has("r") || lr.has("x")) {
      if (l.kind != LoadKind::ConstantImpedance) throw ValidationError(lr.at("r"), "r/x only apply to impedance loads");
      const Phasor z{lr.get("r", 0.0), lr.get("x", 0.0)};
      if (z == Phasor{}) throw ValidationError(lr.at("r"), "impedance must be non-zero");
      const Phasor s = std::conj(1.0 / z);
      l.p = s.real();
      l.q = s.imag();
    } else {
      l.p = lr.get("p", 0.0);
      l.q = lr.get("q", 0.0);
    }
    lr.finish();
    return l;
  });
  const PerUnitBase bases = cfg.bases;
  cfg.inverters = parse_list<InverterConfig>(r, "inverters", [&bases](Reader ir) { return parse_inverter(std::move(ir), bases); });
  cfg.events = parse_list<ScriptedEvent>(r, "events", [](Reader er) { return parse_event(std::move(er)); });
  if (const json* o = r.child("outputs")) {
    Reader orr(*o, "outputs");
    cfg.outputs.directory = orr.get<std::string>("directory", "");
    cfg.outputs.decimation = orr.get("decimation", 1);
    orr.finish();
  }
  r.finish();
  validate_config(cfg);
  return cfg;
}

ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  return parse_config(j);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ScenarioConfig cfg = parse_config_text(ss.str());
  if (cfg.outputs.directory.empty()) cfg.outputs.directory = (std::filesystem::path("out") / path.stem()).string();
  return cfg;
}

void validate_config(const ScenarioConfig& cfg) {
  if (!cfg.bases.valid()) throw ValidationError("bases", "s_base, v_base and f_nom must be positive");
  if (!(cfg.dt > 0.0 && cfg.dt <= 1e-3)) throw ValidationError("dt", "must lie in (0, 1e-3]");
  if (!(cfg.t_end > 0.0)) throw ValidationError("t_end", "must be positive");
  if (cfg.outputs.decimation < 1) throw ValidationError("outputs.decimation", "must be >= 1");
  if (!(cfg.measurement_noise >= 0.0)) throw ValidationError("measurement_noise", "must be >= 0");

  std::set<std::string> buses;
  for (std::size_t i = 0; i < cfg.buses.size(); ++i) {
    if (!buses.insert(cfg.buses[i]).second) throw ValidationError("buses[" + std::to_string(i) + "]", "duplicate bus id");
  }
  if (buses.empty()) throw ValidationError("buses", "at least one bus required");
  auto need_bus = [&](const std::string& id, const std::string& path) {
    if (!buses.count(id)) throw ValidationError(path, "unknown bus '" + id + "'");
  };
  auto unique_ids = [](const auto& items, const std::string& key) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!seen.insert(items[i].id).second) {
        throw ValidationError(key + "[" + std::to_string(i) + "].id", "duplicate id '" + items[i].id + "'");
      }
    }
  };
  unique_ids(cfg.lines, "lines");
  unique_ids(cfg.breakers, "breakers");
  unique_ids(cfg.grid_sources, "grid_sources");
  unique_ids(cfg.loads, "loads");
  unique_ids(cfg.inverters, "inverters");

  for (std::size_t i = 0; i < cfg.lines.size(); ++i) {
    const auto& l = cfg.lines[i];
    const std::string p = "lines[" + std::to_string(i) + "]";
    need_bus(l.from, p + ".from");
    need_bus(l.to, p + ".to");
    if (l.from == l.to) throw ValidationError(p, "line endpoints must differ");
    if (l.r < 0.0) throw ValidationError(p + ".r", "must be >= 0");
    if (l.r == 0.0 && l.x == 0.0) throw ValidationError(p, "impedance must be non-zero");
  }
  for (std::size_t i = 0; i < cfg.breakers.size(); ++i) {
    const auto& b = cfg.breakers[i];
    const std::string p = "breakers[" + std::to_string(i) + "]";
    need_bus(b.from, p + ".from");
    need_bus(b.to, p + ".to");
    if (b.from == b.to) throw ValidationError(p, "breaker endpoints must differ");
    const bool spans_line = std::any_of(cfg.lines.begin(), cfg.lines.end(), [&](const LineConfig& l) {
      return (l.from == b.from && l.to == b.to) || (l.from == b.to && l.to == b.from);
    });
    if (!spans_line) throw ValidationError(p, "breaker must span the bus pair of at least one line");
  }
  for (std::size_t i = 0; i < cfg.grid_sources.size(); ++i) {
    const auto& s = cfg.grid_sources[i];
    const std::string p = "grid_sources[" + std::to_string(i) + "]";
    need_bus(s.bus, p + ".bus");
    if (!(s.rating_va > 0.0)) throw ValidationError(p + ".rating_va", "must be positive");
    if (s.e_mag < 0.0 || s.e_mag > 1.2) throw ValidationError(p + ".e_mag", "must lie in [0, 1.2]");
    if (s.r_s < 0.0 || (s.r_s == 0.0 && s.x_s == 0.0)) throw ValidationError(p, "source impedance must be non-zero");
    if (!(s.f_hz > 0.0)) throw ValidationError(p + ".f_hz", "must be positive");
  }
  for (std::size_t i = 0; i < cfg.loads.size(); ++i) {
    const auto& l = cfg.loads[i];
    const std::string p = "loads[" + std::to_string(i) + "]";
    need_bus(l.bus, p + ".bus");
    if (!std::isfinite(l.p) || !std::isfinite(l.q)) throw ValidationError(p, "load power must be finite");
  }

  const InverterConfig* first_kr = nullptr;
  std::size_t first_kr_idx = 0;
  for (std::size_t i = 0; i < cfg.inverters.size(); ++i) {
    const auto& inv = cfg.inverters[i];
    const std::string p = "inverters[" + std::to_string(i) + "]";
    need_bus(inv.bus, p + ".bus");
    if (!(inv.rating_va > 0.0)) throw ValidationError(p + ".rating_va", "must be positive");
    if (inv.r_c < 0.0 || (inv.r_c == 0.0 && inv.x_c == 0.0)) throw ValidationError(p + ".coupling", "must be non-zero");
    if (!(inv.i_max > 0.0)) throw ValidationError(p + ".i_max", "must be positive");
    const auto& d = inv.droop;
    if (!(d.m_p > 0.0)) throw ValidationError(p + ".droop.m_p", "must be positive");
    if (d.n_q < 0.0) throw ValidationError(p + ".droop.n_q", "must be >= 0");
    if (!(d.omega_c > 0.0)) throw ValidationError(p + ".droop.omega_c", "must be positive");
    if (d.k_r < 0.0) throw ValidationError(p + ".droop.k_r", "must be >= 0");
    if (d.k_v < 0.0) throw ValidationError(p + ".droop.k_v", "must be >= 0");
    // Forward-Euler stability margins at the control step.
    if (d.omega_c * cfg.dt > 0.1) throw ValidationError(p + ".droop.omega_c", "omega_c*dt exceeds 0.1");
    if (inv.pll.kp() * cfg.dt > 0.1 || inv.pll.ki() * cfg.dt * cfg.dt > 0.01) {
      throw ValidationError(p + ".pll", "PLL gains too large for the control step");
    }
    const auto& z = inv.vz;
    if (z.r_v < 0.0) throw ValidationError(p + ".virtual_impedance.r_v", "must be >= 0");
    if (z.x_v_min > z.x_v_max || z.x_v < z.x_v_min || z.x_v > z.x_v_max) {
      throw ValidationError(p + ".virtual_impedance.x_v", "must lie within [x_v_min, x_v_max]");
    }
    if (!inv.detector.valid()) throw ValidationError(p + ".detector", "windows must be non-empty and times positive");
    if (!(inv.v_nom > 0.0)) throw ValidationError(p + ".v_nom", "must be positive");
    if (!inv.pcc_breaker.empty() &&
        std::none_of(cfg.breakers.begin(), cfg.breakers.end(), [&](const BreakerConfig& b) { return b.id == inv.pcc_breaker; })) {
      throw ValidationError(p + ".pcc_breaker", "unknown breaker '" + inv.pcc_breaker + "'");
    }
    if (inv.black_start && !(inv.black_start->ramp_rate > 0.0)) {
      throw ValidationError(p + ".black_start.ramp_rate", "must be positive");
    }
    if (first_kr == nullptr) {
      first_kr = &inv;
      first_kr_idx = i;
    } else if (d.k_r != first_kr->droop.k_r) {
      std::ostringstream msg;
      msg << "restoration gain must be identical across grid-forming inverters: '" << first_kr->id
          << "' (inverters[" << first_kr_idx << "]) has k_r=" << first_kr->droop.k_r << ", '" << inv.id
          << "' has k_r=" << d.k_r;
      throw ValidationError(p + ".droop.k_r", msg.str());
    }
  }

  double prev_t = 0.0;
  for (std::size_t i = 0; i < cfg.events.size(); ++i) {
    const auto& e = cfg.events[i];
    const std::string p = "events[" + std::to_string(i) + "]";
    if (e.t < 0.0 || e.t > cfg.t_end) throw ValidationError(p + ".t", "must lie within [0, t_end]");
    if (e.t < prev_t) throw ValidationError(p + ".t", "events must be sorted by time");
    prev_t = e.t;
    const std::string target = event_target(e.body);
    auto has = [&](const auto& items) {
      return std::any_of(items.begin(), items.end(), [&](const auto& x) { return x.id == target; });
    };
    bool ok = true;
    std::visit(
        [&](const auto& b) {
          using B = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<B, ev::LoadStep> || std::is_same_v<B, ev::PulseLoad>) {
            ok = has(cfg.loads);
          } else if constexpr (std::is_same_v<B, ev::BreakerSet>) {
            ok = has(cfg.breakers);
          } else if constexpr (std::is_same_v<B, ev::SourceFreq> || std::is_same_v<B, ev::SourceUnbalance> ||
                               std::is_same_v<B, ev::SourceVoltage>) {
            ok = has(cfg.grid_sources);
          } else {
            ok = has(cfg.inverters);
          }
          if constexpr (std::is_same_v<B, ev::PulseLoad>) {
            if (!(b.duration > 0.0)) throw ValidationError(p + ".duration", "must be positive");
          }
          if constexpr (std::is_same_v<B, ev::SourceVoltage>) {
            if (b.e_mag < 0.0 || b.e_mag > 1.2) throw ValidationError(p + ".e_mag", "must lie in [0, 1.2]");
          }
        },
        e.body);
    if (!ok) throw ValidationError(p + ".target", "unknown element '" + target + "'");
  }
}

namespace {

json event_to_json(const ScriptedEvent& e) {
  json j{{"t", e.t}, {"type", event_type_name(e.body)}, {"target", event_target(e.body)}};
  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ev::LoadStep>) {
          j["delta_p"] = b.dp;
          j["delta_q"] = b.dq;
        } else if constexpr (std::is_same_v<B, ev::BreakerSet>) {
          j["state"] = b.closed ? "closed" : "open";
        } else if constexpr (std::is_same_v<B, ev::SourceFreq>) {
          j["f_hz"] = b.f_hz;
        } else if constexpr (std::is_same_v<B, ev::SourceUnbalance>) {
          j["neg_mag"] = b.neg_mag;
          j["neg_angle_deg"] = b.neg_angle_deg;
        } else if constexpr (std::is_same_v<B, ev::SourceVoltage>) {
          j["e_mag"] = b.e_mag;
        } else if constexpr (std::is_same_v<B, ev::SetpointCmd>) {
          j["p_set"] = b.sp.p_set;
          j["q_set"] = b.sp.q_set;
          j["v_nom"] = b.sp.v_nom;
          j["source_id"] = b.sp.source_id;
          if (b.sp.mode_cmd) j["mode_cmd"] = mode_name(*b.sp.mode_cmd);
        } else if constexpr (std::is_same_v<B, ev::ModeCommand>) {
          j["mode"] = mode_name(b.mode);
        } else if constexpr (std::is_same_v<B, ev::PulseLoad>) {
          j["delta_p"] = b.dp;
          j["delta_q"] = b.dq;
          j["duration"] = b.duration;
        }
      },
      e.body);
  return j;
}

}  // namespace

json to_json(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["bases"] = {{"s_base_va", cfg.bases.s_base}, {"v_base_v", cfg.bases.v_base}, {"f_nom_hz", cfg.bases.f_nom}};
  j["dt"] = cfg.dt;
  j["t_end"] = cfg.t_end;
  j["seed"] = cfg.seed;
  j["measurement_noise"] = cfg.measurement_noise;
  j["buses"] = cfg.buses;
  j["lines"] = json::array();
  for (const auto& l : cfg.lines) j["lines"].push_back({{"id", l.id}, {"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  j["breakers"] = json::array();
  for (const auto& b : cfg.breakers) {
    j["breakers"].push_back({{"id", b.id}, {"from", b.from}, {"to", b.to}, {"state", b.closed ? "closed" : "open"}});
  }
  j["grid_sources"] = json::array();
  for (const auto& s : cfg.grid_sources) {
    j["grid_sources"].push_back({{"id", s.id}, {"bus", s.bus}, {"e_mag", s.e_mag}, {"e_angle_deg", s.e_angle_deg},
                                 {"r_s", s.r_s}, {"x_s", s.x_s}, {"f_hz", s.f_hz}, {"rating_va", s.rating_va}});
  }
  j["loads"] = json::array();
  for (const auto& l : cfg.loads) {
    j["loads"].push_back({{"id", l.id}, {"bus", l.bus},
                          {"kind", l.kind == LoadKind::ConstantPower ? "power" : "impedance"}, {"p", l.p}, {"q", l.q}});
  }
  j["inverters"] = json::array();
  for (const auto& inv : cfg.inverters) {
    json ij{{"id", inv.id},
            {"bus", inv.bus},
            {"rating_va", inv.rating_va},
            {"mode", mode_name(inv.mode)},
            {"preferred_mode", mode_name(inv.preferred_mode)},
            {"online", inv.online},
            {"p_set", inv.p_set},
            {"q_set", inv.q_set},
            {"v_nom", inv.v_nom},
            {"i_max", inv.i_max},
            {"coupling", {{"r", inv.r_c}, {"x", inv.x_c}}},
            {"droop",
             {{"m_p", inv.droop.m_p}, {"n_q", inv.droop.n_q}, {"omega_c", inv.droop.omega_c}, {"k_r", inv.droop.k_r},
              {"k_v", inv.droop.k_v}, {"u_limit", inv.droop.u_limit}, {"u_v_limit", inv.droop.u_v_limit}}},
            {"virtual_impedance",
             {{"r_v", inv.vz.r_v}, {"x_v", inv.vz.x_v}, {"x_v_min", inv.vz.x_v_min}, {"x_v_max", inv.vz.x_v_max},
              {"k_adapt", inv.vz.k_adapt}, {"i_thresh", inv.vz.i_thresh}, {"filter_tc", inv.vz.filter_tc}}},
            {"pll",
             {{"k_sogi", inv.pll.k_sogi}, {"zeta", inv.pll.zeta}, {"f_n_hz", inv.pll.omega_n / kTwoPi},
              {"lock_threshold", inv.pll.lock_threshold}, {"lock_time", inv.pll.lock_time},
              {"lock_filter_tc", inv.pll.lock_filter_tc}, {"uv_threshold", inv.pll.uv_threshold},
              {"uv_time", inv.pll.uv_time}}},
            {"detector",
             {{"f_min", inv.detector.f_min}, {"f_max", inv.detector.f_max}, {"v_min", inv.detector.v_min},
              {"v_max", inv.detector.v_max}, {"rocof_max", inv.detector.rocof_max},
              {"rocof_span", inv.detector.rocof_span}, {"persist", inv.detector.persist},
              {"recon_dv", inv.detector.recon_dv}, {"recon_df", inv.detector.recon_df},
              {"recon_dtheta_deg", deg(inv.detector.recon_dtheta)}, {"recon_hold", inv.detector.recon_hold},
              {"energized_v", inv.detector.energized_v}}},
            {"guard",
             {{"s_max", inv.guard.s_max}, {"v_nom_min", inv.guard.v_nom_min}, {"v_nom_max", inv.guard.v_nom_max},
              {"dp_max", inv.guard.dp_max}, {"dv_nom_max", inv.guard.dv_nom_max}, {"f_min", inv.guard.f_min},
              {"f_max", inv.guard.f_max}, {"v_min", inv.guard.v_min}, {"v_max", inv.guard.v_max}}},
            {"sync",
             {{"d_theta_deg", deg(inv.sync.d_theta)}, {"d_v", inv.sync.d_v}, {"d_f_hz", inv.sync.d_f},
              {"hold", inv.sync.hold}}},
            {"pcc_breaker", inv.pcc_breaker},
            {"auto_transition", inv.auto_transition},
            {"auto_reconnect", inv.auto_reconnect}};
    if (inv.black_start) ij["black_start"] = {{"ramp_rate", inv.black_start->ramp_rate}, {"target", inv.black_start->target}};
    j["inverters"].push_back(std::move(ij));
  }
  j["events"] = json::array();
  for (const auto& e : cfg.events) j["events"].push_back(event_to_json(e));
  j["outputs"] = {{"directory", cfg.outputs.directory}, {"decimation", cfg.outputs.decimation}};
  return j;
}

}  // namespace csync
