#include "csync/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csync/errors.hpp"
#include "csync/transforms.hpp"

namespace csync {

namespace {

constexpr double kGflReleaseTime = 0.1;  // s, 0 -> full setpoint after lock
constexpr int kInitIters = 60;
constexpr double kDenialLogInterval = 0.1;  // s

std::string fmt(double v) { return format_number(v); }

std::string kv(const std::string& key, double v) { return key + "=" + fmt(v); }

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double InverterRuntime::frequency_hz() const {
  if (online && mode == Mode::GFM) return gfm.omega * droop.f_nom;
  return pll.frequency_hz();
}

Simulation::Simulation(ScenarioConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  validate_config(cfg_);
  auto bus_of = [&](const std::string& id) {
    const auto it = std::find(cfg_.buses.begin(), cfg_.buses.end(), id);
    return static_cast<BusIndex>(it - cfg_.buses.begin());
  };
  std::vector<Line> lines;
  for (const auto& l : cfg_.lines) lines.push_back({l.id, bus_of(l.from), bus_of(l.to), l.r, l.x});
  std::vector<Breaker> breakers;
  for (const auto& b : cfg_.breakers) {
    breakers.push_back({b.id, bus_of(b.from), bus_of(b.to), b.closed ? BreakerState::Closed : BreakerState::Open});
  }
  std::vector<GridSource> sources;
  for (const auto& s : cfg_.grid_sources) {
    GridSource g;
    g.id = s.id;
    g.bus = bus_of(s.bus);
    g.e = std::polar(s.e_mag, rad(s.e_angle_deg));
    g.z_s = Phasor{s.r_s, s.x_s} * (cfg_.bases.s_base / s.rating_va);
    g.f_grid = s.f_hz;
    g.rating_va = s.rating_va;
    sources.push_back(g);
  }
  std::vector<Load> loads;
  for (const auto& l : cfg_.loads) loads.push_back({l.id, bus_of(l.bus), l.kind, Phasor{l.p, l.q}});
  net_ = Network(cfg_.buses, std::move(lines), std::move(breakers), std::move(sources), std::move(loads),
                 cfg_.bases.f_nom);

  for (const auto& c : cfg_.inverters) {
    InverterRuntime inv(c, cfg_.dt);
    inv.k = c.rating_va / cfg_.bases.s_base;
    inv.bus = bus_of(c.bus);
    inv.mode = c.mode;
    inv.preferred = c.preferred_mode;
    inv.online = c.online;
    inv.droop = c.droop;
    inv.vz = c.vz;
    inv.pll = make_pll_state(c.pll);
    inv.gfl_sp = {c.p_set, c.q_set};
    inv.gfm.v_gfm = c.v_nom;
    inv.gfm.ramp_target = c.v_nom;
    if (c.black_start) {
      inv.gfm.v_gfm = 0.0;
      inv.gfm.ramp = RampMode::BlackStart;
      inv.gfm.ramp_rate = c.black_start->ramp_rate;
      inv.gfm.ramp_target = c.black_start->target;
    }
    inv_.push_back(std::move(inv));
  }
  n_steps_ = static_cast<std::size_t>(std::llround(cfg_.t_end / cfg_.dt));
  v_neg_.assign(net_.bus_count(), Phasor{});
}

InverterRuntime& Simulation::find_inverter(const std::string& id) {
  for (auto& inv : inv_) {
    if (inv.cfg.id == id) return inv;
  }
  throw UnknownElement("unknown inverter '" + id + "'");
}

void Simulation::log(double t, std::string type, std::string target, std::string detail) {
  events_.push_back({t, std::move(type), std::move(target), std::move(detail)});
  if (on_event) on_event(events_.back());
}

void Simulation::record_abort(const std::string& message) { log(time(), "abort", cfg_.name, message); }

std::vector<GuardAuditLine> Simulation::audit() const {
  std::vector<GuardAuditLine> out;
  for (const auto& inv : inv_) {
    for (const auto& a : inv.guard.audit()) {
      out.push_back({a.t, inv.cfg.id, a.source_id, a.verdict.accepted, a.verdict.reason, a.verdict.predicted_f,
                     a.verdict.predicted_v});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const GuardAuditLine& a, const GuardAuditLine& b) { return a.t < b.t; });
  return out;
}

MetricsLayout Simulation::layout() const {
  MetricsLayout l;
  l.scenario = cfg_.name;
  l.f_nom = cfg_.bases.f_nom;
  l.bus_ids = cfg_.buses;
  for (const auto& inv : inv_) {
    l.inverter_ids.push_back(inv.cfg.id);
    l.inverter_bus.push_back(inv.bus);
    l.m_p.push_back(inv.cfg.droop.m_p);
    if (!inv.cfg.pcc_breaker.empty() &&
        std::find(l.pcc_breakers.begin(), l.pcc_breakers.end(), inv.cfg.pcc_breaker) == l.pcc_breakers.end()) {
      l.pcc_breakers.push_back(inv.cfg.pcc_breaker);
    }
  }
  return l;
}

std::vector<std::string> Simulation::csv_header() const {
  std::vector<std::string> h{"t"};
  for (const auto& b : cfg_.buses) {
    h.push_back("v_mag_" + b);
    h.push_back("v_ang_" + b);
  }
  for (const auto& inv : inv_) {
    for (const char* c : {"f_", "p_", "q_", "mode_", "lock_", "island_", "recon_"}) h.push_back(c + inv.cfg.id);
  }
  return h;
}

// ---------------------------------------------------------------- events

void Simulation::apply_due_events(double t) {
  const double horizon = t + 0.5 * cfg_.dt;
  while (next_event_ < cfg_.events.size() && cfg_.events[next_event_].t <= horizon) {
    apply_event(cfg_.events[next_event_], t);
    ++next_event_;
  }
  for (auto it = pulse_ends_.begin(); it != pulse_ends_.end();) {
    if (it->t <= horizon) {
      net_.apply_event(LoadStep{it->target, -it->delta}, t);
      log(t, "pulse_load_end", it->target, kv("dp", -it->delta.real()) + " " + kv("dq", -it->delta.imag()));
      it = pulse_ends_.erase(it);
    } else {
      ++it;
    }
  }
}

void Simulation::apply_event(const ScriptedEvent& e, double t) {
  const std::string type = event_type_name(e.body);
  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ev::LoadStep>) {
          net_.apply_event(LoadStep{b.target, {b.dp, b.dq}}, t);
          log(t, type, b.target, kv("dp", b.dp) + " " + kv("dq", b.dq));
        } else if constexpr (std::is_same_v<B, ev::BreakerSet>) {
          net_.apply_event(BreakerSet{b.target, b.closed ? BreakerState::Closed : BreakerState::Open}, t);
          log(t, type, b.target, b.closed ? "closed" : "open");
        } else if constexpr (std::is_same_v<B, ev::SourceFreq>) {
          net_.apply_event(SourceFrequency{b.target, b.f_hz}, t);
          log(t, type, b.target, kv("f_hz", b.f_hz));
        } else if constexpr (std::is_same_v<B, ev::SourceUnbalance>) {
          net_.apply_event(SourceUnbalance{b.target, std::polar(b.neg_mag, rad(b.neg_angle_deg))}, t);
          log(t, type, b.target, kv("neg_mag", b.neg_mag) + " " + kv("neg_angle_deg", b.neg_angle_deg));
        } else if constexpr (std::is_same_v<B, ev::SourceVoltage>) {
          net_.apply_event(SourceVoltage{b.target, b.e_mag}, t);
          log(t, type, b.target, kv("e_mag", b.e_mag));
        } else if constexpr (std::is_same_v<B, ev::SetpointCmd>) {
          InverterRuntime& inv = find_inverter(b.target);
          Setpoint sp = b.sp;
          sp.t_issued = t;
          const PlantSnapshot plant{inv.droop, inv.gfm, inv.gfm.p_f, inv.gfm.q_f};
          const GuardVerdict v = inv.guard.submit(sp, plant);
          std::string detail = kv("p_set", sp.p_set) + " " + kv("q_set", sp.q_set) + " " + kv("v_nom", sp.v_nom) +
                               " source=" + sp.source_id + " " + kv("f_pred", v.predicted_f) + " " +
                               kv("v_pred", v.predicted_v);
          if (v.accepted) {
            inv.droop.p_set = sp.p_set;
            inv.droop.q_set = sp.q_set;
            inv.droop.v_nom = sp.v_nom;
            inv.gfl_sp = {sp.p_set, sp.q_set};
            if (sp.mode_cmd) {
              inv.manual_request = *sp.mode_cmd;
              inv.preferred = *sp.mode_cmd;
            }
            log(t, type, b.target, "accepted " + detail);
          } else {
            log(t, type, b.target, "rejected reason=" + std::string(to_string(v.reason)) + " " + detail);
          }
        } else if constexpr (std::is_same_v<B, ev::ModeCommand>) {
          InverterRuntime& inv = find_inverter(b.target);
          inv.manual_request = b.mode;
          inv.preferred = b.mode;
          log(t, type, b.target, std::string(to_string(b.mode)));
        } else if constexpr (std::is_same_v<B, ev::PlugIn>) {
          InverterRuntime& inv = find_inverter(b.target);
          if (!inv.online) {
            inv.online = true;
            inv.mode = Mode::GFL;
            inv.enabled = false;
            inv.gfl_scale = 0.0;
            inv.pll = make_pll_state(inv.cfg.pll);
            inv.sync = {};
            inv.detector.reset();
            inv.recon.reset();
            inv.i_next = {};
          }
          log(t, type, b.target, "");
        } else if constexpr (std::is_same_v<B, ev::PulseLoad>) {
          const Phasor d{b.dp, b.dq};
          net_.apply_event(LoadStep{b.target, d}, t);
          pulse_ends_.push_back({t + b.duration, b.target, d});
          log(t, type, b.target, kv("dp", b.dp) + " " + kv("dq", b.dq) + " " + kv("duration", b.duration));
        }
      },
      e.body);
}

// ----------------------------------------------------------------- solve

void Simulation::solve(double t) {
  const double f_nom = cfg_.bases.f_nom;
  std::vector<VoltageSourceInjection> vs;
  std::vector<CurrentInjection> cs;
  for (const auto& g : net_.sources()) vs.push_back({g.bus, g.emf(t, f_nom), g.z_s});
  for (const auto& inv : inv_) {
    if (!inv.online) continue;
    if (inv.mode == Mode::GFM) {
      const Phasor z = (Phasor{inv.cfg.r_c, inv.cfg.x_c} + inv.vz.impedance()) / inv.k;
      vs.push_back({inv.bus, std::polar(inv.gfm.v_gfm, inv.gfm.theta_gfm), z});
    } else {
      cs.push_back({inv.bus, inv.i_next});
    }
  }
  const ComplexMatrix& y = net_.ybus();
  const std::vector<Phasor>* warm = state_.bus_voltages.empty() ? nullptr : &state_.bus_voltages;
  NetworkState next = solver_.solve(y, vs, cs, net_.loads(), net_.lines(), net_.breakers(), warm);
  next.t = t;
  if (!next.unsourced_islands.empty()) {
    std::ostringstream msg;
    msg << "step " << k_ << " t=" << fmt(t) << ": island {";
    const auto& isl = next.unsourced_islands.front();
    for (std::size_t i = 0; i < isl.size(); ++i) msg << (i ? " " : "") << net_.bus_ids()[isl[i]];
    msg << "} has load or grid-following inverters but no voltage source";
    throw NoSourceInIsland(msg.str());
  }
  state_ = std::move(next);

  std::fill(v_neg_.begin(), v_neg_.end(), Phasor{});
  if (net_.unbalanced()) {
    std::vector<VoltageSourceInjection> ns;
    std::vector<CurrentInjection> shunts;
    for (const auto& g : net_.sources()) ns.push_back({g.bus, g.emf_neg(t, f_nom), g.z_s});
    for (const auto& inv : inv_) {
      if (inv.online && inv.mode == Mode::GFM) shunts.push_back({inv.bus, inv.k / Phasor{inv.cfg.r_c, inv.cfg.x_c}});
    }
    for (const auto& ld : net_.loads()) {
      if (ld.s_nom == Phasor{}) continue;
      if (ld.kind == LoadKind::ConstantImpedance) {
        shunts.push_back({ld.bus, ld.admittance()});
      } else {
        const double v2 = std::max(std::norm(state_.bus_voltages[ld.bus]), 0.25);
        shunts.push_back({ld.bus, std::conj(ld.s_nom) / v2});
      }
    }
    v_neg_ = solver_.solve_negative(y, ns, shunts);
  }
}

void Simulation::measure() {
  std::size_t src = net_.sources().size();
  for (auto& inv : inv_) {
    if (!inv.online) {
      inv.v_bus = state_.bus_voltages[inv.bus];
      inv.v_term = inv.v_bus;
      inv.i_out = {};
      inv.p = inv.q = 0.0;
      continue;
    }
    inv.v_bus = state_.bus_voltages[inv.bus];
    if (inv.mode == Mode::GFM) {
      inv.i_out = state_.source_currents[src++] / inv.k;
      inv.v_term = std::polar(inv.gfm.v_gfm, inv.gfm.theta_gfm) - inv.vz.impedance() * inv.i_out;
    } else {
      inv.i_out = inv.i_next / inv.k;
      inv.v_term = inv.v_bus + Phasor{inv.cfg.r_c, inv.cfg.x_c} * inv.i_out;
    }
    const Phasor s = inv.v_term * std::conj(inv.i_out);
    inv.p = s.real();
    inv.q = s.imag();
  }
}

// --------------------------------------------------------------- control

BusIndex Simulation::pll_input_bus(const InverterRuntime& inv, bool& terminal) const {
  terminal = true;
  if (inv.mode == Mode::GFM && !inv.cfg.pcc_breaker.empty()) {
    const Breaker* br = net_.find_breaker(inv.cfg.pcc_breaker);
    if (br != nullptr && !br->closed()) {
      terminal = false;
      return br->from;
    }
  }
  return inv.bus;
}

bool Simulation::pll_input_live(const InverterRuntime& inv) const {
  bool terminal = true;
  const BusIndex b = pll_input_bus(inv, terminal);
  const Phasor v = terminal ? inv.v_term : state_.bus_voltages[b];
  return std::abs(v) >= inv.cfg.detector.energized_v;
}

AbcSample Simulation::pll_sample(const InverterRuntime& inv, double t) {
  bool terminal = true;
  const BusIndex b = pll_input_bus(inv, terminal);
  SequenceSet seq;
  if (terminal) {
    seq.pos = inv.v_term;
    seq.neg = inv.mode == Mode::GFM ? Phasor{} : v_neg_[b];
  } else {
    seq.pos = state_.bus_voltages[b];
    seq.neg = v_neg_[b];
  }
  AbcSample s = synth_abc(seq, cfg_.bases.omega_base() * t, t);
  if (cfg_.measurement_noise > 0.0) {
    s.a += cfg_.measurement_noise * noise_(rng_);
    s.b += cfg_.measurement_noise * noise_(rng_);
    s.c += cfg_.measurement_noise * noise_(rng_);
  }
  return s;
}

void Simulation::refresh_gfl_current(InverterRuntime& inv) {
  if (!inv.online || !inv.enabled) {
    inv.i_next = {};
    return;
  }
  const PqSetpoint sp{inv.gfl_sp.p_set * inv.gfl_scale, inv.gfl_sp.q_set * inv.gfl_scale};
  const CurrentRefs refs = current_refs_from_pq(sp, DqFrame{inv.pll.v_mag, 0.0}, inv.cfg.i_max);
  inv.i_next = inv.k * gfl_injection(refs, inv.pll.theta_est);
}

void Simulation::initialize_controllers() {
  for (int it = 0; it < kInitIters; ++it) {
    solve(0.0);
    measure();
    double change = 0.0;
    for (auto& inv : inv_) {
      if (!inv.online) continue;
      bool terminal = true;
      const BusIndex b = pll_input_bus(inv, terminal);
      const Phasor vp = terminal ? inv.v_term : state_.bus_voltages[b];
      const Phasor vn = terminal && inv.mode == Mode::GFM ? Phasor{} : v_neg_[b];
      inv.pll = std::abs(vp) >= inv.cfg.pll.uv_threshold
                    ? make_locked_pll_state(inv.cfg.pll, vp, vn, 0.0, cfg_.dt)
                    : make_pll_state(inv.cfg.pll);
      if (inv.mode == Mode::GFL) {
        inv.enabled = inv.pll.lock;
        inv.gfl_scale = inv.enabled ? 1.0 : 0.0;
        const Phasor prev = inv.i_next;
        refresh_gfl_current(inv);
        change = std::max(change, std::abs(inv.i_next - prev));
      } else {
        inv.gfm.p_f = inv.p;
        inv.gfm.q_f = inv.q;
        inv.gfm.omega = 1.0 - inv.droop.m_p * (inv.gfm.p_f - inv.droop.p_set) + inv.gfm.u;
        if (inv.gfm.ramp == RampMode::None) {
          const double v = droop_voltage_target(inv.droop, inv.gfm);
          change = std::max(change, std::abs(v - inv.gfm.v_gfm));
          inv.gfm.v_gfm = v;
        }
      }
    }
    if (change < 1e-14) break;
  }
}

void Simulation::initialize() {
  initialize_controllers();
  for (auto& inv : inv_) {
    if (!inv.online) continue;
    supervise(inv, 0.0);
    detect(inv, 0.0);
  }
}

void Simulation::control_inverter(InverterRuntime& inv, double t) {
  const double dt = cfg_.dt;
  inv.pll = pll_step(pll_sample(inv, t), dt, inv.pll, inv.cfg.pll);
  if (inv.mode == Mode::GFL) {
    if (!inv.enabled && inv.pll.lock) {
      inv.enabled = true;
      inv.gfl_scale = 0.0;
      log(t, "pll_lock", inv.cfg.id, kv("f_hz", inv.pll.frequency_hz()));
    }
    if (inv.enabled) inv.gfl_scale = std::min(1.0, inv.gfl_scale + dt / kGflReleaseTime);
    refresh_gfl_current(inv);
  } else {
    DroopState s = power_filter_step(inv.p, inv.q, dt, inv.gfm, inv.droop);
    s = restoration_step(inv.droop, s, dt);
    s = voltage_restoration_step(inv.droop, s, std::abs(inv.v_term), dt);
    s = droop_step(inv.droop, s, dt);
    inv.vz = virtual_impedance_step(std::polar(inv.gfm.v_gfm, inv.gfm.theta_gfm), inv.i_out, inv.vz, dt).vz;
    inv.gfm = s;
  }
  supervise(inv, t);
  detect(inv, t);
}

void Simulation::control(double t) {
  for (auto& inv : inv_) {
    if (inv.online) control_inverter(inv, t);
  }
}

void Simulation::supervise(InverterRuntime& inv, double t) {
  const Measurements m{t, inv.v_term, inv.i_out, inv.p, inv.q, pll_input_live(inv)};
  inv.sync = shadow_sync_step(inv.mode, m, inv.pll, inv.gfm, inv.vz, inv.cfg.sync, cfg_.bases.f_nom, inv.sync);

  const Breaker* pcc = inv.cfg.pcc_breaker.empty() ? nullptr : net_.find_breaker(inv.cfg.pcc_breaker);
  std::optional<Mode> target = inv.manual_request;
  if (!target && inv.cfg.auto_transition) {
    if (inv.mode == Mode::GFL) {
      if (inv.islanded || inv.preferred == Mode::GFM) target = Mode::GFM;
    } else if (inv.preferred == Mode::GFL && pcc != nullptr && pcc->closed()) {
      target = Mode::GFL;
    }
  }
  if (!target || *target == inv.mode) {
    inv.manual_request.reset();
    inv.last_denial = DenialReason::None;
    return;
  }

  const TransitionDecision d = request_transition(*target, inv.sync, inv.cfg.sync, t, *target == Mode::GFM || inv.pll.lock);
  if (!d.accepted) {
    if (d.reason != inv.last_denial && t - inv.last_denial_t >= kDenialLogInterval) {
      log(t, "transition_denied", inv.cfg.id,
          std::string(to_string(inv.mode)) + "->" + std::string(to_string(*target)) +
              " reason=" + std::string(to_string(d.reason)));
      inv.last_denial = d.reason;
      inv.last_denial_t = t;
    }
    return;
  }

  const Mode from = inv.mode;
  inv.mode = *target;
  inv.manual_request.reset();
  inv.last_denial = DenialReason::None;
  if (inv.mode == Mode::GFM) {
    inv.gfm.ramp = RampMode::Slew;
    inv.gfm.ramp_rate = inv.cfg.black_start ? inv.cfg.black_start->ramp_rate : 0.5;
  } else {
    inv.gfl_sp = {inv.p, inv.q};
    inv.droop.p_set = inv.p;
    inv.droop.q_set = inv.q;
    inv.enabled = true;
    inv.gfl_scale = 1.0;
    inv.detector.reset();
    inv.recon.reset();
    inv.islanded = false;
    inv.was_tripped = false;
    inv.was_ready = false;
    refresh_gfl_current(inv);
  }
  log(t, "transition", inv.cfg.id, std::string(to_string(from)) + "->" + std::string(to_string(inv.mode)));
}

void Simulation::detect(InverterRuntime& inv, double t) {
  if (inv.mode == Mode::GFL) {
    if (inv.enabled) {
      const bool trip = inv.detector.update({t, inv.pll.frequency_hz(), std::abs(inv.v_term)});
      if (trip && !inv.was_tripped) {
        inv.islanded = true;
        log(t, "islanding_detected", inv.cfg.id, kv("f_hz", inv.pll.frequency_hz()) + " " + kv("v", std::abs(inv.v_term)));
      }
      inv.was_tripped = trip;
    } else {
      inv.detector.reset();
      inv.was_tripped = false;
    }
  }

  const Breaker* pcc = inv.cfg.pcc_breaker.empty() ? nullptr : net_.find_breaker(inv.cfg.pcc_breaker);
  if (inv.mode != Mode::GFM || pcc == nullptr || pcc->closed() || !inv.pll.lock || !pll_input_live(inv)) {
    inv.recon.reset();
    inv.was_ready = false;
    return;
  }
  const PccMeasurement m{t, state_.bus_voltages[pcc->from], inv.pll.frequency_hz(), state_.bus_voltages[pcc->to],
                         inv.gfm.omega * inv.droop.f_nom};
  const bool ready = inv.recon.update(m);
  if (ready && !inv.was_ready) {
    log(t, "reconnection_ready", inv.cfg.id,
        kv("d_theta_deg", deg(wrap_angle(std::arg(m.v_util) - std::arg(m.v_mg)))) + " " +
            kv("d_f_hz", m.f_util - m.f_mg));
    if (inv.cfg.auto_reconnect) {
      net_.apply_event(BreakerSet{pcc->id, BreakerState::Closed}, t);
      log(t, "pcc_close", inv.cfg.pcc_breaker, "by=" + inv.cfg.id);
    }
  }
  inv.was_ready = ready;
}

// ---------------------------------------------------------------- record

TimeseriesRow Simulation::record(double t) const {
  TimeseriesRow r;
  r.t = t;
  r.v_mag.reserve(state_.bus_voltages.size());
  r.v_ang_deg.reserve(state_.bus_voltages.size());
  for (const Phasor& v : state_.bus_voltages) {
    r.v_mag.push_back(std::abs(v));
    r.v_ang_deg.push_back(std::abs(v) > 0.0 ? deg(phasor_angle(v)) : 0.0);
  }
  for (const auto& inv : inv_) {
    InverterSample s;
    s.f = inv.frequency_hz();
    s.p = inv.p;
    s.q = inv.q;
    s.mode = inv.mode;
    s.lock = inv.online && inv.pll.lock;
    s.island = inv.islanded;
    s.recon = inv.recon.ready();
    s.online = inv.online;
    r.inverters.push_back(s);
  }
  r.balance_residual = state_.balance_residual;
  return r;
}

const TimeseriesRow& Simulation::step() {
  if (done()) throw Error("simulation already finished");
  const double t = time();
  apply_due_events(t);
  if (k_ == 0) {
    initialize();
  } else {
    solve(t);
    measure();
    control(t);
  }
  row_ = record(t);
  ++k_;
  return row_;
}

// ------------------------------------------------------------------ run

namespace {

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& p) : out_(p, std::ios::binary) {
    if (!out_) throw Error("cannot open '" + p.string() + "' for writing");
  }
  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) buf_ += (i ? "," : "") + cols[i];
    buf_ += '\n';
  }
  void row(const TimeseriesRow& r) {
    num(r.t);
    for (std::size_t b = 0; b < r.v_mag.size(); ++b) {
      sep(), num(r.v_mag[b]);
      sep(), num(r.v_ang_deg[b]);
    }
    for (const auto& s : r.inverters) {
      sep(), num(s.f);
      sep(), num(s.p);
      sep(), num(s.q);
      sep(), num(s.mode == Mode::GFM ? 1.0 : 0.0);
      sep(), num(s.lock ? 1.0 : 0.0);
      sep(), num(s.island ? 1.0 : 0.0);
      sep(), num(s.recon ? 1.0 : 0.0);
    }
    buf_ += '\n';
    if (buf_.size() > (1u << 20)) flush();
  }
  void event(const EventRecord& e) {
    num(e.t);
    buf_ += "," + e.type + "," + e.target + "," + e.detail + "\n";
    flush();
  }
  void flush() {
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    out_.flush();
    buf_.clear();
  }
  ~CsvWriter() { flush(); }

 private:
  void sep() { buf_ += ','; }
  void num(double v) {
    char b[32];
    const int n = std::snprintf(b, sizeof b, "%.9g", v);
    buf_.append(b, static_cast<std::size_t>(n));
  }
  std::ofstream out_;
  std::string buf_;
};

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg_in, const RunOptions& opts) {
  ScenarioConfig cfg = cfg_in;
  if (opts.decimation) cfg.outputs.decimation = *opts.decimation;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.outputs.directory = opts.out_dir->string();
  validate_config(cfg);

  Simulation sim(cfg);
  MetricsAccumulator acc(sim.layout());
  RunResult result;

  std::unique_ptr<CsvWriter> ts, evs;
  std::filesystem::path dir;
  if (opts.out_dir) {
    dir = *opts.out_dir;
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "config.resolved.json") << to_json(cfg).dump(2) << "\n";
    ts = std::make_unique<CsvWriter>(dir / "timeseries.csv");
    ts->header(sim.csv_header());
    evs = std::make_unique<CsvWriter>(dir / "events.csv");
    evs->header({"t", "type", "target", "detail"});
  }
  sim.on_event = [&](const EventRecord& e) {
    acc.on_event(e);
    if (evs) evs->event(e);
  };

  const auto dec = static_cast<std::size_t>(cfg.outputs.decimation);
  while (!sim.done()) {
    const std::size_t k = sim.step_index();
    try {
      const TimeseriesRow& row = sim.step();
      acc.on_row(row);
      if (k % dec == 0) {
        if (ts) ts->row(row);
        if (opts.keep_rows) result.rows.push_back(row);
      }
    } catch (const Error& e) {
      result.aborted = true;
      result.abort_message = e.what();
      sim.record_abort(e.what());
      break;
    }
  }
  if (ts) ts->flush();

  result.metrics = acc.finish(result.aborted, result.abort_message);
  result.metrics.guard_audit = sim.audit();
  result.events = sim.events();
  if (opts.out_dir) std::ofstream(dir / "metrics.json") << result.metrics.to_json().dump(2) << "\n";
  return result;
}

}  // namespace csync
