#include <catch_amalgamated.hpp>

#include <cmath>

#include "csync/metrics.hpp"

using namespace csync;
using Catch::Approx;

namespace {

MetricsLayout two_inverter_layout() {
  MetricsLayout l;
  l.scenario = "synthetic";
  l.bus_ids = {"b1", "b2"};
  l.inverter_ids = {"inv1", "inv2"};
  l.inverter_bus = {0, 1};
  l.m_p = {0.01, 0.02};
  l.pcc_breakers = {"pcc"};
  return l;
}

TimeseriesRow row(double t, double f1, double f2, double p1 = 1.0, double p2 = 0.5) {
  TimeseriesRow r;
  r.t = t;
  r.v_mag = {1.0, 1.0};
  r.v_ang_deg = {0.0, 0.0};
  r.inverters = {{f1, p1, 0.0, Mode::GFM, false}, {f2, p2, 0.0, Mode::GFM, false}};
  return r;
}

}  // namespace

TEST_CASE("nadir and settling from synthetic rows", "[metrics]") {
  const auto layout = two_inverter_layout();
  std::vector<TimeseriesRow> rows;
  // Event at t = 1, dip to 59.6 at t = 1.5, back inside 0.01 Hz after t = 3.2.
  for (int k = 0; k <= 500; ++k) {
    const double t = k * 0.01;
    double f = 60.0;
    if (t > 1.0 && t <= 3.2) f = 60.0 - 0.4 * std::exp(-std::pow(t - 1.5, 2) * 4.0) - 0.02;
    rows.push_back(row(t, f, f + 0.001));
  }
  const std::vector<EventRecord> ev{{1.0, "load_step", "ld", "dp=0.5"}};
  const MetricsReport m = compute_metrics(layout, rows, ev);
  // Oracle: scan the rows directly.
  double nadir = 1e9, nadir_t = 0, last_out = 0;
  for (const auto& r : rows) {
    for (const auto& s : r.inverters) {
      if (s.f < nadir) { nadir = s.f; nadir_t = r.t; }
      if (std::abs(s.f - 60.0) > 0.01) last_out = r.t;
    }
  }
  REQUIRE(m.nadir_hz);
  CHECK(*m.nadir_hz == nadir);
  CHECK(*m.nadir_t == nadir_t);
  REQUIRE(m.settling_time);
  CHECK(*m.settling_time == Approx(last_out - 1.0));
  CHECK(*m.settling_time == Approx(2.2));
  CHECK_FALSE(m.detection_latency);
  CHECK(m.transitions.empty());
}

TEST_CASE("unsettled run and missing quantities report n/a", "[metrics]") {
  const auto layout = two_inverter_layout();
  std::vector<TimeseriesRow> rows{row(0.0, 60.0, 60.0), row(0.1, 59.9, 59.9)};
  const MetricsReport m = compute_metrics(layout, rows, {});
  CHECK_FALSE(m.settling_time);
  const auto j = m.to_json();
  CHECK(j["settling_time_s"] == "n/a");
  CHECK(j["islanding_detection_latency_s"] == "n/a");
  CHECK(j["reconnection_ready_time_s"] == "n/a");
  CHECK(j["transitions"] == "n/a");
  CHECK(j["guard_audit"] == "n/a");
  CHECK(j["abort_reason"] == "n/a");
}

TEST_CASE("frequency of unlocked GFL inverters is ignored", "[metrics]") {
  const auto layout = two_inverter_layout();
  TimeseriesRow r = row(0.0, 60.0, 60.0);
  r.inverters[1].mode = Mode::GFL;
  r.inverters[1].f = 48.0;
  const MetricsReport m = compute_metrics(layout, {r}, {});
  CHECK(*m.nadir_hz == 60.0);
  r.inverters[1].lock = true;
  CHECK(*compute_metrics(layout, {r}, {}).nadir_hz == 48.0);
}

TEST_CASE("transition jumps use the bus voltage across the step", "[metrics]") {
  const auto layout = two_inverter_layout();
  TimeseriesRow a = row(1.0, 60.0, 60.0), b = row(1.0001, 60.0, 60.0);
  a.v_ang_deg = {179.5, 0.0};
  b.v_ang_deg = {-179.8, 0.0};
  a.v_mag = {1.0, 1.0};
  b.v_mag = {0.99, 1.0};
  const std::vector<EventRecord> ev{{1.0, "transition", "inv1", "GFL->GFM"}};
  const MetricsReport m = compute_metrics(layout, {a, b}, ev);
  REQUIRE(m.transitions.size() == 1);
  CHECK(m.transitions[0].phase_jump_deg == Approx(0.7));
  CHECK(m.transitions[0].magnitude_jump_pu == Approx(0.01));
  CHECK(m.max_phase_jump_deg() == Approx(0.7));
}

TEST_CASE("detection latency counts from the PCC opening", "[metrics]") {
  const auto layout = two_inverter_layout();
  std::vector<TimeseriesRow> rows;
  for (int k = 0; k <= 40; ++k) rows.push_back(row(k * 0.1, 60.0, 60.0));
  const std::vector<EventRecord> ev{{0.5, "islanding_detected", "inv1", ""},  // before opening: ignored
                                    {1.0, "breaker_set", "other", "open"},
                                    {2.0, "breaker_set", "pcc", "open"},
                                    {2.3, "islanding_detected", "inv2", ""},
                                    {3.1, "reconnection_ready", "inv2", ""}};
  const MetricsReport m = compute_metrics(layout, rows, ev);
  REQUIRE(m.detection_latency);
  CHECK(*m.detection_latency == Approx(0.3));
  CHECK(*m.reconnection_ready_time == 3.1);
}

TEST_CASE("sharing error against the droop ratio", "[metrics]") {
  const auto layout = two_inverter_layout();
  // m_p2 / m_p1 = 2, so P1 / P2 should be 2.
  CHECK(*sharing_error(layout, row(0, 60, 60, 1.0, 0.5)) == Approx(0.0));
  CHECK(*sharing_error(layout, row(0, 60, 60, 1.0, 0.48)) == Approx(1.0 / 0.48 - 2.0));
  TimeseriesRow r = row(0, 60, 60);
  r.inverters[1].mode = Mode::GFL;
  CHECK_FALSE(sharing_error(layout, r));
}

TEST_CASE("live accumulator equals offline recomputation", "[metrics]") {
  const auto layout = two_inverter_layout();
  std::vector<TimeseriesRow> rows;
  std::vector<EventRecord> ev{{0.5, "load_step", "ld", ""}, {1.0, "transition", "inv2", "GFM->GFL"}};
  MetricsAccumulator live(layout);
  std::size_t e = 0;
  for (int k = 0; k <= 300; ++k) {
    const double t = k * 0.01;
    TimeseriesRow r = row(t, 60.0 - 0.1 * std::sin(t), 60.0 - 0.05 * std::sin(2 * t));
    r.v_ang_deg = {t, 2 * t};
    r.balance_residual = 1e-12 * k;
    while (e < ev.size() && ev[e].t <= t + 1e-9) live.on_event(ev[e++]);
    live.on_row(r);
    rows.push_back(r);
  }
  const auto a = live.finish().to_json();
  const auto b = compute_metrics(layout, rows, ev).to_json();
  CHECK(a == b);
  CHECK(a["power_balance_max_residual"].get<double>() == Approx(3e-10));
}

TEST_CASE("guard audit summary", "[metrics]") {
  MetricsReport m;
  m.guard_audit = {{1.0, "inv1", "ems", true, GuardReason::None, 60.0, 1.0},
                   {2.0, "inv1", "x", false, GuardReason::Range, 60.0, 1.0},
                   {3.0, "inv2", "x", false, GuardReason::Range, 60.0, 1.0},
                   {4.0, "inv2", "x", false, GuardReason::PredictedFrequency, 59.3, 1.0}};
  const auto j = m.to_json()["guard_audit"];
  CHECK(j["submitted"] == 4);
  CHECK(j["accepted"] == 1);
  CHECK(j["rejected_by_reason"]["range"] == 2);
  CHECK(j["rejected_by_reason"]["predicted-frequency"] == 1);
  CHECK(is_scripted_event_type("setpoint"));
  CHECK_FALSE(is_scripted_event_type("transition"));
}
