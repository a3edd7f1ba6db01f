#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "csync/setpoint_guard.hpp"
#include "guard_oracle.hpp"

using namespace csync;
using Catch::Approx;

namespace {

PlantSnapshot plant_with_load(double p_load, double p_set = 0.0) {
  PlantSnapshot p;
  p.params.m_p = 0.01;
  p.params.p_set = p_set;
  p.p_load_est = p_load;
  return p;
}

Setpoint sp(double p, double q = 0.0, double v = 1.0) {
  Setpoint s;
  s.p_set = p;
  s.q_set = q;
  s.v_nom = v;
  return s;
}

}  // namespace

TEST_CASE("negative setpoint into a heavy island is rejected on frequency", "[guard]") {
  GuardLimits lim;
  lim.dp_max = 1.0;
  const GuardVerdict v = validate(sp(-0.2), plant_with_load(0.9), lim);
  CHECK_FALSE(v.accepted);
  CHECK(v.reason == GuardReason::PredictedFrequency);
  CHECK(v.predicted_f == Approx(60.0 * (1.0 - 0.011)));
  CHECK(v.predicted_f == Approx(59.34));
  CHECK(to_string(v.reason) == "predicted-frequency");
}

TEST_CASE("restoration offset enters the prediction", "[guard]") {
  PlantSnapshot p = plant_with_load(0.9);
  p.state.u = 0.005;
  CHECK(predict_frequency(p, 0.0) == Approx(60.0 * (1.0 - 0.009 + 0.005)));
  p.params.n_q = 0.05;
  p.q_load_est = 0.4;
  p.state.u_v = 0.01;
  CHECK(predict_voltage(p, 0.1, 1.02) == Approx(1.02 - 0.05 * 0.3 + 0.01));
}

TEST_CASE("check order is range, rate, frequency, voltage", "[guard]") {
  GuardLimits lim;
  PlantSnapshot p = plant_with_load(0.9);
  p.params.n_q = 0.05;
  // Range beats rate.
  CHECK(validate(sp(1.2), p, lim).reason == GuardReason::Range);
  CHECK(validate(sp(0.0, 0.0, 1.2), p, lim).reason == GuardReason::Range);
  CHECK(validate(sp(std::numeric_limits<double>::quiet_NaN()), p, lim).reason == GuardReason::Range);
  CHECK(validate(sp(0.8, 0.7), p, lim).reason == GuardReason::Range);
  // Rate beats predicted frequency.
  CHECK(validate(sp(-0.5), p, lim).reason == GuardReason::Rate);
  CHECK(validate(sp(0.0, 0.0, 1.08), p, lim).reason == GuardReason::Rate);
  // Predicted frequency beats predicted voltage.
  lim.dp_max = 1.0;
  p.q_load_est = 4.0;
  CHECK(validate(sp(-0.2), p, lim).reason == GuardReason::PredictedFrequency);
  p.p_load_est = 0.5;
  CHECK(validate(sp(0.0), p, lim).reason == GuardReason::PredictedVoltage);
  p.q_load_est = 0.0;
  CHECK(validate(sp(0.0), p, lim).accepted);
}

TEST_CASE("decimal limits are inclusive", "[guard]") {
  GuardLimits lim;
  PlantSnapshot p = plant_with_load(0.0, 0.6);
  CHECK(validate(sp(0.8), p, lim).accepted);  // 0.8 - 0.6 == dp_max
  CHECK(validate(sp(0.6, 0.8), p, lim).accepted);  // |S| == 1
  CHECK(validate(sp(0.6, 0.0, 1.05), p, lim).accepted);
  CHECK(validate(sp(0.6, 0.0, 1.0501), p, lim).reason == GuardReason::Rate);
}

TEST_CASE("exhaustive p_set x load grid matches the integer oracle", "[guard]") {
  const auto r = testing::run_guard_grid();
  CHECK(r.cases == 151 * 201);
  CHECK(r.unsound_accepts == 0);
  CHECK(r.spurious_rejects == 0);
  CHECK(r.mismatches == 0);
}

TEST_CASE("grid boundary sits where the oracle puts it", "[guard]") {
  // 6 (load - p) > 500 mHz  <=>  load - p >= 84 hundredths.
  GuardLimits lim;
  lim.dp_max = 10.0;
  CHECK(validate(sp(0.0), plant_with_load(0.83), lim).accepted);
  CHECK_FALSE(validate(sp(0.0), plant_with_load(0.84), lim).accepted);
  CHECK(validate(sp(0.83), plant_with_load(0.0), lim).accepted);
  CHECK_FALSE(validate(sp(0.84), plant_with_load(0.0), lim).accepted);
}

TEST_CASE("safe setpoints with margin are never rejected", "[guard]") {
  // Non-zero restoration offset and reactive terms, double-precision oracle.
  GuardLimits lim;
  lim.dp_max = 10.0;
  lim.dv_nom_max = 10.0;
  long checked = 0;
  for (int load = 0; load <= 150; load += 3) {
    PlantSnapshot p = plant_with_load(load / 100.0);
    p.state.u = 0.002;
    p.params.n_q = 0.05;
    p.q_load_est = 0.2;
    for (int pi = -100; pi <= 100; pi += 5) {
      for (int vi = 90; vi <= 110; vi += 2) {
        const double ps = pi / 100.0, vn = vi / 100.0;
        const double f = 60.0 * (1.0 - 0.01 * (load / 100.0 - ps) + 0.002);
        const double v = vn - 0.05 * 0.2;
        const bool safe = f >= 59.55 && f <= 60.45 && v >= 0.91 && v <= 1.09;
        const bool unsafe = f < 59.5 || f > 60.5 || v < 0.9 || v > 1.1;
        const GuardVerdict g = validate(sp(ps, 0.0, vn), p, lim);
        if (safe) CHECK(g.accepted);
        if (unsafe) CHECK_FALSE(g.accepted);
        ++checked;
      }
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("guard keeps an audit entry per submission", "[guard]") {
  SetpointGuard g;
  const PlantSnapshot p = plant_with_load(0.5);
  Setpoint a = sp(0.1);
  a.source_id = "ems";
  a.t_issued = 1.0;
  Setpoint b = sp(0.9);
  b.source_id = "attacker";
  b.t_issued = 2.0;
  CHECK(g.submit(a, p).accepted);
  CHECK_FALSE(g.submit(b, p).accepted);
  REQUIRE(g.audit().size() == 2);
  CHECK(g.audit()[0].source_id == "ems");
  CHECK(g.audit()[1].verdict.reason == GuardReason::Rate);
  CHECK(g.audit()[1].t == 2.0);
}
