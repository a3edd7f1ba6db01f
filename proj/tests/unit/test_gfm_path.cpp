#include <catch_amalgamated.hpp>

#include <cmath>

#include "csync/gfm_path.hpp"

using namespace csync;
using Catch::Approx;

TEST_CASE("power filter follows the forward-Euler recurrence", "[gfm]") {
  DroopParams prm;
  const double dt = 1e-4;
  DroopState s;
  const double a = dt * prm.omega_c;
  // Step input: p_f[n] = P (1 - (1 - a)^n)
  for (int n = 1; n <= 1000; ++n) {
    s = power_filter_step(0.8, -0.3, dt, s, prm);
    CHECK(s.p_f == Approx(0.8 * (1.0 - std::pow(1.0 - a, n))).margin(1e-12));
    CHECK(s.q_f == Approx(-0.3 * (1.0 - std::pow(1.0 - a, n))).margin(1e-12));
  }
  // Close to the continuous response after 1000 steps (0.1 s = 6.3 tau).
  CHECK(s.p_f == Approx(0.8 * (1.0 - std::exp(-prm.omega_c * 0.1))).margin(1e-3));
}

TEST_CASE("droop frequency and angle advance", "[gfm]") {
  DroopParams prm;
  prm.m_p = 0.02;
  prm.p_set = 0.3;
  DroopState s;
  s.p_f = 0.8;
  s.u = 0.004;
  const double dt = 1e-4;
  const DroopState n = droop_step(prm, s, dt);
  const double w = 1.0 - 0.02 * 0.5 + 0.004;
  CHECK(n.omega == Approx(w).margin(1e-15));
  CHECK(n.theta_gfm == Approx((w - 1.0) * kTwoPi * 60.0 * dt).margin(1e-15));
  CHECK(n.omega * prm.f_nom == Approx(59.64));
  // Voltage droop with no reactive power offset.
  CHECK(n.v_gfm == Approx(1.0));
}

TEST_CASE("voltage droop target", "[gfm]") {
  DroopParams prm;
  prm.n_q = 0.05;
  prm.q_set = 0.1;
  DroopState s;
  s.q_f = 0.5;
  s.u_v = 0.01;
  CHECK(droop_voltage_target(prm, s) == Approx(1.0 - 0.05 * 0.4 + 0.01));
  s.q_f = -10.0;
  CHECK(droop_voltage_target(prm, s) == Approx(1.2));
}

TEST_CASE("restoration integrates toward nominal and clamps", "[gfm]") {
  DroopParams prm;
  prm.k_r = 2.0;
  prm.u_limit = 0.01;
  DroopState s;
  s.omega = 0.99;
  s = restoration_step(prm, s, 0.1);
  CHECK(s.u == Approx(0.1 * 2.0 * 0.01));
  for (int k = 0; k < 100; ++k) s = restoration_step(prm, s, 0.1);
  CHECK(s.u == Approx(0.01));
  s.omega = 1.5;
  for (int k = 0; k < 100; ++k) s = restoration_step(prm, s, 0.1);
  CHECK(s.u == Approx(-0.01));
}

TEST_CASE("closed-loop restoration returns to nominal with held power", "[gfm]") {
  DroopParams prm;
  prm.k_r = 0.5;
  DroopState s;
  s.p_f = 0.5;
  const double dt = 1e-3;
  for (int k = 0; k < 20000; ++k) {
    s = droop_step(prm, s, dt);
    s = restoration_step(prm, s, dt);
  }
  // Linear recurrence: u -> m_p (p_f - p_set), error decays like exp(-k_r t).
  CHECK(s.u == Approx(0.005).margin(0.005 * std::exp(-0.5 * 20.0) * 2));
  CHECK(s.omega == Approx(1.0).margin(1e-6));
}

TEST_CASE("voltage restoration", "[gfm]") {
  DroopParams prm;
  prm.k_v = 1.0;
  prm.u_v_limit = 0.03;
  DroopState s;
  s = voltage_restoration_step(prm, s, 0.98, 0.5);
  CHECK(s.u_v == Approx(0.01));
  for (int k = 0; k < 20; ++k) s = voltage_restoration_step(prm, s, 0.9, 0.5);
  CHECK(s.u_v == Approx(0.03));
  s.ramp = RampMode::BlackStart;
  const DroopState held = voltage_restoration_step(prm, s, 0.0, 0.5);
  CHECK(held.u_v == s.u_v);
}

TEST_CASE("virtual impedance drop", "[gfm]") {
  VirtualImpedance vz;
  vz.r_v = 0.01;
  vz.x_v = 0.05;
  const Phasor i{0.6, -0.2};
  const auto out = virtual_impedance_step({1.0, 0.0}, i, vz, 1e-4);
  CHECK(std::abs(out.v_out - (Phasor{1.0, 0.0} - Phasor{0.01, 0.05} * i)) < 1e-15);
  CHECK(out.vz.x_v == 0.05);
  CHECK(out.vz.i_filtered == Approx(1e-4 / 0.02 * std::abs(i)));
}

TEST_CASE("adaptive virtual reactance stays in bounds", "[gfm]") {
  VirtualImpedance vz;
  vz.k_adapt = 5.0;
  vz.x_v_min = 0.02;
  vz.x_v_max = 0.2;
  bool rose = false;
  for (int k = 0; k < 20000; ++k) {
    const auto out = virtual_impedance_step({1.0, 0.0}, {3.0, 0.0}, vz, 1e-4);
    rose |= out.vz.x_v > vz.x_v;
    vz = out.vz;
    CHECK(vz.x_v <= 0.2);
    CHECK(vz.x_v >= 0.02);
  }
  CHECK(rose);
  CHECK(vz.x_v == Approx(0.2));
  for (int k = 0; k < 20000; ++k) vz = virtual_impedance_step({1.0, 0.0}, {}, vz, 1e-4).vz;
  CHECK(vz.x_v == Approx(0.02));
}

TEST_CASE("black start ramps without overshoot", "[gfm]") {
  DroopParams prm;
  DroopState s;
  s.v_gfm = 0.0;
  s.ramp = RampMode::BlackStart;
  s.ramp_rate = 0.5;
  s.ramp_target = 1.0;
  const double dt = 1e-3;
  double prev = 0.0;
  int steps = 0;
  while (s.ramp == RampMode::BlackStart) {
    s = droop_step(prm, s, dt);
    CHECK(s.v_gfm <= 1.0);
    CHECK(s.v_gfm >= prev);
    prev = s.v_gfm;
    REQUIRE(++steps < 10000);
  }
  // 1.0 / 0.5 pu/s = 2 s.
  CHECK(steps * dt == Approx(2.0).margin(2 * dt));
  CHECK(s.v_gfm == 1.0);
}

TEST_CASE("slew hands over to the droop target", "[gfm]") {
  DroopParams prm;
  prm.n_q = 0.05;
  DroopState s;
  s.v_gfm = 1.0;
  s.q_f = 1.0;  // target 0.95
  s.ramp = RampMode::Slew;
  s.ramp_rate = 0.5;
  const double dt = 1e-3;
  s = droop_step(prm, s, dt);
  CHECK(s.v_gfm == Approx(1.0 - 0.5e-3));
  int steps = 1;
  while (s.ramp == RampMode::Slew) {
    s = droop_step(prm, s, dt);
    REQUIRE(++steps < 1000);
  }
  CHECK(s.v_gfm == Approx(0.95));
  CHECK(std::abs(steps - 100) <= 1);
}

TEST_CASE("slew_toward", "[gfm]") {
  CHECK(slew_toward(0.0, 1.0, 2.0, 0.1) == Approx(0.2));
  CHECK(slew_toward(1.0, 0.0, 2.0, 0.1) == Approx(0.8));
  CHECK(slew_toward(0.95, 1.0, 2.0, 0.1) == 1.0);
}
