#include <catch_amalgamated.hpp>

#include <chrono>

#include "csync/errors.hpp"
#include "csync/network.hpp"

using namespace csync;
using Catch::Approx;

namespace {

// High-voltage root of |x^2 + z conj(s)| = |e| x by bisection. For a source
// e behind z feeding a constant-power load s, e conj(v) = |v|^2 + z conj(s).
double bisect_cp_voltage(double e, Phasor z, Phasor s) {
  auto f = [&](double x) { return std::abs(x * x + z * std::conj(s)) - e * x; };
  double lo = 0.5, hi = e;
  REQUIRE(f(lo) < 0.0);
  REQUIRE(f(hi) > 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Feeder {
  std::vector<Line> lines{{"l1", 0, 1, 0.02, 0.06}};
  Phasor z_s{0.0, 0.01};
  ComplexMatrix y = build_ybus(2, lines, {});
  std::vector<VoltageSourceInjection> src{{0, {1.0, 0.0}, z_s}};
};

}  // namespace

TEST_CASE("two-bus voltage divider matches the analytic solution", "[network]") {
  const auto t0 = std::chrono::steady_clock::now();
  Feeder f;
  const Phasor z_load{0.8, 0.3};
  const std::vector<Load> loads{Load::from_impedance("ld", 1, z_load)};
  const NetworkState st = solve_network(f.y, f.src, {}, loads);
  const Phasor z_line{0.02, 0.06};
  const Phasor v1 = z_load / (f.z_s + z_line + z_load);
  const Phasor v0 = (z_line + z_load) / (f.z_s + z_line + z_load);
  CHECK(std::abs(st.bus_voltages[1] - v1) <= 1e-9);
  CHECK(std::abs(st.bus_voltages[0] - v0) <= 1e-9);
  CHECK(st.balance_residual <= 1e-8);
  CHECK(st.nodal_residual <= 1e-10);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
}

TEST_CASE("constant-power load matches scalar bisection", "[network]") {
  Feeder f;
  const Phasor s{0.5, 0.1};
  const std::vector<Load> loads{{"ld", 1, LoadKind::ConstantPower, s}};
  NetworkSolver solver;
  const NetworkState st = solver.solve(f.y, f.src, {}, loads, f.lines, {});
  const double expect = bisect_cp_voltage(1.0, f.z_s + Phasor{0.02, 0.06}, s);
  CHECK(std::abs(st.bus_voltages[1]) == Approx(expect).margin(1e-8));
  // Delivered power equals the demand.
  const Phasor delivered = st.bus_voltages[1] * std::conj(st.load_currents[0]);
  CHECK(std::abs(delivered - s) < 1e-8);
  CHECK(st.balance_residual <= 1e-8);
  CHECK(st.iterations > 1);
}

TEST_CASE("constant-power load below the threshold acts as an impedance", "[network]") {
  // Resistive feeder: 1 pu demand exceeds the 1/(4 r) transfer limit.
  const std::vector<Line> lines{{"l1", 0, 1, 0.29, 0.0}};
  const ComplexMatrix y = build_ybus(2, lines, {});
  const std::vector<VoltageSourceInjection> src{{0, {1.0, 0.0}, {0.01, 0.0}}};
  const Phasor s{1.0, 0.0};
  const std::vector<Load> loads{{"ld", 1, LoadKind::ConstantPower, s}};
  NetworkSolver solver;
  const NetworkState st = solver.solve(y, src, {}, loads, lines, {});
  REQUIRE(std::abs(st.bus_voltages[1]) < 0.5);
  // Admittance conj(s) / 0.25 at the bus.
  const Phasor z_eq = 0.25 / std::conj(s);
  const Phasor expect = z_eq / (Phasor{0.3, 0.0} + z_eq);
  CHECK(std::abs(st.bus_voltages[1] - expect) < 1e-9);
}

TEST_CASE("Norton-folded current injection", "[network]") {
  Feeder f;
  const std::vector<CurrentInjection> inj{{1, {0.3, -0.1}}};
  const std::vector<Load> loads{Load::from_impedance("ld", 1, {1.0, 0.0})};
  const NetworkState st = solve_network(f.y, f.src, inj, loads);
  // Superposition: voltage divider plus the injection through the parallel
  // of (z_s + z_line) and z_load.
  const Phasor za = f.z_s + Phasor{0.02, 0.06}, zl{1.0, 0.0};
  const Phasor v_div = zl / (za + zl);
  const Phasor v_inj = inj[0].i * (za * zl / (za + zl));
  CHECK(std::abs(st.bus_voltages[1] - (v_div + v_inj)) < 1e-12);
  CHECK(st.balance_residual < 1e-12);
}

TEST_CASE("open breaker takes its line out of service", "[network]") {
  const std::vector<Line> lines{{"l1", 0, 1, 0.01, 0.02}, {"l2", 1, 2, 0.01, 0.02}};
  std::vector<Breaker> brk{{"b", 1, 2, BreakerState::Closed}};
  CHECK(line_in_service(lines[1], brk));
  ComplexMatrix y = build_ybus(3, lines, brk);
  CHECK(find_islands(y).size() == 1);
  brk[0].state = BreakerState::Open;
  CHECK_FALSE(line_in_service(lines[1], brk));
  y = build_ybus(3, lines, brk);
  const auto islands = find_islands(y);
  REQUIRE(islands.size() == 2);
  CHECK(islands[1] == std::vector<BusIndex>{2});

  // A loaded island without a source is reported and held at zero volts.
  const std::vector<VoltageSourceInjection> src{{0, {1.0, 0.0}, {0.0, 0.01}}};
  const std::vector<Load> loads{Load::from_impedance("ld", 2, {1.0, 0.0})};
  NetworkSolver solver;
  const NetworkState st = solver.solve(y, src, {}, loads, lines, brk);
  REQUIRE(st.unsourced_islands.size() == 1);
  CHECK(st.unsourced_islands[0] == std::vector<BusIndex>{2});
  CHECK(std::abs(st.bus_voltages[2]) == 0.0);
  CHECK(st.branch_currents[1] == Phasor{});
}

TEST_CASE("island with a current injection and a shunt is energized", "[network]") {
  const ComplexMatrix y = build_ybus(1, std::vector<Line>{}, {});
  const std::vector<CurrentInjection> inj{{0, {0.5, 0.0}}};
  const std::vector<Load> loads{Load::from_impedance("ld", 0, {2.0, 0.0})};
  const NetworkState st = solve_network(y, {}, inj, loads);
  CHECK(st.unsourced_islands.empty());
  CHECK(std::abs(st.bus_voltages[0] - Phasor{1.0, 0.0}) < 1e-12);
}

TEST_CASE("negative-sequence solve is a linear divider", "[network]") {
  Feeder f;
  const std::vector<VoltageSourceInjection> neg{{0, {0.1, 0.0}, f.z_s}};
  const Phasor y_sh{0.5, -0.2};
  const std::vector<CurrentInjection> shunts{{1, y_sh}};
  NetworkSolver solver;
  const auto v = solver.solve_negative(f.y, neg, shunts);
  const Phasor zl = 1.0 / y_sh;
  CHECK(std::abs(v[1] - 0.1 * zl / (f.z_s + Phasor{0.02, 0.06} + zl)) < 1e-12);
}

TEST_CASE("grid source rotates at its frequency offset", "[network]") {
  GridSource g;
  g.f_grid = 60.5;
  const Phasor e = g.emf(0.1, 60.0);
  CHECK(std::arg(e) == Approx(wrap_angle(kTwoPi * 0.5 * 0.1)));

  Network net({"a"}, {}, {}, {g}, {}, 60.0);
  net.apply_event(SourceFrequency{g.id, 60.0}, 0.1);
  // Re-referenced: continuous at the event, then stationary.
  CHECK(std::abs(net.sources()[0].emf(0.1, 60.0) - e) < 1e-12);
  CHECK(std::abs(net.sources()[0].emf(5.0, 60.0) - e) < 1e-12);
  net.apply_event(SourceVoltage{g.id, 0.0}, 0.2);
  CHECK(std::abs(net.sources()[0].emf(0.3, 60.0)) == 0.0);
  net.apply_event(SourceVoltage{g.id, 1.0}, 0.3);
  CHECK(std::abs(net.sources()[0].emf(0.3, 60.0)) == Approx(1.0));
  CHECK_THROWS_AS(net.apply_event(LoadStep{"missing", {0.1, 0.0}}, 0.0), UnknownElement);
}

TEST_CASE("load step event shifts the load power", "[network]") {
  Network net({"a", "b"}, {{"l", 0, 1, 0.01, 0.02}}, {}, {GridSource{}}, {{"ld", 1, LoadKind::ConstantImpedance, {0.5, 0.1}}},
              60.0);
  net.apply_event(LoadStep{"ld", {0.2, 0.0}}, 1.0);
  CHECK(net.loads()[0].s_nom == Phasor{0.7, 0.1});
}

TEST_CASE("cached factorisation gives identical results", "[network]") {
  Feeder f;
  const std::vector<Load> loads{{"ld", 1, LoadKind::ConstantPower, {0.4, 0.2}}};
  NetworkSolver solver;
  const NetworkState a = solver.solve(f.y, f.src, {}, loads, f.lines, {});
  const NetworkState b = solver.solve(f.y, f.src, {}, loads, f.lines, {});
  NetworkSolver fresh;
  const NetworkState c = fresh.solve(f.y, f.src, {}, loads, f.lines, {});
  CHECK(a.bus_voltages == b.bus_voltages);
  CHECK(a.bus_voltages == c.bus_voltages);
}

TEST_CASE("infeasible constant-power demand does not converge", "[network]") {
  Feeder f;
  f.src[0].z = {0.0, 0.5};
  const std::vector<Load> loads{{"ld", 1, LoadKind::ConstantPower, {3.0, 1.0}}};
  NetworkSolver solver;
  CHECK_THROWS_AS(solver.solve(f.y, f.src, {}, loads, f.lines, {}), NonConvergence);
}

TEST_CASE("branch power", "[network]") {
  const Phasor s = branch_power({1.0, 0.0}, {0.9, -0.1}, {0.0, 0.1});
  const Phasor i = (Phasor{1.0, 0.0} - Phasor{0.9, -0.1}) / Phasor{0.0, 0.1};
  CHECK(std::abs(s - std::conj(i)) < 1e-12);
}
