#pragma once

// Quasi-static phasor model of the microgrid. Every bus voltage is a
// positive-sequence phasor in the frame rotating at nominal frequency; a
// separate linear solve carries negative-sequence voltages when any source
// is unbalanced.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "csync/core_types.hpp"

namespace csync {

using BusIndex = std::size_t;
using ComplexMatrix = Eigen::MatrixXcd;

struct Line {
  std::string id;
  BusIndex from = 0;
  BusIndex to = 0;
  double r = 0.0;
  double x = 0.0;

  Phasor impedance() const { return {r, x}; }
};

enum class BreakerState { Closed, Open };

struct Breaker {
  std::string id;
  BusIndex from = 0;  // utility side when used as a PCC
  BusIndex to = 0;
  BreakerState state = BreakerState::Closed;

  bool closed() const { return state == BreakerState::Closed; }
};

/// Utility source (grid emulator): EMF behind a source impedance. The EMF
/// rotates at (f_grid - f_nom) relative to the nominal frame; `e` and `e_neg`
/// are the phasors at `t_ref`.
struct GridSource {
  std::string id;
  BusIndex bus = 0;
  Phasor e{1.0, 0.0};
  Phasor e_neg{};
  Phasor z_s{0.0, 0.01};
  double f_grid = 60.0;
  double rating_va = 30000.0;
  double t_ref = 0.0;

  Phasor emf(double t, double f_nom) const;
  Phasor emf_neg(double t, double f_nom) const;
};

enum class LoadKind { ConstantImpedance, ConstantPower };

/// Loads are parameterised by their complex power at 1 pu voltage. For the
/// constant-impedance kind the admittance is conj(s_nom).
struct Load {
  std::string id;
  BusIndex bus = 0;
  LoadKind kind = LoadKind::ConstantImpedance;
  Phasor s_nom{};

  static Load from_impedance(std::string id, BusIndex bus, Phasor z);
  Phasor admittance() const { return std::conj(s_nom); }
};

/// Norton-folded voltage source: EMF `e` behind impedance `z` at `bus`.
struct VoltageSourceInjection {
  BusIndex bus = 0;
  Phasor e{};
  Phasor z{};
};

struct CurrentInjection {
  BusIndex bus = 0;
  Phasor i{};
};

struct SolveOptions {
  int max_iters = 50;
  double tol = 1e-10;
  double damping = 0.7;
  // Constant-power loads behave as constant impedance below this voltage.
  double cp_min_voltage = 0.5;
};

struct NetworkState {
  std::vector<Phasor> bus_voltages;
  std::vector<Phasor> branch_currents;  // one per line, zero when out of service
  std::vector<Phasor> source_currents;  // into the network, per voltage source
  std::vector<Phasor> load_currents;    // drawn, per load
  std::vector<std::vector<BusIndex>> unsourced_islands;  // loaded islands with no source
  double t = 0.0;
  int iterations = 0;
  double nodal_residual = 0.0;
  double balance_residual = 0.0;
};

/// Nodal admittance matrix from in-service lines. A line is out of service
/// when any open breaker spans the same bus pair.
ComplexMatrix build_ybus(std::size_t bus_count, std::span<const Line> lines,
                         std::span<const Breaker> breakers);

bool line_in_service(const Line& line, std::span<const Breaker> breakers);

/// Complex power at the sending end of a branch.
Phasor branch_power(Phasor v_from, Phasor v_to, Phasor z);

/// Connected components of the graph implied by the off-diagonal entries.
std::vector<std::vector<BusIndex>> find_islands(const ComplexMatrix& ybus);

/// Positive-sequence solver with a cached factorisation. The factorisation is
/// reused while the shunt structure (source impedances, impedance loads,
/// injection buses) and the admittance matrix are unchanged.
class NetworkSolver {
 public:
  explicit NetworkSolver(SolveOptions opts = {}) : opts_(opts) {}

  /// Throws NonConvergence when constant-power iteration exceeds max_iters.
  NetworkState solve(const ComplexMatrix& ybus, std::span<const VoltageSourceInjection> sources,
                     std::span<const CurrentInjection> injections, std::span<const Load> loads,
                     std::span<const Line> lines, std::span<const Breaker> breakers,
                     const std::vector<Phasor>* warm_start = nullptr);

  /// Linear negative-sequence solve: sources are neg-sequence EMFs behind their
  /// impedances, `shunts` are passive admittances at buses.
  std::vector<Phasor> solve_negative(const ComplexMatrix& ybus,
                                     std::span<const VoltageSourceInjection> sources,
                                     std::span<const CurrentInjection> shunts);

  const SolveOptions& options() const { return opts_; }

 private:
  struct Factor {
    std::vector<double> signature;
    std::vector<char> energized;
    std::vector<std::vector<BusIndex>> unsourced;
    Eigen::PartialPivLU<ComplexMatrix> lu;
    bool valid = false;
  };

  void prepare(Factor& f, const ComplexMatrix& ybus, std::span<const VoltageSourceInjection> sources,
               std::span<const CurrentInjection> injections, std::span<const Load> loads,
               std::span<const CurrentInjection> shunts, bool negative);

  SolveOptions opts_;
  Factor pos_;
  Factor neg_;
};

/// Convenience wrapper with a throwaway solver.
NetworkState solve_network(const ComplexMatrix& ybus, std::span<const VoltageSourceInjection> sources,
                           std::span<const CurrentInjection> injections, std::span<const Load> loads,
                           const SolveOptions& opts = {});

struct BreakerSet {
  std::string id;
  BreakerState state = BreakerState::Open;
};
struct LoadStep {
  std::string id;
  Phasor delta_s{};
};
struct SourceFrequency {
  std::string id;
  double f_grid = 60.0;
};
struct SourceUnbalance {
  std::string id;
  Phasor e_neg{};
};
struct SourceVoltage {
  std::string id;
  double e_mag = 1.0;
};

using NetworkEvent = std::variant<BreakerSet, LoadStep, SourceFrequency, SourceUnbalance, SourceVoltage>;

/// Topology plus the mutable element records that events act on.
class Network {
 public:
  Network() = default;
  Network(std::vector<std::string> bus_ids, std::vector<Line> lines, std::vector<Breaker> breakers,
          std::vector<GridSource> sources, std::vector<Load> loads, double f_nom);

  std::size_t bus_count() const { return bus_ids_.size(); }
  const std::vector<std::string>& bus_ids() const { return bus_ids_; }
  std::optional<BusIndex> find_bus(const std::string& id) const;

  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Breaker>& breakers() const { return breakers_; }
  const std::vector<GridSource>& sources() const { return sources_; }
  const std::vector<Load>& loads() const { return loads_; }

  const Breaker* find_breaker(const std::string& id) const;
  double f_nom() const { return f_nom_; }

  /// Admittance matrix, rebuilt after any breaker change.
  const ComplexMatrix& ybus();

  /// Throws UnknownElement when the event names a missing element.
  void apply_event(const NetworkEvent& event, double t);

  bool unbalanced() const;

 private:
  std::vector<std::string> bus_ids_;
  std::vector<Line> lines_;
  std::vector<Breaker> breakers_;
  std::vector<GridSource> sources_;
  std::vector<Load> loads_;
  double f_nom_ = 60.0;
  ComplexMatrix ybus_;
  bool ybus_dirty_ = true;
};

}  // namespace csync
