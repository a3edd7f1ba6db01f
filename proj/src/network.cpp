#include "csync/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csync/errors.hpp"

namespace csync {

Phasor GridSource::emf(double t, double f_nom) const {
  return e * std::polar(1.0, kTwoPi * (f_grid - f_nom) * (t - t_ref));
}

Phasor GridSource::emf_neg(double t, double f_nom) const {
  return e_neg * std::polar(1.0, kTwoPi * (f_grid - f_nom) * (t - t_ref));
}

Load Load::from_impedance(std::string id, BusIndex bus, Phasor z) {
  return {std::move(id), bus, LoadKind::ConstantImpedance, std::conj(1.0 / z)};
}

bool line_in_service(const Line& line, std::span<const Breaker> breakers) {
  for (const auto& br : breakers) {
    const bool same_pair = (br.from == line.from && br.to == line.to) || (br.from == line.to && br.to == line.from);
    if (same_pair && !br.closed()) return false;
  }
  return true;
}

ComplexMatrix build_ybus(std::size_t bus_count, std::span<const Line> lines, std::span<const Breaker> breakers) {
  ComplexMatrix y = ComplexMatrix::Zero(static_cast<Eigen::Index>(bus_count), static_cast<Eigen::Index>(bus_count));
  for (const auto& line : lines) {
    if (!line_in_service(line, breakers)) continue;
    const Phasor adm = 1.0 / line.impedance();
    const auto f = static_cast<Eigen::Index>(line.from);
    const auto t = static_cast<Eigen::Index>(line.to);
    y(f, f) += adm;
    y(t, t) += adm;
    y(f, t) -= adm;
    y(t, f) -= adm;
  }
  return y;
}

Phasor branch_power(Phasor v_from, Phasor v_to, Phasor z) { return v_from * std::conj((v_from - v_to) / z); }

std::vector<std::vector<BusIndex>> find_islands(const ComplexMatrix& ybus) {
  const auto n = static_cast<std::size_t>(ybus.rows());
  std::vector<int> label(n, -1);
  std::vector<std::vector<BusIndex>> islands;
  std::vector<BusIndex> stack;
  for (BusIndex root = 0; root < n; ++root) {
    if (label[root] >= 0) continue;
    const int id = static_cast<int>(islands.size());
    islands.emplace_back();
    label[root] = id;
    stack.push_back(root);
    while (!stack.empty()) {
      const BusIndex k = stack.back();
      stack.pop_back();
      islands[static_cast<std::size_t>(id)].push_back(k);
      for (BusIndex j = 0; j < n; ++j) {
        if (label[j] < 0 && ybus(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) != Phasor{}) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
    std::sort(islands.back().begin(), islands.back().end());
  }
  return islands;
}

void NetworkSolver::prepare(Factor& f, const ComplexMatrix& ybus, std::span<const VoltageSourceInjection> sources,
                            std::span<const CurrentInjection> injections, std::span<const Load> loads,
                            std::span<const CurrentInjection> shunts, bool negative) {
  std::vector<double> sig;
  sig.reserve(static_cast<std::size_t>(ybus.size()) * 2 + 4 * (sources.size() + loads.size() + shunts.size()) +
              injections.size() + 4);
  for (Eigen::Index k = 0; k < ybus.size(); ++k) {
    sig.push_back(ybus.data()[k].real());
    sig.push_back(ybus.data()[k].imag());
  }
  sig.push_back(-1.0);
  for (const auto& s : sources) {
    sig.insert(sig.end(), {static_cast<double>(s.bus), s.z.real(), s.z.imag()});
  }
  sig.push_back(-2.0);
  for (const auto& inj : injections) sig.push_back(static_cast<double>(inj.bus));
  sig.push_back(-3.0);
  for (const auto& ld : loads) {
    const bool z_kind = ld.kind == LoadKind::ConstantImpedance;
    sig.insert(sig.end(), {static_cast<double>(ld.bus), z_kind ? 1.0 : 0.0, z_kind ? ld.s_nom.real() : 0.0,
                           z_kind ? ld.s_nom.imag() : 0.0, ld.s_nom != Phasor{} ? 1.0 : 0.0});
  }
  sig.push_back(-4.0);
  for (const auto& sh : shunts) sig.insert(sig.end(), {static_cast<double>(sh.bus), sh.i.real(), sh.i.imag()});

  if (f.valid && sig == f.signature) return;

  const auto n = static_cast<std::size_t>(ybus.rows());
  ComplexMatrix m = ybus;
  std::vector<char> has_vsrc(n, 0), has_isrc(n, 0), has_shunt(n, 0), has_load(n, 0);
  for (const auto& s : sources) {
    m(static_cast<Eigen::Index>(s.bus), static_cast<Eigen::Index>(s.bus)) += 1.0 / s.z;
    has_vsrc[s.bus] = 1;
    has_shunt[s.bus] = 1;
  }
  for (const auto& inj : injections) has_isrc[inj.bus] = 1;
  for (const auto& ld : loads) {
    if (ld.s_nom == Phasor{}) continue;
    has_load[ld.bus] = 1;
    if (ld.kind == LoadKind::ConstantImpedance) {
      m(static_cast<Eigen::Index>(ld.bus), static_cast<Eigen::Index>(ld.bus)) += ld.admittance();
      has_shunt[ld.bus] = 1;
    }
  }
  for (const auto& sh : shunts) {
    m(static_cast<Eigen::Index>(sh.bus), static_cast<Eigen::Index>(sh.bus)) += sh.i;
    if (sh.i != Phasor{}) has_shunt[sh.bus] = 1;
  }

  f.energized.assign(n, 0);
  f.unsourced.clear();
  for (const auto& island : find_islands(ybus)) {
    bool vsrc = false, isrc = false, shunt = false, load = false;
    for (BusIndex k : island) {
      vsrc |= has_vsrc[k] != 0;
      isrc |= has_isrc[k] != 0;
      shunt |= has_shunt[k] != 0;
      load |= has_load[k] != 0;
    }
    // A negative-sequence island is driven only by its voltage sources; the
    // passive shunts alone keep it non-singular.
    const bool energized = negative ? shunt : (vsrc || (isrc && shunt));
    if (energized) {
      for (BusIndex k : island) f.energized[k] = 1;
    } else {
      for (BusIndex k : island) {
        const auto idx = static_cast<Eigen::Index>(k);
        m.row(idx).setZero();
        m.col(idx).setZero();
        m(idx, idx) = 1.0;
      }
      if (!negative && (load || isrc)) f.unsourced.push_back(island);
    }
  }
  f.lu.compute(m);
  f.signature = std::move(sig);
  f.valid = true;
}

NetworkState NetworkSolver::solve(const ComplexMatrix& ybus, std::span<const VoltageSourceInjection> sources,
                                  std::span<const CurrentInjection> injections, std::span<const Load> loads,
                                  std::span<const Line> lines, std::span<const Breaker> breakers,
                                  const std::vector<Phasor>* warm_start) {
  prepare(pos_, ybus, sources, injections, loads, {}, false);
  const auto n = static_cast<Eigen::Index>(ybus.rows());

  Eigen::VectorXcd fixed_rhs = Eigen::VectorXcd::Zero(n);
  for (const auto& s : sources) fixed_rhs(static_cast<Eigen::Index>(s.bus)) += s.e / s.z;
  for (const auto& inj : injections) fixed_rhs(static_cast<Eigen::Index>(inj.bus)) += inj.i;

  const bool any_cp = std::any_of(loads.begin(), loads.end(), [](const Load& l) {
    return l.kind == LoadKind::ConstantPower && l.s_nom != Phasor{};
  });

  const double vmin2 = opts_.cp_min_voltage * opts_.cp_min_voltage;
  auto cp_current = [&](const Load& ld, Phasor v) -> Phasor {
    const double mag2 = std::norm(v);
    if (mag2 < vmin2) return std::conj(ld.s_nom) * v / vmin2;
    return std::conj(ld.s_nom / v);
  };
  auto mask = [&](Eigen::VectorXcd& rhs) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!pos_.energized[static_cast<std::size_t>(k)]) rhs(k) = 0.0;
    }
  };

  NetworkState st;
  st.load_currents.assign(loads.size(), Phasor{});
  Eigen::VectorXcd v(n);
  if (!any_cp) {
    Eigen::VectorXcd rhs = fixed_rhs;
    mask(rhs);
    v = pos_.lu.solve(rhs);
    st.iterations = 1;
  } else {
    if (warm_start != nullptr && warm_start->size() == static_cast<std::size_t>(n)) {
      for (Eigen::Index k = 0; k < n; ++k) v(k) = (*warm_start)[static_cast<std::size_t>(k)];
    } else {
      Eigen::VectorXcd rhs = fixed_rhs;
      mask(rhs);
      v = pos_.lu.solve(rhs);
    }
    auto rhs_for = [&](const Eigen::VectorXcd& vv, std::vector<Phasor>& cur) {
      Eigen::VectorXcd rhs = fixed_rhs;
      for (std::size_t j = 0; j < loads.size(); ++j) {
        const auto& ld = loads[j];
        if (ld.kind != LoadKind::ConstantPower || ld.s_nom == Phasor{}) continue;
        cur[j] = cp_current(ld, vv(static_cast<Eigen::Index>(ld.bus)));
        rhs(static_cast<Eigen::Index>(ld.bus)) -= cur[j];
      }
      mask(rhs);
      return rhs;
    };
    std::vector<Phasor> cur(loads.size());
    bool converged = false;
    int it = 0;
    while (it < opts_.max_iters) {
      ++it;
      const Eigen::VectorXcd target = pos_.lu.solve(rhs_for(v, cur));
      const Eigen::VectorXcd next = v + opts_.damping * (target - v);
      const double change = (next - v).cwiseAbs().maxCoeff();
      v = next;
      if (change <= opts_.tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "constant-power load iteration did not converge within " << opts_.max_iters << " iterations";
      throw NonConvergence(msg.str());
    }
    // Final undamped solve: nodal equations hold exactly for the load
    // currents that are reported.
    v = pos_.lu.solve(rhs_for(v, st.load_currents));
    st.iterations = it;
  }

  st.bus_voltages.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) st.bus_voltages[static_cast<std::size_t>(k)] = v(k);

  for (std::size_t j = 0; j < loads.size(); ++j) {
    const auto& ld = loads[j];
    if (ld.kind == LoadKind::ConstantImpedance) st.load_currents[j] = ld.admittance() * st.bus_voltages[ld.bus];
  }
  st.source_currents.reserve(sources.size());
  for (const auto& s : sources) {
    st.source_currents.push_back(pos_.energized[s.bus] ? (s.e - st.bus_voltages[s.bus]) / s.z : Phasor{});
  }

  // Nodal residual: Y V + shunt currents = injected currents.
  Eigen::VectorXcd mismatch = ybus * v;
  for (std::size_t j = 0; j < sources.size(); ++j) mismatch(static_cast<Eigen::Index>(sources[j].bus)) -= st.source_currents[j];
  for (const auto& inj : injections) {
    if (pos_.energized[inj.bus]) mismatch(static_cast<Eigen::Index>(inj.bus)) -= inj.i;
  }
  for (std::size_t j = 0; j < loads.size(); ++j) mismatch(static_cast<Eigen::Index>(loads[j].bus)) += st.load_currents[j];
  st.nodal_residual = n > 0 ? mismatch.cwiseAbs().maxCoeff() : 0.0;

  Phasor s_sources{}, s_loads{}, s_losses{};
  for (std::size_t j = 0; j < sources.size(); ++j) s_sources += st.bus_voltages[sources[j].bus] * std::conj(st.source_currents[j]);
  for (const auto& inj : injections) {
    if (pos_.energized[inj.bus]) s_sources += st.bus_voltages[inj.bus] * std::conj(inj.i);
  }
  for (std::size_t j = 0; j < loads.size(); ++j) s_loads += st.bus_voltages[loads[j].bus] * std::conj(st.load_currents[j]);

  st.branch_currents.assign(lines.size(), Phasor{});
  if (!lines.empty()) {
    for (std::size_t j = 0; j < lines.size(); ++j) {
      const auto& ln = lines[j];
      if (!line_in_service(ln, breakers)) continue;
      const Phasor i = (st.bus_voltages[ln.from] - st.bus_voltages[ln.to]) / ln.impedance();
      st.branch_currents[j] = i;
      s_losses += std::norm(i) * ln.impedance();
    }
  } else {
    s_losses = v.dot(ybus * v);  // conj(v)^T Y v
    s_losses = std::conj(s_losses);
  }
  st.balance_residual = std::abs(s_sources - s_loads - s_losses);
  st.unsourced_islands = pos_.unsourced;
  return st;
}

std::vector<Phasor> NetworkSolver::solve_negative(const ComplexMatrix& ybus,
                                                  std::span<const VoltageSourceInjection> sources,
                                                  std::span<const CurrentInjection> shunts) {
  prepare(neg_, ybus, sources, {}, {}, shunts, true);
  const auto n = static_cast<Eigen::Index>(ybus.rows());
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  for (const auto& s : sources) rhs(static_cast<Eigen::Index>(s.bus)) += s.e / s.z;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!neg_.energized[static_cast<std::size_t>(k)]) rhs(k) = 0.0;
  }
  const Eigen::VectorXcd v = neg_.lu.solve(rhs);
  return {v.data(), v.data() + v.size()};
}

NetworkState solve_network(const ComplexMatrix& ybus, std::span<const VoltageSourceInjection> sources,
                           std::span<const CurrentInjection> injections, std::span<const Load> loads,
                           const SolveOptions& opts) {
  NetworkSolver solver(opts);
  return solver.solve(ybus, sources, injections, loads, {}, {}, nullptr);
}

Network::Network(std::vector<std::string> bus_ids, std::vector<Line> lines, std::vector<Breaker> breakers,
                 std::vector<GridSource> sources, std::vector<Load> loads, double f_nom)
    : bus_ids_(std::move(bus_ids)),
      lines_(std::move(lines)),
      breakers_(std::move(breakers)),
      sources_(std::move(sources)),
      loads_(std::move(loads)),
      f_nom_(f_nom) {}

std::optional<BusIndex> Network::find_bus(const std::string& id) const {
  const auto it = std::find(bus_ids_.begin(), bus_ids_.end(), id);
  if (it == bus_ids_.end()) return std::nullopt;
  return static_cast<BusIndex>(it - bus_ids_.begin());
}

const Breaker* Network::find_breaker(const std::string& id) const {
  for (const auto& br : breakers_) {
    if (br.id == id) return &br;
  }
  return nullptr;
}

const ComplexMatrix& Network::ybus() {
  if (ybus_dirty_) {
    ybus_ = build_ybus(bus_ids_.size(), lines_, breakers_);
    ybus_dirty_ = false;
  }
  return ybus_;
}

bool Network::unbalanced() const {
  return std::any_of(sources_.begin(), sources_.end(), [](const GridSource& s) { return s.e_neg != Phasor{}; });
}

namespace {

template <typename T>
T& find_or_throw(std::vector<T>& items, const std::string& id, const char* kind) {
  for (auto& item : items) {
    if (item.id == id) return item;
  }
  throw UnknownElement(std::string("unknown ") + kind + " '" + id + "'");
}

}  // namespace

void Network::apply_event(const NetworkEvent& event, double t) {
  std::visit(
      [&](const auto& ev) {
        using E = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<E, BreakerSet>) {
          auto& br = find_or_throw(breakers_, ev.id, "breaker");
          if (br.state != ev.state) {
            br.state = ev.state;
            ybus_dirty_ = true;
          }
        } else if constexpr (std::is_same_v<E, LoadStep>) {
          find_or_throw(loads_, ev.id, "load").s_nom += ev.delta_s;
        } else if constexpr (std::is_same_v<E, SourceFrequency>) {
          auto& src = find_or_throw(sources_, ev.id, "grid source");
          src.e = src.emf(t, f_nom_);
          src.e_neg = src.emf_neg(t, f_nom_);
          src.t_ref = t;
          src.f_grid = ev.f_grid;
        } else if constexpr (std::is_same_v<E, SourceUnbalance>) {
          auto& src = find_or_throw(sources_, ev.id, "grid source");
          src.e = src.emf(t, f_nom_);
          src.t_ref = t;
          src.e_neg = ev.e_neg;
        } else if constexpr (std::is_same_v<E, SourceVoltage>) {
          auto& src = find_or_throw(sources_, ev.id, "grid source");
          const Phasor now = src.emf(t, f_nom_);
          const double ang = std::abs(now) > 0.0 ? std::arg(now) : std::arg(src.e);
          src.e_neg = src.emf_neg(t, f_nom_);
          src.e = std::polar(ev.e_mag, ang);
          src.t_ref = t;
        }
      },
      event);
}

}  // namespace csync
