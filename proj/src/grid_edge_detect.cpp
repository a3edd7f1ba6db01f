#include "csync/grid_edge_detect.hpp"

#include <cmath>
#include <stdexcept>

#include "csync/errors.hpp"

namespace csync {

namespace {

constexpr double kTimeEps = 1e-9;

bool freq_violation(const WindowSample& s, const DetectorConfig& c) { return s.f < c.f_min || s.f > c.f_max; }
bool volt_violation(const WindowSample& s, const DetectorConfig& c) { return s.v < c.v_min || s.v > c.v_max; }

// ROCOF of sample i against the newest earlier sample at least rocof_span
// older. Samples without such a partner never violate.
bool rocof_violation(const MeasurementWindow& w, std::size_t i, const DetectorConfig& c) {
  const WindowSample& s = w[i];
  for (std::size_t j = i; j-- > 0;) {
    const WindowSample& back = w[j];
    if (s.t - back.t >= c.rocof_span - kTimeEps) {
      return std::abs((s.f - back.f) / (s.t - back.t)) > c.rocof_max;
    }
  }
  return false;
}

}  // namespace

bool DetectorConfig::valid() const {
  return f_min < f_max && v_min < v_max && persist > 0.0 && recon_hold > 0.0 && rocof_span > 0.0 &&
         rocof_max > 0.0;
}

MeasurementWindow::MeasurementWindow(std::size_t capacity) : buf_(capacity == 0 ? 1 : capacity) {}

void MeasurementWindow::push(const WindowSample& s) {
  if (size_ > 0 && !(s.t > newest().t)) throw std::invalid_argument("window timestamps must increase");
  if (size_ < buf_.size()) {
    buf_[(head_ + size_) % buf_.size()] = s;
    ++size_;
  } else {
    buf_[head_] = s;
    head_ = (head_ + 1) % buf_.size();
  }
}

void MeasurementWindow::clear() {
  head_ = 0;
  size_ = 0;
}

std::size_t required_window_capacity(const DetectorConfig& cfg, double dt) {
  return static_cast<std::size_t>(std::ceil((cfg.persist + cfg.rocof_span) / dt)) + 2;
}

bool detect_islanding(const MeasurementWindow& w, const DetectorConfig& cfg) {
  if (w.empty() || w.span() < cfg.persist - kTimeEps) {
    throw InsufficientWindow("measurement window spans less than the persistence time");
  }
  const double t_new = w.newest().t;
  for (int c = 0; c < 3; ++c) {
    // Start of the trailing run of violating samples.
    double run_start = -1.0;
    for (std::size_t i = w.size(); i-- > 0;) {
      bool v = false;
      switch (static_cast<IslandCriterion>(c)) {
        case IslandCriterion::Frequency: v = freq_violation(w[i], cfg); break;
        case IslandCriterion::Voltage: v = volt_violation(w[i], cfg); break;
        case IslandCriterion::Rocof: v = rocof_violation(w, i, cfg); break;
      }
      if (!v) break;
      run_start = w[i].t;
    }
    if (run_start >= 0.0 && t_new - run_start >= cfg.persist - kTimeEps) return true;
  }
  return false;
}

IslandingDetector::IslandingDetector(const DetectorConfig& cfg, double dt)
    : cfg_(cfg), window_(required_window_capacity(cfg, dt)) {
  reset();
}

void IslandingDetector::reset() {
  window_.clear();
  for (double& r : run_start_) r = -1.0;
  tripped_ = false;
}

bool IslandingDetector::update(const WindowSample& s) {
  window_.push(s);
  const std::size_t last = window_.size() - 1;
  const bool v[3] = {freq_violation(s, cfg_), volt_violation(s, cfg_), rocof_violation(window_, last, cfg_)};
  tripped_ = false;
  for (int c = 0; c < 3; ++c) {
    if (!v[c]) {
      run_start_[c] = -1.0;
      continue;
    }
    if (run_start_[c] < 0.0) run_start_[c] = s.t;
    if (s.t - run_start_[c] >= cfg_.persist - kTimeEps) tripped_ = true;
  }
  return tripped_;
}

bool reconnection_criteria(const PccMeasurement& m, const DetectorConfig& cfg) {
  const double vu = std::abs(m.v_util);
  const double vm = std::abs(m.v_mg);
  if (vu < cfg.energized_v || vm < cfg.energized_v) return false;
  const double dtheta = wrap_angle(std::arg(m.v_util) - std::arg(m.v_mg));
  return std::abs(vu - vm) <= cfg.recon_dv && std::abs(m.f_util - m.f_mg) <= cfg.recon_df &&
         std::abs(dtheta) <= cfg.recon_dtheta;
}

bool ReconnectionMonitor::update(const PccMeasurement& m) {
  if (!reconnection_criteria(m, cfg_)) {
    holding_ = false;
    ready_ = false;
    return false;
  }
  if (!holding_) {
    holding_ = true;
    since_ = m.t;
  }
  ready_ = m.t - since_ >= cfg_.recon_hold - kTimeEps;
  return ready_;
}

void ReconnectionMonitor::reset() {
  holding_ = false;
  ready_ = false;
  since_ = -1.0;
}

}  // namespace csync
