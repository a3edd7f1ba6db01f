#pragma once

// Passive, communication-free detection of islanding and of reconnection
// readiness from measurements local to one inverter.

#include <cstddef>
#include <vector>

#include "csync/core_types.hpp"

namespace csync {

struct DetectorConfig {
  double f_min = 59.3;  // Hz
  double f_max = 60.5;  // Hz
  double v_min = 0.88;  // pu
  double v_max = 1.10;  // pu
  double rocof_max = 3.0;   // Hz/s
  double rocof_span = 0.02; // s, difference interval for df/dt
  double persist = 0.16;    // s
  double recon_dv = 0.05;   // pu
  double recon_df = 0.1;    // Hz
  double recon_dtheta = rad(10.0);
  double recon_hold = 0.5;  // s
  double energized_v = 0.5; // pu, a side below this is treated as dead

  bool valid() const;
};

struct WindowSample {
  double t = 0.0;
  double f = 0.0;  // Hz
  double v = 0.0;  // pu
};

/// Fixed-capacity ring buffer of control-rate samples, oldest first.
class MeasurementWindow {
 public:
  explicit MeasurementWindow(std::size_t capacity);

  /// Throws std::invalid_argument when t does not increase.
  void push(const WindowSample& s);
  void clear();

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return buf_.size(); }
  bool empty() const { return size_ == 0; }
  const WindowSample& operator[](std::size_t i) const { return buf_[(head_ + i) % buf_.size()]; }
  const WindowSample& newest() const { return (*this)[size_ - 1]; }
  double span() const { return size_ == 0 ? 0.0 : newest().t - (*this)[0].t; }

 private:
  std::vector<WindowSample> buf_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Capacity needed to evaluate every criterion at control step dt.
std::size_t required_window_capacity(const DetectorConfig& cfg, double dt);

enum class IslandCriterion { Frequency = 0, Voltage = 1, Rocof = 2 };

/// True iff a frequency, voltage or ROCOF excursion has held continuously
/// for `persist`. Throws InsufficientWindow when the buffer spans less than
/// `persist`.
bool detect_islanding(const MeasurementWindow& w, const DetectorConfig& cfg);

/// Incremental equivalent of detect_islanding for the control loop: O(1) per
/// sample instead of a window scan.
class IslandingDetector {
 public:
  IslandingDetector(const DetectorConfig& cfg, double dt);

  /// Returns the trip state after this sample.
  bool update(const WindowSample& s);
  void reset();

  bool tripped() const { return tripped_; }
  const MeasurementWindow& window() const { return window_; }

 private:
  DetectorConfig cfg_;
  MeasurementWindow window_;
  double run_start_[3];
  bool tripped_ = false;
};

/// Both sides of the PCC breaker as seen by one inverter.
struct PccMeasurement {
  double t = 0.0;
  Phasor v_util{};
  double f_util = 0.0;  // Hz
  Phasor v_mg{};
  double f_mg = 0.0;    // Hz
};

/// Instantaneous synchro-check criteria (no hold).
bool reconnection_criteria(const PccMeasurement& m, const DetectorConfig& cfg);

/// Ready once the criteria have held continuously for recon_hold. A
/// de-energized side yields false.
class ReconnectionMonitor {
 public:
  explicit ReconnectionMonitor(const DetectorConfig& cfg) : cfg_(cfg) {}

  bool update(const PccMeasurement& m);
  void reset();
  bool ready() const { return ready_; }

 private:
  DetectorConfig cfg_;
  double since_ = -1.0;
  bool holding_ = false;
  bool ready_ = false;
};

}  // namespace csync
