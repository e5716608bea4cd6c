#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <span>

#include <Eigen/Dense>

#include "railpf/geometry.hpp"

namespace railpf {

inline constexpr double kStandardGravity = 9.81;

struct ImuSample {
  double t = 0.0;
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // specific force, sensor frame
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // angular rate, sensor frame
};

struct GnssSample {
  double t = 0.0;
  double p_x = 0.0;
  double p_y = 0.0;
  double v = 0.0;
  double sigma_px = 0.0;
  double sigma_py = 0.0;
  double sigma_v = 0.0;
};

/// The three channels the filters consume.
struct ImuChannels {
  double a_x = 0.0;
  double a_y = 0.0;
  double omega_z = 0.0;
};

enum class BiasAxis : std::size_t { AccelX = 0, AccelY = 1, GyroZ = 2 };

/// Moving-average bias estimate for a_x, a_y and omega_z. Each axis keeps the
/// last `window` accepted stand-still readings; the estimate is their mean
/// (zero before the first reading).
class BiasState {
 public:
  explicit BiasState(std::size_t window = 10);

  std::size_t window() const { return window_; }
  std::size_t count(BiasAxis axis) const { return buffers_[index(axis)].size(); }
  double estimate(BiasAxis axis) const;
  ImuChannels estimates() const;

  /// Pushes a new reading, evicting the oldest once the window is full.
  void update(BiasAxis axis, double raw);
  /// Overwrites the newest reading; pushes if the buffer is empty.
  void revise_latest(BiasAxis axis, double raw);

 private:
  static std::size_t index(BiasAxis axis) { return static_cast<std::size_t>(axis); }

  std::size_t window_;
  std::array<std::deque<double>, 3> buffers_;
};

BiasState update_bias(BiasState state, BiasAxis axis, double raw);

/// Subtracts the current estimate from each channel.
ImuChannels apply_bias(const BiasState& state, const ImuChannels& raw);

struct ZvuConfig {
  std::size_t window_samples = 50;
  double accel_variance_threshold = 0.01;  // m^2/s^4, on |a|
  double rate_threshold = 0.005;           // rad/s, on mean |omega|

  /// One second of samples at the given rate.
  static ZvuConfig for_rate(double imu_rate_hz);
  void validate() const;
};

/// Removes gravity using the track orientation: a - R^-1(o) * [0, 0, g].
Eigen::Vector3d compensate_gravity(const ImuSample& sample, const Orientation& o, double g);

/// True when the sample variance of |a| and the mean of |omega| over the
/// newest cfg.window_samples samples are both below threshold. Throws
/// Error{WindowTooShort} when fewer samples are given.
bool detect_standstill(std::span<const ImuSample> window, const ZvuConfig& cfg);

/// Every intermediate of one preprocessing step, in pipeline order.
struct ProcessedImu {
  Eigen::Vector3d compensated = Eigen::Vector3d::Zero();
  ImuChannels corrected;
  ImuChannels filter_input;
  bool standstill = false;
  bool bias_updated = false;
};

/// Stateful IMU preprocessing shared by both filters: gravity compensation,
/// stand-still detection, bias estimation and correction, and zeroing of the
/// filter inputs during stand-still.
///
/// A stand-still phase feeds one moving-average entry per axis: the running
/// mean of the phase's readings. A reading is admitted only once the
/// detector has fired for a full window after it, so samples taken while the
/// train is starting or stopping stay out of the estimate.
class ImuPreprocessor {
 public:
  ImuPreprocessor(ZvuConfig zvu, std::size_t bias_window, double g);

  ProcessedImu process(const ImuSample& raw, const Orientation& o);

  const BiasState& bias() const { return bias_; }
  const ZvuConfig& zvu() const { return zvu_; }
  std::size_t standstill_phases() const { return phases_; }

 private:
  ZvuConfig zvu_;
  double g_;
  BiasState bias_;
  std::deque<ImuSample> window_;
  std::deque<ImuChannels> compensated_;
  std::size_t standstill_run_ = 0;
  std::size_t phase_samples_ = 0;
  std::size_t phases_ = 0;
  ImuChannels phase_sum_;
};

}  // namespace railpf
