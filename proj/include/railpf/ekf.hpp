#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "railpf/imu.hpp"
#include "railpf/track_map.hpp"

namespace railpf {

/// CTRA state (p_x, p_y, theta_z, v) with covariance.
struct EkfState {
  Eigen::Vector4d x = Eigen::Vector4d::Zero();
  Eigen::Matrix4d P = Eigen::Matrix4d::Identity();

  double p_x() const { return x(0); }
  double p_y() const { return x(1); }
  double heading() const { return x(2); }
  double v() const { return x(3); }
};

/// Defaults are the map-matching EKF row of the reference parameter table:
/// sigma_ax = 0.005 g, sigma_wz = 0.05 deg/s, GNSS 2.04 m / 3.45 m /
/// 0.35 m/s, sigma_map = 0.01 m.
struct EkfConfig {
  double T = 0.02;
  double sigma_ax = 0.005 * kStandardGravity;
  double sigma_wz = 0.05 * 3.14159265358979323846 / 180.0;
  double sigma_px = 2.04;
  double sigma_py = 3.45;
  double sigma_v = 0.35;
  double sigma_map = 0.01;
  double gate = 50.0;
  // false restricts map matching to steps that carry a GNSS fix.
  bool map_match_every_step = true;
  bool gnss_sigma_from_receiver = true;
  double g = kStandardGravity;
  ZvuConfig zvu;
  std::size_t bias_window = 10;

  void validate() const;
};

/// Below this |omega_z T| the motion integrals are summed as a power series,
/// which also covers the straight-line limit.
inline constexpr double kCtraSeriesThreshold = 1e-2;

/// Symmetrizes P and lifts eigenvalues below -1e-9 to zero.
Eigen::Matrix4d make_psd(const Eigen::Matrix4d& P);

EkfState ekf_predict(const EkfState& state, double a_x, double omega_z, double T,
                     const EkfConfig& cfg);

/// Linear update on (p_x, p_y, v) using the sample's sigmas when present.
EkfState ekf_update_gnss(const EkfState& state, const GnssSample& gnss, const EkfConfig& cfg);

/// Across-track pseudo-measurement: the projected offset onto the nearest
/// map segment is observed as zero with noise sigma_map. Throws
/// Error{NoNearbyTrack} beyond `gate` metres.
EkfState ekf_map_match(const EkfState& state, const TrackMap& map, double sigma_map,
                       double gate = 50.0);

struct EkfStepResult {
  EkfState state;
  double d = 0.0;        // along-track coordinate of the projected position
  double sigma_d = 0.0;  // 1-sigma along the local tangent
  double trace_P = 0.0;
  bool zvu = false;
  bool map_matched = false;
};

/// Sequential EKF-with-map-matching session; shares the IMU preprocessing
/// of the particle filter, with orientation taken at the projected position.
class EkfSession {
 public:
  EkfSession(const TrackMap& map, EkfConfig cfg);

  void initialize(const GnssSample& fix);
  void initialize(const EkfState& state);
  bool initialized() const { return initialized_; }

  EkfStepResult step(const ImuSample& imu, const std::optional<GnssSample>& gnss);

  const EkfState& state() const { return state_; }
  const ImuPreprocessor& imu() const { return imu_; }

 private:
  const TrackMap& map_;
  EkfConfig cfg_;
  ImuPreprocessor imu_;
  EkfState state_;
  bool initialized_ = false;
  std::optional<double> last_t_;
  std::size_t segment_hint_ = 0;
};

}  // namespace railpf
