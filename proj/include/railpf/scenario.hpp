#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "railpf/imu.hpp"
#include "railpf/track_map.hpp"

namespace railpf {

enum class SegmentKind { Straight, Arc, Clothoid };
enum class Turn { Left, Right };

/// One piece of a synthetic track. A clothoid ramps curvature linearly from
/// the end of the previous segment to the start of the next one.
struct TrackSegment {
  SegmentKind kind = SegmentKind::Straight;
  double length = 0.0;  // m
  double radius = 0.0;  // m, arcs only
  Turn turn = Turn::Left;
  double grade = 0.0;   // rise per horizontal metre
};

struct TrackSpec {
  std::vector<TrackSegment> segments;
  double start_x = 0.0;
  double start_y = 0.0;
  double start_z = 0.0;
  double start_heading = 0.0;

  double total_length() const;
  /// Throws Error{InvalidSpec} naming the offending field, e.g.
  /// "segment.2.radius".
  void validate() const;
};

enum class PhaseKind { Accelerate, Cruise, Brake, Stop };

struct ProfilePhase {
  PhaseKind kind = PhaseKind::Stop;
  double target_speed = 0.0;  // accelerate / brake
  double rate = 0.0;          // m/s^2, positive, accelerate / brake
  double distance = 0.0;      // cruise
  double duration = 0.0;      // stop
};

struct VelocityProfile {
  double start_d = 0.0;  // offset from the first map point
  std::vector<ProfilePhase> phases;

  void validate() const;
};

struct OutageWindow {
  double start = 0.0;
  double end = std::numeric_limits<double>::infinity();

  bool contains(double t) const { return t >= start && t < end; }
};

/// Sensor error model: measured = true + bias + drift + noise per axis, plus
/// speed-dependent vertical vibration from track irregularities.
struct SensorSpec {
  double imu_rate_hz = 50.0;
  Eigen::Vector3d accel_noise = Eigen::Vector3d::Constant(0.005 * kStandardGravity);
  Eigen::Vector3d gyro_noise = Eigen::Vector3d::Constant(0.05 * 3.14159265358979323846 / 180.0);
  Eigen::Vector3d accel_bias = Eigen::Vector3d(0.02, -0.01, 0.0);
  Eigen::Vector3d gyro_bias = Eigen::Vector3d(0.0, 0.0, 2e-4);
  // Per-sample random-walk step of the bias instability.
  double accel_drift_sigma = 5e-6;
  double gyro_drift_sigma = 1e-7;
  // Vertical vibration sigma once rolling faster than vibration_speed.
  double vibration_sigma = 0.3;
  double vibration_speed = 0.1;
  double gnss_rate_hz = 1.0;
  double sigma_px = 2.04;
  double sigma_py = 3.45;
  double sigma_v = 0.35;
  std::vector<OutageWindow> outages;
  double g = kStandardGravity;

  void validate() const;
  bool in_outage(double t) const;
};

struct TruthState {
  double t = 0.0;
  double d = 0.0;
  double v = 0.0;
  double a = 0.0;  // mean along-track acceleration over the next sample interval
  double p_x = 0.0;
  double p_y = 0.0;
  double p_z = 0.0;
  double kappa = 0.0;
  Orientation orientation;
};

struct GeneratedTrack {
  std::vector<RawTrackPoint> raw;
  TrackMap map;
};

GeneratedTrack generate_track(const TrackSpec& spec, double spacing,
                              const BuildOptions& options = {});

/// Samples the profile every T seconds. Piecewise-constant acceleration is
/// integrated exactly; plane states come from the map. Throws
/// Error{ProfileMismatch} when the profile runs past the end of the map.
std::vector<TruthState> generate_truth(const TrackMap& map, const VelocityProfile& profile,
                                       double T);

struct SensorStreams {
  std::vector<ImuSample> imu;
  std::vector<GnssSample> gnss;
  // True additive bias (bias + drift) on a_x, a_y, omega_z at every IMU sample.
  std::vector<ImuChannels> bias;
};

SensorStreams synthesize_sensors(const std::vector<TruthState>& truth, const SensorSpec& spec,
                                 std::uint64_t seed);

/// Everything needed to regenerate a scenario from a seed.
struct ScenarioSpec {
  std::string name;
  TrackSpec track;
  double spacing = 10.0;
  BuildOptions build;
  VelocityProfile profile;
  SensorSpec sensors;
};

struct Scenario {
  ScenarioSpec spec;
  std::uint64_t seed = 0;
  GeneratedTrack track;
  std::vector<TruthState> truth;
  SensorStreams sensors;
};

Scenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed);

/// The three built-in experiments: "mixed-outages", "straight-indefinite"
/// and "curvy-indefinite".
std::vector<ScenarioSpec> preset_specs();
std::vector<std::string> preset_names();
/// Throws Error{InvalidSpec} listing the valid names.
ScenarioSpec preset_spec(const std::string& name);
std::vector<Scenario> preset_scenarios(std::uint64_t seed);

}  // namespace railpf
