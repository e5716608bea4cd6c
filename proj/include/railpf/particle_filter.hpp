#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "railpf/imu.hpp"
#include "railpf/track_map.hpp"

namespace railpf {

struct FilterState {
  double d = 0.0;  // m along track
  double v = 0.0;  // m/s
};

/// Weighted particle population plus the random stream that drives it.
struct ParticleSet {
  std::vector<FilterState> states;
  std::vector<double> weights;
  std::mt19937_64 rng;
  std::uint64_t seed = 0;

  std::size_t size() const { return states.size(); }
};

enum class Estimator { WeightedMean, MaxWeight };

/// Filter parameters. Defaults are the particle-filter row of the reference
/// parameter table: sigma_ax = sigma_ay = 0.01 g, sigma_wz = 0.2 deg/s,
/// sigma_bias = 5e-6 m/s^2, GNSS 2.45 m / 4.13 m / 0.4 m/s, N = 1000.
struct FilterConfig {
  std::size_t n_particles = 1000;
  std::size_t n_threshold = 500;
  double T = 0.02;
  // Acceleration-input noise of the motion model; the per-step diffusion
  // variance is sigma_u^2 + sigma_bias^2.
  double sigma_u = 0.01 * kStandardGravity;
  double sigma_ax = 0.01 * kStandardGravity;
  double sigma_ay = 0.01 * kStandardGravity;
  double sigma_wz = 0.2 * 3.14159265358979323846 / 180.0;
  double sigma_bias = 5e-6;
  double sigma_px = 2.45;
  double sigma_py = 4.13;
  double sigma_v = 0.4;
  double g = kStandardGravity;
  // Use the receiver-reported GNSS sigmas when a sample carries them.
  bool gnss_sigma_from_receiver = true;
  bool curve_resample = false;
  double curve_threshold = 1.0 / 2000.0;
  Estimator estimator = Estimator::WeightedMean;
  ZvuConfig zvu;
  std::size_t bias_window = 10;

  void validate() const;
};

struct GaussianPrior {
  double d_mean = 0.0;
  double d_sigma = 0.0;
  double v_mean = 0.0;
  double v_sigma = 0.0;
};

struct UniformPrior {
  double d_min = 0.0;
  double d_max = 0.0;
  double v_mean = 0.0;
  double v_sigma = 0.0;
};

using Prior = std::variant<GaussianPrior, UniformPrior>;

/// Measurement vector of one step: IMU turn rate and lateral acceleration
/// (bias-corrected), plus GNSS when a fix exists.
struct Measurement {
  double omega_z = 0.0;
  double a_y = 0.0;
  std::optional<GnssSample> gnss;
};

struct PredictedMeasurement {
  double p_x = 0.0;
  double p_y = 0.0;
  double v = 0.0;
  double omega_z = 0.0;
  double a_y = 0.0;
};

struct PositionEstimate {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double d = 0.0;
  double v = 0.0;
  double sigma_d = 0.0;
  double sigma_v = 0.0;
  // 3-sigma interval along the local track tangent.
  Eigen::Vector2d tangent = Eigen::Vector2d::UnitX();
  double along_3sigma = 0.0;
};

/// Yaw rate of a body moving at v along a path of curvature kappa.
inline double turn_rate_from_curvature(double v, double kappa) { return v * kappa; }

/// Centripetal acceleration of a body moving at v along curvature kappa.
inline double lateral_accel_from_curvature(double v, double kappa) { return v * v * kappa; }

/// Draws N particles from the prior with weights 1/N. Throws
/// Error{PriorOutsideMap} when the prior support misses the map.
ParticleSet initialize(const FilterConfig& cfg, const Prior& prior, const TrackMap& map,
                       std::uint64_t seed);

/// Constant-acceleration diffusion:
///   d += T v + T^2/2 (u + nu),  v += T (u + nu),  nu ~ N(0, sigma_u^2 + sigma_bias^2).
/// A non-positive dt falls back to cfg.T.
void predict(ParticleSet& set, double u, const FilterConfig& cfg, double dt = 0.0);

/// [p_x(d), p_y(d), v, v kappa(d), v^2 kappa(d)] from the map. Throws
/// OutOfMapRangeError.
PredictedMeasurement predict_measurement(const FilterState& state, const TrackMap& map);

/// Multiplies each weight by the Gaussian likelihood of z and normalizes.
/// Off-map particles get weight zero. Throws Error{AllWeightsZero} when no
/// particle survives; the set is then left unnormalized.
void weight(ParticleSet& set, const Measurement& z, const TrackMap& map, const FilterConfig& cfg);

/// 1 / sum(w^2).
double effective_sample_size(std::span<const double> weights);

/// Systematic resampling offspring: index of the parent of each of the N
/// children, given the rotor offset u0 in [0, 1).
std::vector<std::size_t> systematic_parents(std::span<const double> weights, double u0);

/// Systematic resampling with a single draw from the set's stream; weights
/// reset to 1/N.
void resample(ParticleSet& set);

/// Weighted-mean or max-weight state with its spread. Throws
/// Error{DegenerateSet} for an empty set or all-zero weights.
PositionEstimate estimate(const ParticleSet& set, const TrackMap& map, const FilterConfig& cfg);

struct StepResult {
  PositionEstimate estimate;
  double n_eff = 0.0;
  bool resampled = false;
  bool zvu = false;
  bool reinitialized = false;
  ProcessedImu imu;
};

/// One filter session: a sequential state machine over time-ordered IMU
/// samples with optional GNSS fixes.
class ParticleFilter {
 public:
  ParticleFilter(const TrackMap& map, FilterConfig cfg, std::uint64_t seed);

  void initialize(const Prior& prior);
  bool initialized() const { return initialized_; }

  StepResult step(const ImuSample& imu, const std::optional<GnssSample>& gnss);

  const ParticleSet& particles() const { return set_; }
  const FilterConfig& config() const { return cfg_; }
  const ImuPreprocessor& imu() const { return imu_; }
  std::size_t reinitializations() const { return reinitializations_; }

  /// Mean GNSS-minus-estimate position residual over all fixes seen.
  Eigen::Vector2d gnss_residual_mean() const;
  std::size_t gnss_fixes() const { return gnss_fixes_; }

 private:
  Prior prior_from_fix(const GnssSample& fix) const;

  const TrackMap& map_;
  FilterConfig cfg_;
  std::uint64_t seed_;
  ParticleSet set_;
  ImuPreprocessor imu_;
  bool initialized_ = false;
  std::optional<double> last_t_;
  double last_d_ = 0.0;
  bool on_curve_ = false;
  std::size_t reinitializations_ = 0;
  Eigen::Vector2d residual_sum_ = Eigen::Vector2d::Zero();
  std::size_t gnss_fixes_ = 0;
};

}  // namespace railpf
