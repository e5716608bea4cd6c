#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "railpf/ekf.hpp"
#include "railpf/particle_filter.hpp"

namespace railpf {

struct PfRow {
  double t = 0.0;
  double d = 0.0;
  double v = 0.0;
  double p_x = 0.0;
  double p_y = 0.0;
  double sigma_d = 0.0;
  double n_eff = 0.0;
  bool resampled = false;
  bool zvu = false;
};

struct PfRun {
  std::vector<PfRow> rows;
  std::size_t reinitializations = 0;
  std::size_t gnss_fixes = 0;
  Eigen::Vector2d gnss_residual_mean = Eigen::Vector2d::Zero();
  ImuChannels final_bias;
  std::size_t standstill_phases = 0;
};

struct EkfRow {
  double t = 0.0;
  double d = 0.0;
  double v = 0.0;
  double p_x = 0.0;
  double p_y = 0.0;
  double sigma_d = 0.0;
  bool zvu = false;
  double trace_P = 0.0;
};

struct EkfRun {
  std::vector<EkfRow> rows;
  ImuChannels final_bias;
  std::size_t standstill_phases = 0;
};

/// Pairs each IMU sample with the newest GNSS fix whose timestamp is not
/// later than the sample (1e-9 s slack); each fix is used at most once.
std::vector<std::optional<GnssSample>> align_gnss(std::span<const ImuSample> imu,
                                                  std::span<const GnssSample> gnss);

/// Runs the particle filter over a whole log. Without a prior the filter is
/// initialized from the first GNSS fix and IMU samples before it are skipped.
/// Throws Error{InvalidConfig} when neither a prior nor any fix exists.
PfRun run_particle_filter(const TrackMap& map, std::span<const ImuSample> imu,
                          std::span<const GnssSample> gnss, const FilterConfig& cfg,
                          std::uint64_t seed, const std::optional<Prior>& prior = std::nullopt);

/// Same for the EKF baseline. A Gaussian prior places the state at the
/// mapped position of d_mean; uniform priors are rejected.
EkfRun run_ekf(const TrackMap& map, std::span<const ImuSample> imu, std::span<const GnssSample> gnss,
               const EkfConfig& cfg, const std::optional<Prior>& prior = std::nullopt);

extern const std::vector<std::string> kPfEstimateColumns;
extern const std::vector<std::string> kEkfEstimateColumns;

std::string estimates_csv(const PfRun& run);
std::string estimates_csv(const EkfRun& run);

}  // namespace railpf
