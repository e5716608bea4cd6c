#include "railpf/pipeline.hpp"

#include <numbers>

#include "railpf/error.hpp"
#include "railpf/io.hpp"

namespace railpf {

std::vector<std::optional<GnssSample>> align_gnss(std::span<const ImuSample> imu,
                                                  std::span<const GnssSample> gnss) {
  std::vector<std::optional<GnssSample>> out(imu.size());
  std::size_t j = 0;
  for (std::size_t k = 0; k < imu.size(); ++k) {
    while (j < gnss.size() && gnss[j].t <= imu[k].t + 1e-9) out[k] = gnss[j++];
  }
  return out;
}

PfRun run_particle_filter(const TrackMap& map, std::span<const ImuSample> imu,
                          std::span<const GnssSample> gnss, const FilterConfig& cfg,
                          std::uint64_t seed, const std::optional<Prior>& prior) {
  if (!prior && gnss.empty()) {
    throw Error(ErrorCode::InvalidConfig, "no GNSS fix to initialize from and no prior configured");
  }
  ParticleFilter pf(map, cfg, seed);
  if (prior) pf.initialize(*prior);
  const auto fixes = align_gnss(imu, gnss);
  PfRun run;
  run.rows.reserve(imu.size());
  for (std::size_t k = 0; k < imu.size(); ++k) {
    if (!pf.initialized() && !fixes[k]) continue;
    const StepResult r = pf.step(imu[k], fixes[k]);
    const PositionEstimate& e = r.estimate;
    run.rows.push_back({imu[k].t, e.d, e.v, e.p.x(), e.p.y(), e.sigma_d, r.n_eff, r.resampled, r.zvu});
  }
  run.reinitializations = pf.reinitializations();
  run.gnss_fixes = pf.gnss_fixes();
  run.gnss_residual_mean = pf.gnss_residual_mean();
  run.final_bias = pf.imu().bias().estimates();
  run.standstill_phases = pf.imu().standstill_phases();
  return run;
}

EkfRun run_ekf(const TrackMap& map, std::span<const ImuSample> imu, std::span<const GnssSample> gnss,
               const EkfConfig& cfg, const std::optional<Prior>& prior) {
  EkfSession ekf(map, cfg);
  if (prior) {
    const auto* g = std::get_if<GaussianPrior>(&*prior);
    if (!g) throw Error(ErrorCode::InvalidConfig, "the EKF needs a Gaussian or GNSS prior");
    if (!map.contains(g->d_mean)) {
      throw Error(ErrorCode::PriorOutsideMap, "prior d_mean lies outside the map");
    }
    const MapFeatures mu = map.lookup(g->d_mean);
    const double heading_sigma = std::numbers::pi / 180.0;
    EkfState s;
    s.x << mu.p_x, mu.p_y, mu.theta_z, g->v_mean;
    s.P = Eigen::Vector4d(g->d_sigma * g->d_sigma, g->d_sigma * g->d_sigma,
                          heading_sigma * heading_sigma, g->v_sigma * g->v_sigma)
              .asDiagonal();
    ekf.initialize(s);
  } else if (gnss.empty()) {
    throw Error(ErrorCode::InvalidConfig, "no GNSS fix to initialize from and no prior configured");
  }
  const auto fixes = align_gnss(imu, gnss);
  EkfRun run;
  run.rows.reserve(imu.size());
  for (std::size_t k = 0; k < imu.size(); ++k) {
    if (!ekf.initialized() && !fixes[k]) continue;
    const EkfStepResult r = ekf.step(imu[k], fixes[k]);
    run.rows.push_back({imu[k].t, r.d, r.state.v(), r.state.p_x(), r.state.p_y(), r.sigma_d, r.zvu,
                        r.trace_P});
  }
  run.final_bias = ekf.imu().bias().estimates();
  run.standstill_phases = ekf.imu().standstill_phases();
  return run;
}

const std::vector<std::string> kPfEstimateColumns = {"t",       "d_hat",   "v_hat", "p_x_hat", "p_y_hat",
                                                     "sigma_d", "n_eff", "resampled", "zvu"};
const std::vector<std::string> kEkfEstimateColumns = {"t",       "d_hat", "v_hat",  "p_x_hat",
                                                      "p_y_hat", "sigma_d", "zvu", "trace_P"};

std::string estimates_csv(const PfRun& run) {
  CsvWriter w(kPfEstimateColumns);
  for (const PfRow& r : run.rows) {
    w.row({r.t, r.d, r.v, r.p_x, r.p_y, r.sigma_d, r.n_eff, r.resampled ? 1.0 : 0.0, r.zvu ? 1.0 : 0.0});
  }
  return w.str();
}

std::string estimates_csv(const EkfRun& run) {
  CsvWriter w(kEkfEstimateColumns);
  for (const EkfRow& r : run.rows) {
    w.row({r.t, r.d, r.v, r.p_x, r.p_y, r.sigma_d, r.zvu ? 1.0 : 0.0, r.trace_P});
  }
  return w.str();
}

}  // namespace railpf
