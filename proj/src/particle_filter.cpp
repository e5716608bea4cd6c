#include "railpf/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "railpf/error.hpp"

namespace railpf {

void FilterConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (n_particles < 1) fail("n_particles must be >= 1");
  if (n_threshold < 1 || n_threshold > n_particles) fail("n_threshold must lie in [1, N]");
  if (!(T > 0.0)) fail("T must be positive");
  for (double s : {sigma_u, sigma_ax, sigma_ay, sigma_wz, sigma_bias, sigma_px, sigma_py, sigma_v}) {
    if (!(s > 0.0)) fail("all sigma values must be positive");
  }
  if (!(g > 0.0)) fail("g must be positive");
  if (!(curve_threshold > 0.0)) fail("curve_threshold must be positive");
  if (bias_window < 1) fail("bias_window must be >= 1");
  zvu.validate();
}

namespace {

void draw_particles(ParticleSet& set, std::size_t n, const Prior& prior, const TrackMap& map) {
  set.states.assign(n, {});
  set.weights.assign(n, 1.0 / static_cast<double>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussianPrior>) {
          if (!(p.d_sigma >= 0.0) || !(p.v_sigma >= 0.0)) {
            throw Error(ErrorCode::InvalidConfig, "prior sigma must be >= 0");
          }
          const double lo = p.d_mean - 4.0 * p.d_sigma;
          const double hi = p.d_mean + 4.0 * p.d_sigma;
          if (hi < map.front_d() || lo > map.back_d()) {
            throw Error(ErrorCode::PriorOutsideMap, "prior on d does not intersect the map");
          }
          for (FilterState& s : set.states) {
            s.d = p.d_mean + (p.d_sigma > 0.0 ? p.d_sigma * normal(set.rng) : 0.0);
            s.v = p.v_mean + (p.v_sigma > 0.0 ? p.v_sigma * normal(set.rng) : 0.0);
          }
        } else {
          const double lo = std::max(p.d_min, map.front_d());
          const double hi = std::min(p.d_max, map.back_d());
          if (!(p.d_min <= p.d_max) || lo > hi) {
            throw Error(ErrorCode::PriorOutsideMap, "uniform prior does not intersect the map");
          }
          std::uniform_real_distribution<double> uniform(lo, hi);
          for (FilterState& s : set.states) {
            s.d = hi > lo ? uniform(set.rng) : lo;
            s.v = p.v_mean + (p.v_sigma > 0.0 ? p.v_sigma * normal(set.rng) : 0.0);
          }
        }
      },
      prior);
}

double gaussian_log(double residual, double sigma) {
  const double r = residual / sigma;
  return -0.5 * r * r;
}

}  // namespace

ParticleSet initialize(const FilterConfig& cfg, const Prior& prior, const TrackMap& map,
                       std::uint64_t seed) {
  if (cfg.n_particles < 1) throw Error(ErrorCode::InvalidConfig, "n_particles must be >= 1");
  ParticleSet set;
  set.seed = seed;
  set.rng.seed(seed);
  draw_particles(set, cfg.n_particles, prior, map);
  return set;
}

void predict(ParticleSet& set, double u, const FilterConfig& cfg, double dt) {
  const double T = dt > 0.0 ? dt : cfg.T;
  const double sigma = std::sqrt(cfg.sigma_u * cfg.sigma_u + cfg.sigma_bias * cfg.sigma_bias);
  const double half_t2 = 0.5 * T * T;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (FilterState& s : set.states) {
    const double a = u + (sigma > 0.0 ? sigma * normal(set.rng) : 0.0);
    s.d += T * s.v + half_t2 * a;
    s.v += T * a;
  }
}

PredictedMeasurement predict_measurement(const FilterState& state, const TrackMap& map) {
  const MapFeatures mu = map.lookup(state.d);
  return {mu.p_x, mu.p_y, state.v, turn_rate_from_curvature(state.v, mu.kappa),
          lateral_accel_from_curvature(state.v, mu.kappa)};
}

void weight(ParticleSet& set, const Measurement& z, const TrackMap& map, const FilterConfig& cfg) {
  double sx = cfg.sigma_px, sy = cfg.sigma_py, sv = cfg.sigma_v;
  if (z.gnss && cfg.gnss_sigma_from_receiver) {
    if (z.gnss->sigma_px > 0.0) sx = z.gnss->sigma_px;
    if (z.gnss->sigma_py > 0.0) sy = z.gnss->sigma_py;
    if (z.gnss->sigma_v > 0.0) sv = z.gnss->sigma_v;
  }

  const std::size_t n = set.size();
  std::vector<double> log_w(n, -std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const FilterState& s = set.states[j];
    if (!(set.weights[j] > 0.0) || !map.contains(s.d)) continue;
    double p_x, p_y, kappa;
    map.lookup_plane(s.d, p_x, p_y, kappa);
    double ll = gaussian_log(z.omega_z - turn_rate_from_curvature(s.v, kappa), cfg.sigma_wz) +
                gaussian_log(z.a_y - lateral_accel_from_curvature(s.v, kappa), cfg.sigma_ay);
    if (z.gnss) {
      ll += gaussian_log(z.gnss->p_x - p_x, sx) + gaussian_log(z.gnss->p_y - p_y, sy) +
            gaussian_log(z.gnss->v - s.v, sv);
    }
    log_w[j] = std::log(set.weights[j]) + ll;
    best = std::max(best, log_w[j]);
  }
  if (!std::isfinite(best)) {
    std::fill(set.weights.begin(), set.weights.end(), 0.0);
    throw Error(ErrorCode::AllWeightsZero, "every particle has zero likelihood or left the map");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    set.weights[j] = std::exp(log_w[j] - best);
    total += set.weights[j];
  }
  for (double& w : set.weights) w /= total;
}

double effective_sample_size(std::span<const double> weights) {
  double sum_sq = 0.0;
  for (double w : weights) sum_sq += w * w;
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

std::vector<std::size_t> systematic_parents(std::span<const double> weights, double u0) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> parents(n);
  if (n == 0) return parents;
  double total = 0.0;
  for (double w : weights) total += w;
  std::size_t j = 0;
  double cumulative = weights[0] / total;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = (u0 + static_cast<double>(i)) / static_cast<double>(n);
    while (pos > cumulative && j + 1 < n) {
      ++j;
      cumulative += weights[j] / total;
    }
    parents[i] = j;
  }
  return parents;
}

void resample(ParticleSet& set) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u0 = uniform(set.rng);
  const std::vector<std::size_t> parents = systematic_parents(set.weights, u0);
  std::vector<FilterState> next(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) next[i] = set.states[parents[i]];
  set.states = std::move(next);
  std::fill(set.weights.begin(), set.weights.end(), 1.0 / static_cast<double>(set.size()));
}

PositionEstimate estimate(const ParticleSet& set, const TrackMap& map, const FilterConfig& cfg) {
  if (set.size() == 0) throw Error(ErrorCode::DegenerateSet, "empty particle set");
  double total = 0.0;
  for (double w : set.weights) total += w;
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateSet, "all particle weights are zero");

  double mean_d = 0.0, mean_v = 0.0;
  for (std::size_t j = 0; j < set.size(); ++j) {
    mean_d += set.weights[j] * set.states[j].d;
    mean_v += set.weights[j] * set.states[j].v;
  }
  mean_d /= total;
  mean_v /= total;
  double var_d = 0.0, var_v = 0.0;
  for (std::size_t j = 0; j < set.size(); ++j) {
    const double ed = set.states[j].d - mean_d;
    const double ev = set.states[j].v - mean_v;
    var_d += set.weights[j] * ed * ed;
    var_v += set.weights[j] * ev * ev;
  }

  PositionEstimate out;
  out.sigma_d = std::sqrt(var_d / total);
  out.sigma_v = std::sqrt(var_v / total);
  if (cfg.estimator == Estimator::MaxWeight) {
    const auto it = std::max_element(set.weights.begin(), set.weights.end());
    const FilterState& s = set.states[static_cast<std::size_t>(it - set.weights.begin())];
    out.d = s.d;
    out.v = s.v;
  } else {
    out.d = mean_d;
    out.v = mean_v;
  }
  const MapFeatures mu = map.lookup(std::clamp(out.d, map.front_d(), map.back_d()));
  out.p = mu.position();
  out.tangent = {std::cos(mu.theta_z), std::sin(mu.theta_z)};
  out.along_3sigma = 3.0 * out.sigma_d;
  return out;
}

ParticleFilter::ParticleFilter(const TrackMap& map, FilterConfig cfg, std::uint64_t seed)
    : map_(map), cfg_(cfg), seed_(seed), imu_(cfg.zvu, cfg.bias_window, cfg.g) {
  cfg_.validate();
  set_.seed = seed;
  set_.rng.seed(seed);
}

void ParticleFilter::initialize(const Prior& prior) {
  set_ = railpf::initialize(cfg_, prior, map_, seed_);
  initialized_ = true;
  last_d_ = std::clamp(estimate(set_, map_, cfg_).d, map_.front_d(), map_.back_d());
}

Prior ParticleFilter::prior_from_fix(const GnssSample& fix) const {
  const TrackProjection proj = map_.project({fix.p_x, fix.p_y});
  const double sx = fix.sigma_px > 0.0 ? fix.sigma_px : cfg_.sigma_px;
  const double sy = fix.sigma_py > 0.0 ? fix.sigma_py : cfg_.sigma_py;
  const double sv = fix.sigma_v > 0.0 ? fix.sigma_v : cfg_.sigma_v;
  return GaussianPrior{proj.d, std::max(sx, sy), fix.v, sv};
}

StepResult ParticleFilter::step(const ImuSample& imu, const std::optional<GnssSample>& gnss) {
  if (!initialized_) {
    if (!gnss) throw Error(ErrorCode::InvalidConfig, "filter stepped before initialization");
    initialize(prior_from_fix(*gnss));
  }
  double dt = cfg_.T;
  if (last_t_ && imu.t > *last_t_) dt = imu.t - *last_t_;
  last_t_ = imu.t;

  StepResult result;
  result.imu = imu_.process(imu, map_.orientation_at(last_d_));
  result.zvu = result.imu.standstill;
  if (result.zvu) {
    for (FilterState& s : set_.states) s.v = 0.0;
  } else {
    predict(set_, result.imu.filter_input.a_x, cfg_, dt);
  }

  const Measurement z{result.imu.filter_input.omega_z, result.imu.filter_input.a_y, gnss};
  try {
    weight(set_, z, map_, cfg_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllWeightsZero || !gnss) throw;
    draw_particles(set_, cfg_.n_particles, prior_from_fix(*gnss), map_);
    result.reinitialized = true;
    ++reinitializations_;
  }

  result.n_eff = effective_sample_size(set_.weights);
  bool trigger = result.n_eff < static_cast<double>(cfg_.n_threshold);
  if (cfg_.curve_resample) {
    double mean_d = 0.0;
    for (std::size_t j = 0; j < set_.size(); ++j) mean_d += set_.weights[j] * set_.states[j].d;
    const double kappa = map_.lookup(std::clamp(mean_d, map_.front_d(), map_.back_d())).kappa;
    const bool curved = std::abs(kappa) > cfg_.curve_threshold;
    if (curved && !on_curve_) trigger = true;
    on_curve_ = curved;
  }
  if (trigger) {
    resample(set_);
    result.resampled = true;
  }

  result.estimate = estimate(set_, map_, cfg_);
  last_d_ = std::clamp(result.estimate.d, map_.front_d(), map_.back_d());
  if (gnss) {
    residual_sum_ += Eigen::Vector2d(gnss->p_x, gnss->p_y) - result.estimate.p;
    ++gnss_fixes_;
  }
  return result;
}

Eigen::Vector2d ParticleFilter::gnss_residual_mean() const {
  if (gnss_fixes_ == 0) return Eigen::Vector2d::Zero();
  return residual_sum_ / static_cast<double>(gnss_fixes_);
}

}  // namespace railpf
