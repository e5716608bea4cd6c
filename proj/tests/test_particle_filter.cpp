#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "railpf/error.hpp"
#include "railpf/particle_filter.hpp"
#include "railpf/scenario.hpp"

using namespace railpf;

namespace {

TrackMap straight_map(double length = 1000.0) {
  std::vector<TrackPoint> pts;
  for (double d = 0.0; d <= length + 1e-9; d += 10.0) pts.push_back({d, {d, 0, 0, 0, 0, 0, 0}});
  return TrackMap("straight", std::move(pts));
}

// Straight for 100 m, then constant curvature 0.002 (drawn as a chord-safe
// polyline along the x axis; only kappa matters to the filter).
TrackMap kappa_map() {
  std::vector<TrackPoint> pts;
  for (double d = 0.0; d <= 400.0 + 1e-9; d += 10.0) {
    pts.push_back({d, {d, 0, 0, d < 100.0 ? 0.0 : 0.002, 0, 0, 0}});
  }
  return TrackMap("kappa", std::move(pts));
}

FilterConfig small_cfg(std::size_t n) {
  FilterConfig c;
  c.n_particles = n;
  c.n_threshold = n / 2 > 0 ? n / 2 : 1;
  return c;
}

}  // namespace

TEST_CASE("initialize from a point prior") {
  const TrackMap map = straight_map();
  const ParticleSet s = initialize(small_cfg(100), GaussianPrior{100.0, 0.0, 0.0, 0.0}, map, 1);
  for (const FilterState& p : s.states) {
    CHECK(p.d == 100.0);
    CHECK(p.v == 0.0);
  }
  CHECK(effective_sample_size(s.weights) == doctest::Approx(100.0));
}

TEST_CASE("initialize from a uniform prior") {
  // Oracle: the sample mean of N uniform draws has sd (L / sqrt 12) / sqrt N.
  const TrackMap map = straight_map();
  const std::size_t N = 1000;
  const ParticleSet s = initialize(small_cfg(N), UniformPrior{0.0, 1000.0, 0.0, 0.0}, map, 2);
  double mean = 0.0;
  for (const FilterState& p : s.states) mean += p.d / N;
  CHECK(std::abs(mean - 500.0) <= 3.0 * (1000.0 / std::sqrt(12.0)) / std::sqrt(double(N)));
  CHECK(effective_sample_size(s.weights) == doctest::Approx(double(N)));
}

TEST_CASE("initialize rejects priors off the map") {
  const TrackMap map = straight_map();
  try {
    initialize(small_cfg(10), GaussianPrior{5000.0, 10.0, 0.0, 0.0}, map, 1);
    FAIL("expected PriorOutsideMap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PriorOutsideMap);
  }
  CHECK_THROWS_AS(initialize(small_cfg(10), UniformPrior{2000.0, 3000.0, 0.0, 0.0}, map, 1), Error);
}

TEST_CASE("predict is ballistic without noise") {
  const TrackMap map = straight_map();
  FilterConfig cfg = small_cfg(1);
  cfg.sigma_u = 0.0;
  cfg.sigma_bias = 0.0;
  ParticleSet s = initialize(cfg, GaussianPrior{100.0, 0.0, 10.0, 0.0}, map, 1);
  predict(s, 0.0, cfg, 0.1);
  CHECK(s.states[0].d == doctest::Approx(101.0));
  CHECK(s.states[0].v == doctest::Approx(10.0));

  ParticleSet a = initialize(cfg, GaussianPrior{100.0, 0.0, 10.0, 0.0}, map, 1);
  predict(a, 0.5, cfg, 0.1);
  CHECK(a.states[0].d == doctest::Approx(101.0025));
  CHECK(a.states[0].v == doctest::Approx(10.05));
}

TEST_CASE("predict spreads the cloud by the process-noise law") {
  // Oracle: with x = (d, v), x' = F x + G nu, the covariance propagates as
  // F P F^T + q G G^T with F = [[1, T], [0, 1]], G = [T^2/2, T].
  const TrackMap map = straight_map(100000.0);
  FilterConfig cfg = small_cfg(20000);
  const double T = 0.1;
  ParticleSet s = initialize(cfg, GaussianPrior{50000.0, 0.0, 10.0, 0.0}, map, 3);
  Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d F;
  F << 1, T, 0, 1;
  const Eigen::Vector2d G(0.5 * T * T, T);
  const double q = cfg.sigma_u * cfg.sigma_u + cfg.sigma_bias * cfg.sigma_bias;
  for (int k = 0; k < 50; ++k) {
    predict(s, 0.0, cfg, T);
    P = F * P * F.transpose() + q * G * G.transpose();
  }
  double md = 0, mv = 0;
  for (const FilterState& p : s.states) {
    md += p.d;
    mv += p.v;
  }
  md /= s.size();
  mv /= s.size();
  double vd = 0, vv = 0;
  for (const FilterState& p : s.states) {
    vd += (p.d - md) * (p.d - md);
    vv += (p.v - mv) * (p.v - mv);
  }
  vd /= s.size() - 1;
  vv /= s.size() - 1;
  // Sample variance of 20000 Gaussian draws is within ~2% (1 sd); allow 8%.
  CHECK(vd == doctest::Approx(P(0, 0)).epsilon(0.08));
  CHECK(vv == doctest::Approx(P(1, 1)).epsilon(0.08));
}

TEST_CASE("predict_measurement") {
  const TrackMap map = kappa_map();
  const PredictedMeasurement z = predict_measurement({200.0, 20.0}, map);
  CHECK(z.omega_z == doctest::Approx(0.04));
  CHECK(z.a_y == doctest::Approx(0.8));
  const PredictedMeasurement s = predict_measurement({50.0, 17.0}, map);
  CHECK(s.omega_z == 0.0);
  CHECK(s.a_y == 0.0);
  const PredictedMeasurement r = predict_measurement({200.0, 0.0}, map);
  CHECK(r.omega_z == 0.0);
  CHECK(r.a_y == 0.0);
  CHECK(r.v == 0.0);
  CHECK_THROWS_AS(predict_measurement({500.0, 1.0}, map), OutOfMapRangeError);
}

TEST_CASE("weight favours the matching particle and zeroes off-map ones") {
  const TrackMap map = kappa_map();
  FilterConfig cfg = small_cfg(3);
  ParticleSet s = initialize(cfg, GaussianPrior{200.0, 0.0, 20.0, 0.0}, map, 1);
  s.states[1] = {50.0, 20.0};
  s.states[2] = {1000.0, 20.0};
  weight(s, Measurement{0.04, 0.8, std::nullopt}, map, cfg);
  CHECK(s.weights[0] > 0.5);
  CHECK(s.weights[2] == 0.0);
  CHECK(std::accumulate(s.weights.begin(), s.weights.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("weight concentrates on particles whose v kappa matches omega_z") {
  const TrackMap map = kappa_map();
  FilterConfig cfg = small_cfg(2000);
  ParticleSet s = initialize(cfg, UniformPrior{0.0, 400.0, 15.0, 0.0}, map, 4);
  weight(s, Measurement{15.0 * 0.002, 15.0 * 15.0 * 0.002, std::nullopt}, map, cfg);
  double mass_curve = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.states[j].d >= 100.0) mass_curve += s.weights[j];
  }
  CHECK(mass_curve > 0.99);
}

TEST_CASE("weight throws when every particle is off the map") {
  const TrackMap map = kappa_map();
  FilterConfig cfg = small_cfg(4);
  ParticleSet s = initialize(cfg, GaussianPrior{200.0, 0.0, 20.0, 0.0}, map, 1);
  for (FilterState& p : s.states) p.d = -10.0;
  try {
    weight(s, Measurement{}, map, cfg);
    FAIL("expected AllWeightsZero");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllWeightsZero);
  }
}

TEST_CASE("effective_sample_size") {
  CHECK(effective_sample_size(std::vector<double>(1000, 0.001)) == doctest::Approx(1000.0));
  CHECK(effective_sample_size(std::vector<double>{1, 0, 0, 0}) == 1.0);
  CHECK(effective_sample_size(std::vector<double>{0.5, 0.5, 0, 0}) == 2.0);
}

TEST_CASE("systematic resampling") {
  CHECK(systematic_parents(std::vector<double>{1, 0, 0, 0}, 0.3) == std::vector<std::size_t>{0, 0, 0, 0});
  const auto uniform = systematic_parents(std::vector<double>(8, 0.125), 0.7);
  CHECK(uniform == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});

  std::vector<double> w(1000, 0.0);
  w[0] = 0.5;
  w[1] = 0.3;
  w[2] = 0.2;
  for (double u0 : {0.0, 0.25, 0.5, 0.999}) {
    std::vector<int> counts(3, 0);
    for (std::size_t p : systematic_parents(w, u0)) ++counts[p];
    CHECK(std::abs(counts[0] - 500) <= 1);
    CHECK(std::abs(counts[1] - 300) <= 1);
    CHECK(std::abs(counts[2] - 200) <= 1);
  }

  const TrackMap map = straight_map();
  FilterConfig cfg = small_cfg(4);
  ParticleSet s = initialize(cfg, UniformPrior{0.0, 100.0, 0.0, 1.0}, map, 7);
  const FilterState first = s.states[0];
  s.weights = {1.0, 0.0, 0.0, 0.0};
  resample(s);
  for (const FilterState& p : s.states) {
    CHECK(p.d == first.d);
    CHECK(p.v == first.v);
  }
  for (double x : s.weights) CHECK(x == 0.25);
}

TEST_CASE("estimate") {
  const TrackMap map = straight_map();
  FilterConfig cfg = small_cfg(2);
  ParticleSet s = initialize(cfg, GaussianPrior{100.0, 0.0, 5.0, 0.0}, map, 1);
  PositionEstimate e = estimate(s, map, cfg);
  CHECK(e.d == 100.0);
  CHECK(e.v == 5.0);
  CHECK(e.sigma_d == 0.0);
  CHECK(e.p.x() == doctest::Approx(100.0));

  s.states[1].d = 102.0;
  e = estimate(s, map, cfg);
  CHECK(e.d == doctest::Approx(101.0));
  CHECK(e.p.x() == doctest::Approx(101.0));
  CHECK(e.sigma_d == doctest::Approx(1.0));
  CHECK(e.along_3sigma == doctest::Approx(3.0));

  cfg.estimator = Estimator::MaxWeight;
  s.weights = {0.3, 0.7};
  CHECK(estimate(s, map, cfg).d == 102.0);

  s.weights = {0.0, 0.0};
  CHECK_THROWS_AS(estimate(s, map, cfg), Error);
}

TEST_CASE("weighted mean and max weight agree on a unimodal posterior") {
  const TrackMap map = straight_map();
  FilterConfig cfg = small_cfg(5000);
  ParticleSet s = initialize(cfg, UniformPrior{400.0, 600.0, 10.0, 0.0}, map, 12);
  GnssSample fix{0.0, 500.0, 0.0, 10.0, 2.0, 2.0, 0.4};
  weight(s, Measurement{0.0, 0.0, fix}, map, cfg);
  const double mean = estimate(s, map, cfg).d;
  cfg.estimator = Estimator::MaxWeight;
  const double mode = estimate(s, map, cfg).d;
  // Inter-particle spacing of 5000 uniform draws over 200 m is 0.04 m; the
  // likelihood is flat near the peak, so compare against the posterior sd.
  CHECK(std::abs(mean - mode) < 2.0);
}

TEST_CASE("ParticleFilter holds position and zero speed at rest") {
  const TrackMap map = straight_map();
  ParticleFilter pf(map, FilterConfig{}, 5);
  pf.initialize(GaussianPrior{300.0, 1.0, 0.0, 0.05});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.005);
  double last_d = 0.0;
  for (int k = 0; k < 500; ++k) {
    const ImuSample s{k * 0.02, {n(rng), n(rng), kStandardGravity + n(rng)}, {0, 0, 1e-4 * n(rng)}};
    const StepResult r = pf.step(s, std::nullopt);
    if (r.zvu) {
      CHECK(r.estimate.v == 0.0);
      if (k > 60 && !r.resampled) CHECK(std::abs(r.estimate.d - last_d) < 1e-9);
    }
    last_d = r.estimate.d;
    double total = 0.0;
    for (double w : pf.particles().weights) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.n_eff >= 1.0 - 1e-9);
    CHECK(r.n_eff <= 1000.0 + 1e-9);
  }
}

TEST_CASE("ParticleFilter is deterministic for a seed") {
  const Scenario sc = make_scenario(preset_spec("curvy-indefinite"), 3);
  auto run = [&](std::uint64_t seed) {
    ParticleFilter pf(sc.track.map, FilterConfig{}, seed);
    std::vector<double> d;
    std::size_t g = 0;
    for (std::size_t k = 0; k < 3000; ++k) {
      std::optional<GnssSample> fix;
      if (g < sc.sensors.gnss.size() && sc.sensors.gnss[g].t <= sc.sensors.imu[k].t + 1e-9) fix = sc.sensors.gnss[g++];
      d.push_back(pf.step(sc.sensors.imu[k], fix).estimate.d);
    }
    return d;
  };
  CHECK(run(9) == run(9));
  CHECK(run(9) != run(10));
}

TEST_CASE("noise-free run with GNSS every step tracks the truth") {
  ScenarioSpec spec = preset_spec("curvy-indefinite");
  spec.sensors.outages.clear();
  spec.sensors.accel_noise.setZero();
  spec.sensors.gyro_noise.setZero();
  spec.sensors.accel_bias.setZero();
  spec.sensors.gyro_bias.setZero();
  spec.sensors.accel_drift_sigma = 0.0;
  spec.sensors.gyro_drift_sigma = 0.0;
  spec.sensors.sigma_px = 0.0;
  spec.sensors.sigma_py = 0.0;
  spec.sensors.sigma_v = 0.0;
  spec.sensors.gnss_rate_hz = spec.sensors.imu_rate_hz;
  const Scenario sc = make_scenario(spec, 1);
  ParticleFilter pf(sc.track.map, FilterConfig{}, 2);
  double worst = 0.0;
  std::size_t g = 0;
  for (std::size_t k = 0; k < 15000; ++k) {
    std::optional<GnssSample> fix;
    if (g < sc.sensors.gnss.size() && sc.sensors.gnss[g].t <= sc.sensors.imu[k].t + 1e-9) {
      fix = sc.sensors.gnss[g++];
      fix->sigma_px = fix->sigma_py = fix->sigma_v = 0.0;  // fall back to the configured sigmas
    }
    const StepResult r = pf.step(sc.sensors.imu[k], fix);
    if (k >= 500) worst = std::max(worst, std::abs(r.estimate.d - sc.truth[k].d));
  }
  // Bounded by the departure lag: the stand-still window still clamps v for
  // a fraction of a second after the train starts moving.
  CHECK(worst < 1.0);
}
