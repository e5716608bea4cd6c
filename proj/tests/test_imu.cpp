#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "railpf/error.hpp"
#include "railpf/imu.hpp"

using namespace railpf;

namespace {

constexpr double g = kStandardGravity;

ImuSample sample(double t, Eigen::Vector3d a, Eigen::Vector3d w = Eigen::Vector3d::Zero()) {
  return {t, a, w};
}

std::vector<ImuSample> stationary(int n, double sigma, std::uint64_t seed, double bias_x = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<ImuSample> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(sample(i * 0.02, {bias_x + noise(rng), noise(rng), g + noise(rng)},
                         {noise(rng) * 0.01, noise(rng) * 0.01, noise(rng) * 0.01}));
  }
  return out;
}

}  // namespace

TEST_CASE("compensate_gravity") {
  const Orientation level;
  CHECK(compensate_gravity(sample(0, {0, 0, g}), level, g).norm() == 0.0);
  const Eigen::Vector3d a = compensate_gravity(sample(0, {0.5, 0, g}), level, g);
  CHECK(a.x() == 0.5);
  CHECK(a.y() == 0.0);
  CHECK(a.z() == 0.0);

  // Oracle: a stationary accelerometer on a slope of angle p senses
  // g sin(p) forward and g cos(p) up.
  const double p = std::atan(0.02);
  const ImuSample on_grade = sample(0, {g * std::sin(p), 0, g * std::cos(p)});
  CHECK(std::abs(compensate_gravity(on_grade, Orientation(0, p, 0.4), g).x()) < 1e-3);
}

TEST_CASE("compensate_gravity recovers the specific force exactly (property)") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Orientation o(0.05 * u(rng), 0.05 * u(rng), 3.0 * u(rng));
    const Eigen::Vector3d f(u(rng), u(rng), 0.1 * u(rng));
    const ImuSample s = sample(0, f + rotate_inverse(o, {0, 0, g}));
    CHECK((compensate_gravity(s, o, g) - f).norm() < 1e-9);
  }
}

TEST_CASE("detect_standstill") {
  const ZvuConfig cfg;
  CHECK(detect_standstill(stationary(50, 0.01, 1), cfg));

  // 10 m/s on a 500 m curve: omega_z = 0.02 rad/s.
  std::vector<ImuSample> curve;
  for (int i = 0; i < 50; ++i) curve.push_back(sample(i * 0.02, {0, 0.2, g}, {0, 0, 0.02}));
  CHECK_FALSE(detect_standstill(curve, cfg));

  auto spiked = stationary(50, 0.001, 2);
  spiked[20].accel.z() += 2.0;
  CHECK_FALSE(detect_standstill(spiked, cfg));

  try {
    detect_standstill(stationary(10, 0.01, 3), cfg);
    FAIL("expected WindowTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowTooShort);
  }
}

TEST_CASE("detect_standstill has no false negatives when noise-free") {
  const ZvuConfig cfg;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int i = 0; i < 200; ++i) {
    const Orientation o(0.0, u(rng), 10.0 * u(rng));
    std::vector<ImuSample> w(50, sample(0, rotate_inverse(o, {0, 0, g})));
    CHECK(detect_standstill(w, cfg));
  }
}

TEST_CASE("ZvuConfig") {
  CHECK(ZvuConfig::for_rate(50.0).window_samples == 50);
  CHECK(ZvuConfig::for_rate(100.0).window_samples == 100);
  ZvuConfig bad;
  bad.window_samples = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("update_bias is a moving average") {
  BiasState s(3);
  s = update_bias(s, BiasAxis::AccelX, 0.1);
  s = update_bias(s, BiasAxis::AccelX, 0.1);
  s = update_bias(s, BiasAxis::AccelX, 0.13);
  CHECK(s.estimate(BiasAxis::AccelX) == doctest::Approx(0.11));
  s = update_bias(s, BiasAxis::AccelX, 0.4);
  CHECK(s.count(BiasAxis::AccelX) == 3);
  CHECK(s.estimate(BiasAxis::AccelX) == doctest::Approx((0.1 + 0.13 + 0.4) / 3.0));

  BiasState first(3);
  CHECK(first.estimate(BiasAxis::GyroZ) == 0.0);
  first = update_bias(first, BiasAxis::GyroZ, 0.05);
  CHECK(first.estimate(BiasAxis::GyroZ) == 0.05);
  CHECK(first.estimate(BiasAxis::AccelY) == 0.0);
}

TEST_CASE("update_bias converges on an injected bias") {
  // Oracle: the mean of 10 independent readings has sigma / sqrt(10).
  const double sigma = 0.05;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, sigma);
  BiasState s(10);
  for (int i = 0; i < 10; ++i) s = update_bias(s, BiasAxis::AccelX, 0.02 + noise(rng));
  CHECK(std::abs(s.estimate(BiasAxis::AccelX) - 0.02) <= 3.0 * sigma / std::sqrt(10.0));
}

TEST_CASE("bias error shrinks with more stand-stills (Monte Carlo mean trend)") {
  const double sigma = 0.05;
  std::vector<double> mse(10, 0.0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    BiasState s(10);
    for (int k = 0; k < 10; ++k) {
      s = update_bias(s, BiasAxis::AccelX, 0.02 + noise(rng));
      const double e = s.estimate(BiasAxis::AccelX) - 0.02;
      mse[k] += e * e / 200.0;
    }
  }
  for (int k = 1; k < 10; ++k) CHECK(mse[k] <= mse[k - 1] * 1.15);
  CHECK(mse[9] < mse[0] / 4.0);
}

TEST_CASE("apply_bias") {
  BiasState zero(10);
  const ImuChannels raw{0.5, -0.2, 0.01};
  const ImuChannels same = apply_bias(zero, raw);
  CHECK(same.a_x == 0.5);
  CHECK(same.a_y == -0.2);
  CHECK(same.omega_z == 0.01);

  BiasState b = update_bias(BiasState(10), BiasAxis::AccelX, 0.02);
  const ImuChannels c = apply_bias(b, raw);
  CHECK(c.a_x == doctest::Approx(0.48));
  CHECK(c.a_x + b.estimate(BiasAxis::AccelX) == doctest::Approx(raw.a_x));
}

TEST_CASE("ImuPreprocessor zeroes inputs and learns the bias at rest") {
  ImuPreprocessor pre(ZvuConfig{}, 10, g);
  const auto stream = stationary(500, 0.02, 5, 0.02);
  bool any_standstill = false;
  for (const ImuSample& s : stream) {
    const ProcessedImu p = pre.process(s, Orientation{});
    // Pipeline order: compensation feeds correction feeds the filter input.
    CHECK(p.corrected.a_x == doctest::Approx(p.compensated.x() - pre.bias().estimate(BiasAxis::AccelX)));
    if (p.standstill) {
      any_standstill = true;
      CHECK(p.filter_input.a_x == 0.0);
      CHECK(p.filter_input.a_y == 0.0);
      CHECK(p.filter_input.omega_z == 0.0);
    }
  }
  CHECK(any_standstill);
  CHECK(pre.standstill_phases() == 1);
  // 400 admitted samples of sigma 0.02 noise.
  CHECK(std::abs(pre.bias().estimate(BiasAxis::AccelX) - 0.02) < 3.0 * 0.02 / std::sqrt(400.0));
}

TEST_CASE("ImuPreprocessor passes motion through") {
  ImuPreprocessor pre(ZvuConfig{}, 10, g);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> vib(0.0, 0.3);
  for (int i = 0; i < 300; ++i) {
    const ProcessedImu p = pre.process(sample(i * 0.02, {0.3, 0.0, g + vib(rng)}, {0, 0, 0.02}), Orientation{});
    CHECK_FALSE(p.standstill);
    CHECK(p.filter_input.a_x == doctest::Approx(0.3));
    CHECK(p.filter_input.omega_z == doctest::Approx(0.02));
  }
  CHECK(pre.standstill_phases() == 0);
}
