#include "railpf/imu.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "railpf/error.hpp"

namespace railpf {

BiasState::BiasState(std::size_t window) : window_(window) {
  if (window_ == 0) throw Error(ErrorCode::InvalidConfig, "bias window must be >= 1");
}

double BiasState::estimate(BiasAxis axis) const {
  const auto& buf = buffers_[index(axis)];
  if (buf.empty()) return 0.0;
  return std::accumulate(buf.begin(), buf.end(), 0.0) / static_cast<double>(buf.size());
}

ImuChannels BiasState::estimates() const {
  return {estimate(BiasAxis::AccelX), estimate(BiasAxis::AccelY), estimate(BiasAxis::GyroZ)};
}

void BiasState::update(BiasAxis axis, double raw) {
  auto& buf = buffers_[index(axis)];
  buf.push_back(raw);
  while (buf.size() > window_) buf.pop_front();
}

void BiasState::revise_latest(BiasAxis axis, double raw) {
  auto& buf = buffers_[index(axis)];
  if (buf.empty()) {
    buf.push_back(raw);
  } else {
    buf.back() = raw;
  }
}

BiasState update_bias(BiasState state, BiasAxis axis, double raw) {
  state.update(axis, raw);
  return state;
}

ImuChannels apply_bias(const BiasState& state, const ImuChannels& raw) {
  const ImuChannels b = state.estimates();
  return {raw.a_x - b.a_x, raw.a_y - b.a_y, raw.omega_z - b.omega_z};
}

ZvuConfig ZvuConfig::for_rate(double imu_rate_hz) {
  ZvuConfig cfg;
  cfg.window_samples = static_cast<std::size_t>(std::max(2.0, std::round(imu_rate_hz)));
  return cfg;
}

void ZvuConfig::validate() const {
  if (window_samples < 2 || !(accel_variance_threshold > 0.0) || !(rate_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidConfig,
                "zvu window must be >= 2 samples and thresholds positive");
  }
}

Eigen::Vector3d compensate_gravity(const ImuSample& sample, const Orientation& o, double g) {
  return sample.accel - rotate_inverse(o, Eigen::Vector3d(0.0, 0.0, g));
}

bool detect_standstill(std::span<const ImuSample> window, const ZvuConfig& cfg) {
  const std::size_t n = cfg.window_samples;
  if (window.size() < n || n < 2) {
    throw Error(ErrorCode::WindowTooShort, "stand-still window needs " + std::to_string(n) +
                                               " samples, got " + std::to_string(window.size()));
  }
  const auto recent = window.subspan(window.size() - n);
  double sum = 0.0;
  double sum_rate = 0.0;
  for (const ImuSample& s : recent) {
    sum += s.accel.norm();
    sum_rate += s.gyro.norm();
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const ImuSample& s : recent) {
    const double e = s.accel.norm() - mean;
    ss += e * e;
  }
  const double variance = ss / static_cast<double>(n - 1);
  const double mean_rate = sum_rate / static_cast<double>(n);
  return variance < cfg.accel_variance_threshold && mean_rate < cfg.rate_threshold;
}

ImuPreprocessor::ImuPreprocessor(ZvuConfig zvu, std::size_t bias_window, double g)
    : zvu_(zvu), g_(g), bias_(bias_window) {
  zvu_.validate();
}

ProcessedImu ImuPreprocessor::process(const ImuSample& raw, const Orientation& o) {
  ProcessedImu out;
  out.compensated = compensate_gravity(raw, o, g_);
  const ImuChannels channels{out.compensated.x(), out.compensated.y(), raw.gyro.z()};

  const std::size_t n = zvu_.window_samples;
  window_.push_back(raw);
  compensated_.push_back(channels);
  if (window_.size() > n) {
    window_.pop_front();
    compensated_.pop_front();
  }

  if (window_.size() == n) {
    // deque is not contiguous; copy into a small buffer for the detector.
    std::vector<ImuSample> buf(window_.begin(), window_.end());
    out.standstill = detect_standstill(buf, zvu_);
  }

  if (out.standstill) {
    ++standstill_run_;
    if (standstill_run_ >= n) {
      const ImuChannels& admitted = compensated_.front();
      phase_sum_.a_x += admitted.a_x;
      phase_sum_.a_y += admitted.a_y;
      phase_sum_.omega_z += admitted.omega_z;
      ++phase_samples_;
      const double k = static_cast<double>(phase_samples_);
      if (phase_samples_ == 1) {
        ++phases_;
        bias_.update(BiasAxis::AccelX, admitted.a_x);
        bias_.update(BiasAxis::AccelY, admitted.a_y);
        bias_.update(BiasAxis::GyroZ, admitted.omega_z);
      } else {
        bias_.revise_latest(BiasAxis::AccelX, phase_sum_.a_x / k);
        bias_.revise_latest(BiasAxis::AccelY, phase_sum_.a_y / k);
        bias_.revise_latest(BiasAxis::GyroZ, phase_sum_.omega_z / k);
      }
      out.bias_updated = true;
    }
  } else {
    standstill_run_ = 0;
    phase_samples_ = 0;
    phase_sum_ = {};
  }

  out.corrected = apply_bias(bias_, channels);
  out.filter_input = out.standstill ? ImuChannels{} : out.corrected;
  return out;
}

}  // namespace railpf
