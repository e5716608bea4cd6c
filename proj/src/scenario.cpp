#include "railpf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "railpf/error.hpp"
#include "railpf/particle_filter.hpp"
#include "railpf/seed.hpp"

namespace railpf {

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::InvalidSpec, field + ": " + what);
}

std::string segment_field(std::size_t i, const char* name) {
  return "segment." + std::to_string(i) + "." + name;
}

double segment_curvature(const TrackSegment& s) {
  if (s.kind != SegmentKind::Arc) return 0.0;
  return (s.turn == Turn::Left ? 1.0 : -1.0) / s.radius;
}

// Curvature at the start and end of every segment; clothoids interpolate
// between their neighbours.
std::vector<std::pair<double, double>> curvature_bounds(const TrackSpec& spec) {
  const std::size_t n = spec.segments.size();
  std::vector<std::pair<double, double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrackSegment& s = spec.segments[i];
    if (s.kind != SegmentKind::Clothoid) {
      out[i] = {segment_curvature(s), segment_curvature(s)};
      continue;
    }
    const double before = i > 0 ? out[i - 1].second : 0.0;
    double after = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (spec.segments[j].kind != SegmentKind::Clothoid) {
        after = segment_curvature(spec.segments[j]);
        break;
      }
    }
    out[i] = {before, after};
  }
  return out;
}

}  // namespace

double TrackSpec::total_length() const {
  double total = 0.0;
  for (const TrackSegment& s : segments) total += s.length;
  return total;
}

void TrackSpec::validate() const {
  if (segments.empty()) invalid("segment", "track needs at least one segment");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const TrackSegment& s = segments[i];
    if (!(s.length > 0.0) || !std::isfinite(s.length)) {
      invalid(segment_field(i, "length"), "must be > 0");
    }
    if (s.kind == SegmentKind::Arc && (!(s.radius > 0.0) || !std::isfinite(s.radius))) {
      invalid(segment_field(i, "radius"), "must be > 0");
    }
    if (!std::isfinite(s.grade) || std::abs(s.grade) > 0.1) {
      invalid(segment_field(i, "grade"), "must be finite with |grade| <= 0.1");
    }
  }
  if (!std::isfinite(start_x) || !std::isfinite(start_y) || !std::isfinite(start_z) ||
      !std::isfinite(start_heading)) {
    invalid("start", "must be finite");
  }
}

void VelocityProfile::validate() const {
  if (!(start_d >= 0.0)) invalid("profile.start_d", "must be >= 0");
  double v = 0.0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const ProfilePhase& p = phases[i];
    const std::string base = "phase." + std::to_string(i);
    switch (p.kind) {
      case PhaseKind::Accelerate:
        if (!(p.rate > 0.0)) invalid(base + ".rate", "must be > 0");
        if (!(p.target_speed > v)) invalid(base + ".target", "must exceed the current speed");
        v = p.target_speed;
        break;
      case PhaseKind::Brake:
        if (!(p.rate > 0.0)) invalid(base + ".rate", "must be > 0");
        if (!(p.target_speed >= 0.0) || !(p.target_speed < v)) {
          invalid(base + ".target", "must lie in [0, current speed)");
        }
        v = p.target_speed;
        break;
      case PhaseKind::Cruise:
        if (!(p.distance > 0.0)) invalid(base + ".distance", "must be > 0");
        if (!(v > 0.0)) invalid(base + ".distance", "cannot cruise at zero speed");
        break;
      case PhaseKind::Stop:
        if (!(p.duration > 0.0)) invalid(base + ".duration", "must be > 0");
        if (v != 0.0) invalid(base + ".duration", "stop requires zero speed");
        break;
    }
  }
}

void SensorSpec::validate() const {
  if (!(imu_rate_hz > 0.0)) invalid("imu_rate_hz", "must be > 0");
  if (!(gnss_rate_hz > 0.0)) invalid("gnss_rate_hz", "must be > 0");
  if (gnss_rate_hz > imu_rate_hz) invalid("gnss_rate_hz", "must not exceed imu_rate_hz");
  auto nonneg = [](const Eigen::Vector3d& v) { return (v.array() >= 0.0).all(); };
  if (!nonneg(accel_noise)) invalid("accel_noise", "must be >= 0");
  if (!nonneg(gyro_noise)) invalid("gyro_noise", "must be >= 0");
  if (!accel_bias.allFinite()) invalid("accel_bias", "must be finite");
  if (!gyro_bias.allFinite()) invalid("gyro_bias", "must be finite");
  for (double s : {accel_drift_sigma, gyro_drift_sigma, vibration_sigma, sigma_px, sigma_py,
                   sigma_v}) {
    if (!(s >= 0.0)) invalid("sigma", "sensor sigmas must be >= 0");
  }
  if (!(vibration_speed > 0.0)) invalid("vibration_speed", "must be > 0");
  if (!(g > 0.0)) invalid("g", "must be > 0");
  std::vector<OutageWindow> sorted = outages;
  std::sort(sorted.begin(), sorted.end(),
            [](const OutageWindow& a, const OutageWindow& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i].end > sorted[i].start)) invalid("outage", "end must exceed start");
    if (i > 0 && sorted[i].start < sorted[i - 1].end) invalid("outage", "windows overlap");
  }
}

bool SensorSpec::in_outage(double t) const {
  return std::any_of(outages.begin(), outages.end(),
                     [t](const OutageWindow& w) { return w.contains(t); });
}

GeneratedTrack generate_track(const TrackSpec& spec, double spacing, const BuildOptions& options) {
  spec.validate();
  if (!(spacing > 0.0)) invalid("spacing", "must be > 0");
  const auto bounds = curvature_bounds(spec);
  const double total = spec.total_length();
  const double step = std::min(0.5, spacing / 10.0);

  double x = spec.start_x, y = spec.start_y, z = spec.start_z, heading = spec.start_heading;
  double s = 0.0;
  double next_sample = 0.0;
  std::vector<RawTrackPoint> raw;
  raw.push_back({x, y, z, 0.0});
  next_sample += spacing;

  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    const TrackSegment& seg = spec.segments[i];
    const auto [k0, k1] = bounds[i];
    double local = 0.0;
    while (local < seg.length) {
      double h = std::min(step, seg.length - local);
      if (s + h > next_sample && next_sample > s) h = next_sample - s;
      // Constant-curvature chord with the curvature at the sub-step midpoint.
      const double kappa = k0 + (k1 - k0) * (local + 0.5 * h) / seg.length;
      const double turn = kappa * h;
      const double chord = std::abs(turn) > 1e-12 ? 2.0 * std::sin(0.5 * turn) / kappa : h;
      x += chord * std::cos(heading + 0.5 * turn);
      y += chord * std::sin(heading + 0.5 * turn);
      z += seg.grade * h;
      heading += turn;
      local += h;
      s += h;
      if (std::abs(s - next_sample) < 1e-9) {
        raw.push_back({x, y, z, 0.0});
        next_sample += spacing;
      }
    }
  }
  if (total - (next_sample - spacing) > 1e-6) raw.push_back({x, y, z, 0.0});
  TrackMap map = build_map(raw, options);
  return {std::move(raw), std::move(map)};
}

namespace {

struct Piece {
  double t0 = 0.0;
  double duration = 0.0;
  double d0 = 0.0;
  double v0 = 0.0;
  double a = 0.0;
};

std::vector<Piece> profile_pieces(const VelocityProfile& profile) {
  profile.validate();
  std::vector<Piece> pieces;
  double t = 0.0, d = 0.0, v = 0.0;
  for (const ProfilePhase& p : profile.phases) {
    Piece piece{t, 0.0, d, v, 0.0};
    double v_end = v;
    switch (p.kind) {
      case PhaseKind::Accelerate:
        piece.a = p.rate;
        piece.duration = (p.target_speed - v) / p.rate;
        v_end = p.target_speed;
        break;
      case PhaseKind::Brake:
        piece.a = -p.rate;
        piece.duration = (v - p.target_speed) / p.rate;
        v_end = p.target_speed;
        break;
      case PhaseKind::Cruise:
        piece.duration = p.distance / v;
        break;
      case PhaseKind::Stop:
        piece.duration = p.duration;
        break;
    }
    pieces.push_back(piece);
    d += v * piece.duration + 0.5 * piece.a * piece.duration * piece.duration;
    v = v_end;
    t += piece.duration;
  }
  return pieces;
}

struct Kinematics {
  double d = 0.0;
  double v = 0.0;
};

Kinematics evaluate(const std::vector<Piece>& pieces, double t) {
  auto it = std::upper_bound(pieces.begin(), pieces.end(), t,
                             [](double value, const Piece& p) { return value < p.t0; });
  const Piece& p = it == pieces.begin() ? pieces.front() : *(it - 1);
  const double tau = std::clamp(t - p.t0, 0.0, p.duration);
  return {p.d0 + p.v0 * tau + 0.5 * p.a * tau * tau, std::max(0.0, p.v0 + p.a * tau)};
}

}  // namespace

std::vector<TruthState> generate_truth(const TrackMap& map, const VelocityProfile& profile,
                                       double T) {
  if (!(T > 0.0)) invalid("T", "must be > 0");
  const std::vector<Piece> pieces = profile_pieces(profile);
  if (pieces.empty()) invalid("phase", "profile has no phases");
  const Piece& last = pieces.back();
  const double t_end = last.t0 + last.duration;
  const double distance = last.d0 + last.v0 * last.duration + 0.5 * last.a * last.duration * last.duration;
  if (profile.start_d + distance > map.length() + 1e-9) {
    std::ostringstream os;
    os << "profile covers " << profile.start_d + distance << " m but the map is "
       << map.length() << " m long";
    throw Error(ErrorCode::ProfileMismatch, os.str());
  }

  const auto samples = static_cast<std::size_t>(std::floor(t_end / T + 1e-9)) + 1;
  std::vector<TruthState> truth;
  truth.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * T;
    const Kinematics now = evaluate(pieces, t);
    TruthState s;
    s.t = t;
    s.d = map.front_d() + profile.start_d + now.d;
    s.v = now.v;
    const MapFeatures mu = map.lookup(std::min(s.d, map.back_d()));
    s.p_x = mu.p_x;
    s.p_y = mu.p_y;
    s.p_z = mu.p_z;
    s.kappa = mu.kappa;
    s.orientation = mu.orientation();
    truth.push_back(s);
  }
  // Mean acceleration over each interval, so that summing a * T reproduces v.
  for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
    truth[k].a = (truth[k + 1].v - truth[k].v) / T;
  }
  return truth;
}

SensorStreams synthesize_sensors(const std::vector<TruthState>& truth, const SensorSpec& spec,
                                 std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 imu_rng(derive_seed(seed, "imu"));
  std::mt19937_64 gnss_rng(derive_seed(seed, "gnss"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto stride = static_cast<std::size_t>(
      std::max(1.0, std::round(spec.imu_rate_hz / spec.gnss_rate_hz)));

  SensorStreams out;
  out.imu.reserve(truth.size());
  out.bias.reserve(truth.size());
  Eigen::Vector3d accel_drift = Eigen::Vector3d::Zero();
  Eigen::Vector3d gyro_drift = Eigen::Vector3d::Zero();
  auto draw3 = [&](std::mt19937_64& rng) {
    const double a = normal(rng);
    const double b = normal(rng);
    const double c = normal(rng);
    return Eigen::Vector3d(a, b, c);
  };

  for (std::size_t k = 0; k < truth.size(); ++k) {
    const TruthState& s = truth[k];
    if (k > 0) {
      accel_drift += spec.accel_drift_sigma * draw3(imu_rng);
      gyro_drift += spec.gyro_drift_sigma * draw3(imu_rng);
    }
    Eigen::Vector3d accel(s.a, lateral_accel_from_curvature(s.v, s.kappa), 0.0);
    accel += rotate_inverse(s.orientation, Eigen::Vector3d(0.0, 0.0, spec.g));
    Eigen::Vector3d gyro(0.0, 0.0, turn_rate_from_curvature(s.v, s.kappa));

    const double vibration =
        spec.vibration_sigma * std::min(1.0, std::abs(s.v) / spec.vibration_speed);
    accel.z() += vibration * normal(imu_rng);
    accel += spec.accel_noise.cwiseProduct(draw3(imu_rng)) + spec.accel_bias + accel_drift;
    gyro += spec.gyro_noise.cwiseProduct(draw3(imu_rng)) + spec.gyro_bias + gyro_drift;

    out.imu.push_back({s.t, accel, gyro});
    out.bias.push_back({spec.accel_bias.x() + accel_drift.x(), spec.accel_bias.y() + accel_drift.y(),
                        spec.gyro_bias.z() + gyro_drift.z()});

    if (k % stride == 0) {
      const Eigen::Vector3d noise = draw3(gnss_rng);
      if (!spec.in_outage(s.t)) {
        out.gnss.push_back({s.t, s.p_x + spec.sigma_px * noise.x(), s.p_y + spec.sigma_py * noise.y(),
                            std::abs(s.v) + spec.sigma_v * noise.z(), spec.sigma_px, spec.sigma_py,
                            spec.sigma_v});
      }
    }
  }
  return out;
}

Scenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  Scenario sc{spec, seed, generate_track(spec.track, spec.spacing, spec.build), {}, {}};
  sc.truth = generate_truth(sc.track.map, spec.profile, 1.0 / spec.sensors.imu_rate_hz);
  sc.sensors = synthesize_sensors(sc.truth, spec.sensors, derive_seed(seed, "sensors"));
  return sc;
}

namespace {

TrackSegment straight(double length, double grade = 0.0) {
  return {SegmentKind::Straight, length, 0.0, Turn::Left, grade};
}

TrackSegment clothoid(double length, double grade = 0.0) {
  return {SegmentKind::Clothoid, length, 0.0, Turn::Left, grade};
}

TrackSegment arc(double length, double radius, Turn turn, double grade = 0.0) {
  return {SegmentKind::Arc, length, radius, turn, grade};
}

// Builds a profile while tracking distance and speed, so that stops can be
// placed at absolute track positions.
class ProfileBuilder {
 public:
  explicit ProfileBuilder(double start_d) { profile_.start_d = start_d; }

  ProfileBuilder& stop(double duration) {
    profile_.phases.push_back({PhaseKind::Stop, 0.0, 0.0, 0.0, duration});
    return *this;
  }
  ProfileBuilder& accelerate(double target, double rate) {
    d_ += (target * target - v_ * v_) / (2.0 * rate);
    v_ = target;
    profile_.phases.push_back({PhaseKind::Accelerate, target, rate, 0.0, 0.0});
    return *this;
  }
  ProfileBuilder& brake(double target, double rate) {
    d_ += (v_ * v_ - target * target) / (2.0 * rate);
    v_ = target;
    profile_.phases.push_back({PhaseKind::Brake, target, rate, 0.0, 0.0});
    return *this;
  }
  ProfileBuilder& cruise_to(double d) {
    if (d > d_) profile_.phases.push_back({PhaseKind::Cruise, 0.0, 0.0, d - d_, 0.0});
    d_ = std::max(d_, d);
    return *this;
  }
  /// Cruise, then brake at `rate` so the train halts at track position d.
  ProfileBuilder& stop_at(double d, double rate, double dwell) {
    cruise_to(d - v_ * v_ / (2.0 * rate));
    brake(0.0, rate);
    return stop(dwell);
  }
  /// Cruise, then change speed so that `target` is reached at position d.
  ProfileBuilder& reach_speed_at(double d, double target, double rate) {
    cruise_to(d - std::abs(v_ * v_ - target * target) / (2.0 * rate));
    return target > v_ ? accelerate(target, rate) : brake(target, rate);
  }

  VelocityProfile build() const { return profile_; }

 private:
  VelocityProfile profile_;
  double d_ = 0.0;
  double v_ = 0.0;
};

// Route: many turns separated by short straights, with transition curves.
TrackSpec curvy_track() {
  TrackSpec t;
  const auto L = Turn::Left;
  const auto R = Turn::Right;
  t.segments = {
      straight(400.0, 0.002),
      clothoid(50.0), arc(300.0, 450.0, L, 0.004), clothoid(50.0),
      straight(150.0, 0.004),
      clothoid(60.0), arc(350.0, 380.0, R), clothoid(60.0),
      straight(100.0),
      clothoid(50.0), arc(420.0, 600.0, L, -0.003), clothoid(50.0),
      straight(220.0, -0.003),
      clothoid(50.0), arc(250.0, 320.0, R), clothoid(50.0),
      straight(120.0),
      clothoid(60.0), arc(380.0, 500.0, L, 0.005), clothoid(60.0),
      straight(300.0, 0.005),
      clothoid(50.0), arc(300.0, 420.0, R), clothoid(50.0),
      straight(180.0),
      clothoid(60.0), arc(450.0, 700.0, L, -0.002), clothoid(60.0),
      straight(150.0, -0.002),
      clothoid(50.0), arc(280.0, 350.0, R), clothoid(50.0),
      straight(250.0),
      clothoid(50.0), arc(350.0, 450.0, L), clothoid(50.0),
      straight(200.0, 0.003),
      clothoid(60.0), arc(400.0, 550.0, R, 0.003), clothoid(60.0),
      straight(500.0),
  };
  return t;
}

// Route dominated by long straights with two isolated curves.
TrackSpec straight_track() {
  TrackSpec t;
  t.segments = {
      straight(3000.0, 0.003),
      clothoid(80.0), arc(450.0, 600.0, Turn::Left), clothoid(80.0),
      straight(2600.0, -0.002),
      clothoid(60.0), arc(300.0, 800.0, Turn::Right), clothoid(60.0),
      straight(2000.0),
  };
  return t;
}

ScenarioSpec base_spec(std::string name, TrackSpec track) {
  ScenarioSpec spec;
  spec.name = std::move(name);
  spec.track = std::move(track);
  spec.spacing = 2.0;
  spec.build.id = spec.name;
  spec.sensors = SensorSpec{};
  return spec;
}

ScenarioSpec mixed_outages() {
  ScenarioSpec spec = base_spec("mixed-outages", curvy_track());
  spec.profile = ProfileBuilder(100.0)
                     .stop(20.0)
                     .accelerate(18.0, 0.5)
                     .stop_at(1500.0, 0.6, 20.0)
                     .accelerate(20.0, 0.5)
                     .stop_at(2900.0, 0.6, 25.0)
                     .accelerate(18.0, 0.5)
                     .stop_at(4200.0, 0.6, 20.0)
                     .accelerate(20.0, 0.5)
                     .stop_at(5500.0, 0.6, 20.0)
                     .accelerate(16.0, 0.5)
                     .stop_at(6800.0, 0.6, 15.0)
                     .build();
  spec.sensors.outages = {{45.0, 70.0},   {110.0, 145.0}, {185.0, 205.0}, {240.0, 255.0},
                          {300.0, 330.0}, {370.0, 395.0}, {430.0, 450.0}, {480.0, 498.0}};
  return spec;
}

ScenarioSpec straight_indefinite() {
  ScenarioSpec spec = base_spec("straight-indefinite", straight_track());
  spec.profile = ProfileBuilder(100.0)
                     .stop(20.0)
                     .accelerate(25.0, 0.5)
                     .stop_at(4300.0, 0.6, 30.0)
                     .accelerate(22.0, 0.5)
                     .stop_at(7700.0, 0.6, 20.0)
                     .accelerate(15.0, 0.5)
                     .stop_at(8400.0, 0.6, 20.0)
                     .build();
  spec.sensors.outages = {{50.0, std::numeric_limits<double>::infinity()}};
  return spec;
}

ScenarioSpec curvy_indefinite() {
  ScenarioSpec spec = base_spec("curvy-indefinite", curvy_track());
  spec.profile = ProfileBuilder(100.0)
                     .stop(20.0)
                     .accelerate(18.0, 0.5)
                     .stop_at(2600.0, 0.6, 25.0)
                     .accelerate(20.0, 0.5)
                     .stop_at(5000.0, 0.6, 20.0)
                     .accelerate(16.0, 0.5)
                     .stop_at(6800.0, 0.6, 15.0)
                     .build();
  spec.sensors.outages = {{50.0, std::numeric_limits<double>::infinity()}};
  return spec;
}

}  // namespace

std::vector<ScenarioSpec> preset_specs() {
  return {mixed_outages(), straight_indefinite(), curvy_indefinite()};
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const ScenarioSpec& s : preset_specs()) names.push_back(s.name);
  return names;
}

ScenarioSpec preset_spec(const std::string& name) {
  for (ScenarioSpec& s : preset_specs()) {
    if (s.name == name) return s;
  }
  std::string valid;
  for (const std::string& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::InvalidSpec, "unknown preset '" + name + "' (valid: " + valid + ")");
}

std::vector<Scenario> preset_scenarios(std::uint64_t seed) {
  std::vector<Scenario> out;
  for (const ScenarioSpec& s : preset_specs()) out.push_back(make_scenario(s, seed));
  return out;
}

}  // namespace railpf
