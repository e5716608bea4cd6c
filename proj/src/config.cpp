#include "railpf/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include "railpf/error.hpp"
#include "railpf/io.hpp"

namespace railpf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::InvalidConfig, key + ": expected " + want + ", got '" + value + "'");
}

std::optional<double> to_double(std::string_view text) {
  text = trim(text);
  double out = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return out;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& source) {
  KeyValues kv;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::Parse, source + " line " + std::to_string(line_no) + ": " + what);
    };
    // Strip a comment that is not inside a quoted string.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') fail("tables are not supported");
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (value.empty()) fail("missing value for '" + key + "'");
    std::string stored;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') fail("unterminated string for '" + key + "'");
      stored = std::string(value.substr(1, value.size() - 2));
    } else {
      stored = std::string(value);
    }
    if (kv.values_.count(key)) fail("duplicate key '" + key + "'");
    kv.values_[key] = stored;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  return parse(read_text(path), path.string());
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  const auto d = to_double(*v);
  if (!d) bad_value(key, *v, "a number");
  return *d;
}

std::uint64_t KeyValues::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (v->empty() || res.ec != std::errc() || res.ptr != v->data() + v->size()) {
    bad_value(key, *v, "a non-negative integer");
  }
  return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true") return true;
  if (*v == "false") return false;
  bad_value(key, *v, "true or false");
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

void KeyValues::set(const std::string& key, double value) { values_[key] = format_number(value); }

void KeyValues::merge(const KeyValues& other, const std::string& prefix) {
  for (const auto& [k, v] : other.values_) values_[prefix + k] = v;
}

std::string KeyValues::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    const bool bare = v == "true" || v == "false" || to_double(v).has_value();
    out += k + " = " + (bare ? v : "\"" + v + "\"") + "\n";
  }
  return out;
}

void KeyValues::reject_unused(const std::string& source) const {
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) throw Error(ErrorCode::InvalidConfig, source + ": unknown key '" + k + "'");
  }
}

namespace {

void read_zvu(const KeyValues& kv, ZvuConfig& z) {
  z.window_samples = kv.get_uint("zvu_window", z.window_samples);
  z.accel_variance_threshold = kv.get_double("zvu_accel_variance", z.accel_variance_threshold);
  z.rate_threshold = kv.get_double("zvu_rate", z.rate_threshold);
}

void write_zvu(KeyValues& kv, const ZvuConfig& z) {
  kv.set("zvu_window", static_cast<std::uint64_t>(z.window_samples));
  kv.set("zvu_accel_variance", z.accel_variance_threshold);
  kv.set("zvu_rate", z.rate_threshold);
}

}  // namespace

FilterConfig filter_config_from(const KeyValues& kv) {
  FilterConfig c;
  c.n_particles = kv.get_uint("n_particles", c.n_particles);
  c.n_threshold = kv.get_uint("n_threshold", kv.has("n_particles") ? c.n_particles / 2 : c.n_threshold);
  c.T = kv.get_double("T", c.T);
  c.sigma_u = kv.get_double("sigma_u", kv.get_double("sigma_ax", c.sigma_u));
  c.sigma_ax = kv.get_double("sigma_ax", c.sigma_ax);
  c.sigma_ay = kv.get_double("sigma_ay", c.sigma_ay);
  c.sigma_wz = kv.get_double("sigma_wz", c.sigma_wz);
  c.sigma_bias = kv.get_double("sigma_bias", c.sigma_bias);
  c.sigma_px = kv.get_double("sigma_px", c.sigma_px);
  c.sigma_py = kv.get_double("sigma_py", c.sigma_py);
  c.sigma_v = kv.get_double("sigma_v", c.sigma_v);
  c.g = kv.get_double("g", c.g);
  c.gnss_sigma_from_receiver = kv.get_bool("gnss_sigma_from_receiver", c.gnss_sigma_from_receiver);
  c.curve_resample = kv.get_bool("curve_resample", c.curve_resample);
  c.curve_threshold = kv.get_double("curve_threshold", c.curve_threshold);
  const std::string est = kv.get_string("estimator", "weighted_mean");
  if (est == "weighted_mean") {
    c.estimator = Estimator::WeightedMean;
  } else if (est == "max_weight") {
    c.estimator = Estimator::MaxWeight;
  } else {
    bad_value("estimator", est, "weighted_mean or max_weight");
  }
  read_zvu(kv, c.zvu);
  c.bias_window = kv.get_uint("bias_window", c.bias_window);
  c.validate();
  return c;
}

KeyValues to_keyvalues(const FilterConfig& c) {
  KeyValues kv;
  kv.set("n_particles", static_cast<std::uint64_t>(c.n_particles));
  kv.set("n_threshold", static_cast<std::uint64_t>(c.n_threshold));
  kv.set("T", c.T);
  kv.set("sigma_u", c.sigma_u);
  kv.set("sigma_ax", c.sigma_ax);
  kv.set("sigma_ay", c.sigma_ay);
  kv.set("sigma_wz", c.sigma_wz);
  kv.set("sigma_bias", c.sigma_bias);
  kv.set("sigma_px", c.sigma_px);
  kv.set("sigma_py", c.sigma_py);
  kv.set("sigma_v", c.sigma_v);
  kv.set("g", c.g);
  kv.set("gnss_sigma_from_receiver", c.gnss_sigma_from_receiver);
  kv.set("curve_resample", c.curve_resample);
  kv.set("curve_threshold", c.curve_threshold);
  kv.set("estimator", c.estimator == Estimator::WeightedMean ? "weighted_mean" : "max_weight");
  write_zvu(kv, c.zvu);
  kv.set("bias_window", static_cast<std::uint64_t>(c.bias_window));
  return kv;
}

EkfConfig ekf_config_from(const KeyValues& kv) {
  EkfConfig c;
  c.T = kv.get_double("T", c.T);
  c.sigma_ax = kv.get_double("sigma_ax", c.sigma_ax);
  c.sigma_wz = kv.get_double("sigma_wz", c.sigma_wz);
  c.sigma_px = kv.get_double("sigma_px", c.sigma_px);
  c.sigma_py = kv.get_double("sigma_py", c.sigma_py);
  c.sigma_v = kv.get_double("sigma_v", c.sigma_v);
  c.sigma_map = kv.get_double("sigma_map", c.sigma_map);
  c.gate = kv.get_double("gate", c.gate);
  c.map_match_every_step = kv.get_bool("map_match_every_step", c.map_match_every_step);
  c.gnss_sigma_from_receiver = kv.get_bool("gnss_sigma_from_receiver", c.gnss_sigma_from_receiver);
  c.g = kv.get_double("g", c.g);
  read_zvu(kv, c.zvu);
  c.bias_window = kv.get_uint("bias_window", c.bias_window);
  c.validate();
  return c;
}

KeyValues to_keyvalues(const EkfConfig& c) {
  KeyValues kv;
  kv.set("T", c.T);
  kv.set("sigma_ax", c.sigma_ax);
  kv.set("sigma_wz", c.sigma_wz);
  kv.set("sigma_px", c.sigma_px);
  kv.set("sigma_py", c.sigma_py);
  kv.set("sigma_v", c.sigma_v);
  kv.set("sigma_map", c.sigma_map);
  kv.set("gate", c.gate);
  kv.set("map_match_every_step", c.map_match_every_step);
  kv.set("gnss_sigma_from_receiver", c.gnss_sigma_from_receiver);
  kv.set("g", c.g);
  write_zvu(kv, c.zvu);
  kv.set("bias_window", static_cast<std::uint64_t>(c.bias_window));
  return kv;
}

std::optional<Prior> prior_from(const KeyValues& kv) {
  const std::string kind = kv.get_string("prior", "gnss");
  if (kind == "gnss") return std::nullopt;
  if (kind == "gaussian") {
    GaussianPrior p;
    p.d_mean = kv.get_double("prior_d", 0.0);
    p.d_sigma = kv.get_double("prior_d_sigma", 10.0);
    p.v_mean = kv.get_double("prior_v", 0.0);
    p.v_sigma = kv.get_double("prior_v_sigma", 0.5);
    return p;
  }
  if (kind == "uniform") {
    UniformPrior p;
    p.d_min = kv.get_double("prior_d_min", -std::numeric_limits<double>::infinity());
    p.d_max = kv.get_double("prior_d_max", std::numeric_limits<double>::infinity());
    p.v_mean = kv.get_double("prior_v", 0.0);
    p.v_sigma = kv.get_double("prior_v_sigma", 0.5);
    return p;
  }
  bad_value("prior", kind, "gnss, gaussian or uniform");
}

namespace {

// Collects `prefix.N` keys as an index-ordered list; indices must run 0..n-1.
std::vector<std::string> indexed(const KeyValues& kv, const std::string& prefix) {
  std::map<std::size_t, std::string> found;
  for (const auto& [k, v] : kv.values()) {
    if (k.rfind(prefix + ".", 0) != 0) continue;
    const std::string idx = k.substr(prefix.size() + 1);
    std::size_t n = 0;
    const auto res = std::from_chars(idx.data(), idx.data() + idx.size(), n);
    if (idx.empty() || res.ec != std::errc() || res.ptr != idx.data() + idx.size()) {
      throw Error(ErrorCode::InvalidSpec, k + ": index must be a non-negative integer");
    }
    found[n] = *kv.get(k);
  }
  std::vector<std::string> out;
  for (const auto& [n, v] : found) {
    if (n != out.size()) {
      throw Error(ErrorCode::InvalidSpec,
                  prefix + "." + std::to_string(out.size()) + ": missing (indices must be contiguous from 0)");
    }
    out.push_back(v);
  }
  return out;
}

// Parses "kind key=value ..." into a kind and a field map.
std::pair<std::string, std::map<std::string, double>> fields(const std::string& path,
                                                             const std::string& text,
                                                             std::map<std::string, std::string>* words_out) {
  const auto w = words(text);
  if (w.empty()) throw Error(ErrorCode::InvalidSpec, path + ": empty entry");
  std::map<std::string, double> out;
  for (std::size_t i = 1; i < w.size(); ++i) {
    const std::size_t eq = w[i].find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidSpec, path + ": expected key=value, got '" + w[i] + "'");
    const std::string key = w[i].substr(0, eq);
    const std::string value = w[i].substr(eq + 1);
    if (words_out && (key == "turn")) {
      (*words_out)[key] = value;
      continue;
    }
    const auto d = to_double(value);
    if (!d) throw Error(ErrorCode::InvalidSpec, path + "." + key + ": not a number: '" + value + "'");
    out[key] = *d;
  }
  return {w[0], out};
}

void check_keys(const std::string& path, const std::map<std::string, double>& f,
                std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : f) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw Error(ErrorCode::InvalidSpec, path + "." + k + ": unknown field");
  }
}

double field(const std::map<std::string, double>& f, const char* key, double fallback) {
  auto it = f.find(key);
  return it == f.end() ? fallback : it->second;
}

Eigen::Vector3d vec3(const KeyValues& kv, const std::string& key, const Eigen::Vector3d& fallback) {
  const auto v = kv.get(key);
  if (!v) return fallback;
  const auto w = words(*v);
  std::vector<double> vals;
  for (const std::string& s : w) {
    const auto d = to_double(s);
    if (!d) throw Error(ErrorCode::InvalidSpec, key + ": not a number: '" + s + "'");
    vals.push_back(*d);
  }
  if (vals.size() == 1) return Eigen::Vector3d::Constant(vals[0]);
  if (vals.size() == 3) return {vals[0], vals[1], vals[2]};
  throw Error(ErrorCode::InvalidSpec, key + ": expected 1 or 3 numbers");
}

std::string vec3_text(const Eigen::Vector3d& v) {
  return format_number(v.x()) + " " + format_number(v.y()) + " " + format_number(v.z());
}

const char* segment_kind_name(SegmentKind k) {
  switch (k) {
    case SegmentKind::Straight: return "straight";
    case SegmentKind::Arc: return "arc";
    case SegmentKind::Clothoid: return "clothoid";
  }
  return "straight";
}

}  // namespace

ScenarioSpec scenario_spec_from(const KeyValues& kv) {
  ScenarioSpec spec;
  spec.name = kv.get_string("name", "custom");
  spec.spacing = kv.get_double("spacing", spec.spacing);
  spec.build.id = spec.name;
  spec.build.rdp_epsilon = kv.get_double("rdp_epsilon", spec.build.rdp_epsilon);
  spec.build.max_knot_spacing = kv.get_double("max_knot_spacing", spec.build.max_knot_spacing);
  spec.build.orientation_smoothing_window =
      kv.get_uint("orientation_smoothing_window", spec.build.orientation_smoothing_window);
  spec.track.start_x = kv.get_double("start_x", 0.0);
  spec.track.start_y = kv.get_double("start_y", 0.0);
  spec.track.start_z = kv.get_double("start_z", 0.0);
  spec.track.start_heading = kv.get_double("start_heading", 0.0);

  const auto segs = indexed(kv, "segment");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string path = "segment." + std::to_string(i);
    std::map<std::string, std::string> extra;
    const auto [kind, f] = fields(path, segs[i], &extra);
    TrackSegment s;
    if (kind == "straight") {
      s.kind = SegmentKind::Straight;
      check_keys(path, f, {"length", "grade"});
    } else if (kind == "arc") {
      s.kind = SegmentKind::Arc;
      check_keys(path, f, {"length", "radius", "grade"});
    } else if (kind == "clothoid") {
      s.kind = SegmentKind::Clothoid;
      check_keys(path, f, {"length", "grade"});
    } else {
      throw Error(ErrorCode::InvalidSpec, path + ".kind: unknown segment kind '" + kind + "'");
    }
    s.length = field(f, "length", 0.0);
    s.radius = field(f, "radius", 0.0);
    s.grade = field(f, "grade", 0.0);
    const std::string turn = extra.count("turn") ? extra["turn"] : "left";
    if (turn != "left" && turn != "right") {
      throw Error(ErrorCode::InvalidSpec, path + ".turn: expected left or right");
    }
    s.turn = turn == "left" ? Turn::Left : Turn::Right;
    spec.track.segments.push_back(s);
  }

  spec.profile.start_d = kv.get_double("start_d", 0.0);
  const auto phases = indexed(kv, "phase");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string path = "phase." + std::to_string(i);
    const auto [kind, f] = fields(path, phases[i], nullptr);
    ProfilePhase p;
    if (kind == "accelerate" || kind == "brake") {
      p.kind = kind == "accelerate" ? PhaseKind::Accelerate : PhaseKind::Brake;
      check_keys(path, f, {"target", "rate"});
    } else if (kind == "cruise") {
      p.kind = PhaseKind::Cruise;
      check_keys(path, f, {"distance"});
    } else if (kind == "stop") {
      p.kind = PhaseKind::Stop;
      check_keys(path, f, {"duration"});
    } else {
      throw Error(ErrorCode::InvalidSpec, path + ".kind: unknown phase kind '" + kind + "'");
    }
    p.target_speed = field(f, "target", 0.0);
    p.rate = field(f, "rate", 0.0);
    p.distance = field(f, "distance", 0.0);
    p.duration = field(f, "duration", 0.0);
    spec.profile.phases.push_back(p);
  }

  SensorSpec& s = spec.sensors;
  s.imu_rate_hz = kv.get_double("imu_rate_hz", s.imu_rate_hz);
  s.accel_noise = vec3(kv, "accel_noise", s.accel_noise);
  s.gyro_noise = vec3(kv, "gyro_noise", s.gyro_noise);
  s.accel_bias = vec3(kv, "accel_bias", s.accel_bias);
  s.gyro_bias = vec3(kv, "gyro_bias", s.gyro_bias);
  s.accel_drift_sigma = kv.get_double("accel_drift_sigma", s.accel_drift_sigma);
  s.gyro_drift_sigma = kv.get_double("gyro_drift_sigma", s.gyro_drift_sigma);
  s.vibration_sigma = kv.get_double("vibration_sigma", s.vibration_sigma);
  s.vibration_speed = kv.get_double("vibration_speed", s.vibration_speed);
  s.gnss_rate_hz = kv.get_double("gnss_rate_hz", s.gnss_rate_hz);
  s.sigma_px = kv.get_double("sigma_px", s.sigma_px);
  s.sigma_py = kv.get_double("sigma_py", s.sigma_py);
  s.sigma_v = kv.get_double("sigma_v", s.sigma_v);
  s.g = kv.get_double("g", s.g);
  const auto outages = indexed(kv, "outage");
  for (std::size_t i = 0; i < outages.size(); ++i) {
    const auto w = words(outages[i]);
    const auto a = w.size() == 2 ? to_double(w[0]) : std::nullopt;
    const auto b = w.size() == 2 ? to_double(w[1]) : std::nullopt;
    if (!a || !b) {
      throw Error(ErrorCode::InvalidSpec, "outage." + std::to_string(i) + ": expected 'start end'");
    }
    s.outages.push_back({*a, *b});
  }

  spec.track.validate();
  spec.profile.validate();
  spec.sensors.validate();
  if (!(spec.spacing > 0.0)) throw Error(ErrorCode::InvalidSpec, "spacing: must be > 0");
  return spec;
}

KeyValues to_keyvalues(const ScenarioSpec& spec) {
  KeyValues kv;
  kv.set("name", spec.name);
  kv.set("spacing", spec.spacing);
  kv.set("rdp_epsilon", spec.build.rdp_epsilon);
  kv.set("max_knot_spacing", spec.build.max_knot_spacing);
  kv.set("orientation_smoothing_window", static_cast<std::uint64_t>(spec.build.orientation_smoothing_window));
  kv.set("start_x", spec.track.start_x);
  kv.set("start_y", spec.track.start_y);
  kv.set("start_z", spec.track.start_z);
  kv.set("start_heading", spec.track.start_heading);
  for (std::size_t i = 0; i < spec.track.segments.size(); ++i) {
    const TrackSegment& s = spec.track.segments[i];
    std::string text = std::string(segment_kind_name(s.kind)) + " length=" + format_number(s.length);
    if (s.kind == SegmentKind::Arc) {
      text += " radius=" + format_number(s.radius) + " turn=" + (s.turn == Turn::Left ? "left" : "right");
    }
    text += " grade=" + format_number(s.grade);
    kv.set("segment." + std::to_string(i), text);
  }
  kv.set("start_d", spec.profile.start_d);
  for (std::size_t i = 0; i < spec.profile.phases.size(); ++i) {
    const ProfilePhase& p = spec.profile.phases[i];
    std::string text;
    switch (p.kind) {
      case PhaseKind::Accelerate:
      case PhaseKind::Brake:
        text = std::string(p.kind == PhaseKind::Accelerate ? "accelerate" : "brake") +
               " target=" + format_number(p.target_speed) + " rate=" + format_number(p.rate);
        break;
      case PhaseKind::Cruise: text = "cruise distance=" + format_number(p.distance); break;
      case PhaseKind::Stop: text = "stop duration=" + format_number(p.duration); break;
    }
    kv.set("phase." + std::to_string(i), text);
  }
  const SensorSpec& s = spec.sensors;
  kv.set("imu_rate_hz", s.imu_rate_hz);
  kv.set("accel_noise", vec3_text(s.accel_noise));
  kv.set("gyro_noise", vec3_text(s.gyro_noise));
  kv.set("accel_bias", vec3_text(s.accel_bias));
  kv.set("gyro_bias", vec3_text(s.gyro_bias));
  kv.set("accel_drift_sigma", s.accel_drift_sigma);
  kv.set("gyro_drift_sigma", s.gyro_drift_sigma);
  kv.set("vibration_sigma", s.vibration_sigma);
  kv.set("vibration_speed", s.vibration_speed);
  kv.set("gnss_rate_hz", s.gnss_rate_hz);
  kv.set("sigma_px", s.sigma_px);
  kv.set("sigma_py", s.sigma_py);
  kv.set("sigma_v", s.sigma_v);
  kv.set("g", s.g);
  for (std::size_t i = 0; i < s.outages.size(); ++i) {
    kv.set("outage." + std::to_string(i), format_number(s.outages[i].start) + " " + format_number(s.outages[i].end));
  }
  return kv;
}

}  // namespace railpf
