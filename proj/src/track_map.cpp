#include "railpf/track_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "railpf/error.hpp"

namespace railpf {

namespace {

constexpr double kChordSlack = 1e-6;

double blend_angle(double a, double b, double r) {
  return wrap_angle(a + r * wrap_angle(b - a));
}

bool finite_features(const MapFeatures& mu) {
  return std::isfinite(mu.p_x) && std::isfinite(mu.p_y) && std::isfinite(mu.p_z) &&
         std::isfinite(mu.kappa) && std::isfinite(mu.theta_x) && std::isfinite(mu.theta_y) &&
         std::isfinite(mu.theta_z);
}

}  // namespace

TrackMap::TrackMap(std::string id, std::vector<TrackPoint> points)
    : id_(std::move(id)), points_(std::move(points)) {
  if (points_.size() < 2) {
    throw Error(ErrorCode::TooFewPoints, "track map needs at least 2 points");
  }
  d_.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const TrackPoint& p = points_[i];
    if (!std::isfinite(p.d) || !finite_features(p.mu)) {
      throw Error(ErrorCode::DegenerateGeometry,
                  "non-finite map value at point " + std::to_string(i));
    }
    if (i > 0) {
      const TrackPoint& q = points_[i - 1];
      if (!(p.d > q.d)) {
        throw Error(ErrorCode::NonMonotoneParameter,
                    "map distance not strictly increasing at point " + std::to_string(i));
      }
      const double chord = (p.mu.position() - q.mu.position()).norm();
      if (chord > (p.d - q.d) + kChordSlack) {
        throw Error(ErrorCode::DegenerateGeometry,
                    "chord longer than along-track distance at point " + std::to_string(i));
      }
    }
    d_.push_back(p.d);
  }
}

std::size_t TrackMap::bracket(double d) const {
  // Index of the last point with d_i <= d, capped so that i + 1 is valid.
  auto it = std::upper_bound(d_.begin(), d_.end(), d);
  std::size_t i = static_cast<std::size_t>(it - d_.begin());
  i = i == 0 ? 0 : i - 1;
  return std::min(i, d_.size() - 2);
}

MapFeatures TrackMap::lookup(double d) const {
  if (!contains(d)) throw OutOfMapRangeError(d, front_d(), back_d());
  const std::size_t i = bracket(d);
  const MapFeatures& a = points_[i].mu;
  const MapFeatures& b = points_[i + 1].mu;
  const double r = (d - d_[i]) / (d_[i + 1] - d_[i]);
  if (r == 0.0) return a;
  if (r == 1.0) return b;
  const double s = 1.0 - r;
  MapFeatures out;
  out.p_x = s * a.p_x + r * b.p_x;
  out.p_y = s * a.p_y + r * b.p_y;
  out.p_z = s * a.p_z + r * b.p_z;
  out.kappa = s * a.kappa + r * b.kappa;
  out.theta_x = blend_angle(a.theta_x, b.theta_x, r);
  out.theta_y = blend_angle(a.theta_y, b.theta_y, r);
  out.theta_z = blend_angle(a.theta_z, b.theta_z, r);
  return out;
}

void TrackMap::lookup_plane(double d, double& p_x, double& p_y, double& kappa) const {
  const std::size_t i = bracket(d);
  const MapFeatures& a = points_[i].mu;
  const MapFeatures& b = points_[i + 1].mu;
  const double r = (d - d_[i]) / (d_[i + 1] - d_[i]);
  const double s = 1.0 - r;
  p_x = s * a.p_x + r * b.p_x;
  p_y = s * a.p_y + r * b.p_y;
  kappa = s * a.kappa + r * b.kappa;
}

Orientation TrackMap::orientation_at(double d) const {
  return lookup(d).orientation();
}

TrackProjection TrackMap::project_range(const Eigen::Vector2d& p, std::size_t first,
                                        std::size_t last) const {
  TrackProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < last; ++i) {
    const Eigen::Vector2d a = points_[i].mu.position();
    const Eigen::Vector2d b = points_[i + 1].mu.position();
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Eigen::Vector2d foot = a + s * ab;
    const double dist = (p - foot).norm();
    if (dist < best.distance) {
      best.distance = dist;
      best.segment = i;
      best.foot = foot;
      best.tangent = len2 > 0.0 ? Eigen::Vector2d(ab / std::sqrt(len2)) : best.tangent;
      best.d = d_[i] + s * (d_[i + 1] - d_[i]);
    }
  }
  const Eigen::Vector2d offset = p - best.foot;
  best.across = best.tangent.x() * offset.y() - best.tangent.y() * offset.x();
  return best;
}

TrackProjection TrackMap::project(const Eigen::Vector2d& p) const {
  return project_range(p, 0, points_.size() - 1);
}

TrackProjection TrackMap::project_near(const Eigen::Vector2d& p, std::size_t hint,
                                       std::size_t window) const {
  const std::size_t segments = points_.size() - 1;
  const std::size_t first = hint > window ? hint - window : 0;
  const std::size_t last = std::min(segments, hint + window + 1);
  return project_range(p, first, last);
}

namespace {

// Inserts original indices so that no knot gap exceeds max_gap in d, and so
// that at least four knots exist.
std::vector<std::size_t> densify_knots(const std::vector<std::size_t>& kept,
                                       const std::vector<double>& d, double max_gap) {
  std::vector<std::size_t> knots;
  for (std::size_t k = 0; k + 1 < kept.size(); ++k) {
    const std::size_t a = kept[k];
    const std::size_t b = kept[k + 1];
    knots.push_back(a);
    const double gap = d[b] - d[a];
    if (max_gap > 0.0 && gap > max_gap) {
      const auto pieces = static_cast<std::size_t>(std::ceil(gap / max_gap));
      std::size_t cursor = a;
      for (std::size_t j = 1; j < pieces; ++j) {
        const double target = d[a] + gap * static_cast<double>(j) / static_cast<double>(pieces);
        while (cursor + 1 < b && d[cursor + 1] <= target) ++cursor;
        if (cursor > knots.back() && cursor < b) knots.push_back(cursor);
      }
    }
  }
  knots.push_back(kept.back());

  if (knots.size() < 4) {
    const std::size_t n = d.size();
    for (std::size_t j = 0; j < 4; ++j) knots.push_back(j * (n - 1) / 3);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  }
  return knots;
}

}  // namespace

TrackMap build_map(std::span<const RawTrackPoint> raw, const BuildOptions& options) {
  if (raw.size() < 4) {
    throw Error(ErrorCode::TooFewPoints,
                "map needs at least 4 raw points, got " + std::to_string(raw.size()));
  }
  std::vector<RawTrackPoint> pts;
  pts.reserve(raw.size());
  for (const RawTrackPoint& p : raw) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.roll)) {
      throw Error(ErrorCode::DegenerateGeometry, "non-finite raw coordinate");
    }
    if (!pts.empty() && pts.back().x == p.x && pts.back().y == p.y) continue;
    pts.push_back(p);
  }
  if (pts.size() < 4) {
    throw Error(ErrorCode::DegenerateGeometry,
                "fewer than 4 distinct points after removing duplicates");
  }

  std::vector<Eigen::Vector2d> xy;
  xy.reserve(pts.size());
  for (const RawTrackPoint& p : pts) xy.emplace_back(p.x, p.y);
  const std::vector<double> d = arc_length(xy);

  const std::vector<std::size_t> knots =
      densify_knots(simplify_rdp_indices(xy, options.rdp_epsilon), d, options.max_knot_spacing);
  std::vector<CurveSample> samples;
  samples.reserve(knots.size());
  for (std::size_t i : knots) samples.push_back({d[i], xy[i].x(), xy[i].y()});
  const PlaneCurve curve = fit_spline(samples);

  const std::size_t n = pts.size();
  const std::size_t w = std::max<std::size_t>(1, options.orientation_smoothing_window);
  std::vector<TrackPoint> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > w ? i - w : 0;
    const std::size_t hi = std::min(n - 1, i + w);
    TrackPoint tp;
    tp.d = d[i];
    tp.mu.p_x = pts[i].x;
    tp.mu.p_y = pts[i].y;
    tp.mu.p_z = pts[i].z;
    tp.mu.kappa = curvature_at(curve, d[i]);
    tp.mu.theta_x = wrap_angle(pts[i].roll);
    tp.mu.theta_y = std::atan2(pts[hi].z - pts[lo].z, d[hi] - d[lo]);
    tp.mu.theta_z = heading_at(curve, d[i]);
    points.push_back(tp);
  }
  return TrackMap(options.id, std::move(points));
}

}  // namespace railpf
