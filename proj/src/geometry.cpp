#include "railpf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>

#include "railpf/error.hpp"

namespace railpf {

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

namespace {

// Natural-spline second derivatives via the Thomas algorithm.
std::vector<double> natural_second_derivatives(const std::vector<double>& t,
                                               const std::vector<double>& f) {
  const std::size_t n = t.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;

  const std::size_t inner = n - 2;
  std::vector<double> diag(inner), upper(inner), rhs(inner);
  for (std::size_t k = 0; k < inner; ++k) {
    const std::size_t i = k + 1;
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    diag[k] = 2.0 * (h0 + h1);
    upper[k] = h1;
    rhs[k] = 6.0 * ((f[i + 1] - f[i]) / h1 - (f[i] - f[i - 1]) / h0);
  }
  // Forward sweep; the sub-diagonal entry of row k is h_{k} = t[k+1] - t[k].
  for (std::size_t k = 1; k < inner; ++k) {
    const double lower = t[k + 1] - t[k];
    const double w = lower / diag[k - 1];
    diag[k] -= w * upper[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  m[inner] = rhs[inner - 1] / diag[inner - 1];
  for (std::size_t k = inner - 1; k-- > 0;) {
    m[k + 1] = (rhs[k] - upper[k] * m[k + 2]) / diag[k];
  }
  return m;
}

}  // namespace

PlaneCurve fit_spline(std::span<const CurveSample> points) {
  if (points.size() < 4) {
    throw Error(ErrorCode::TooFewPoints,
                "spline needs at least 4 points, got " + std::to_string(points.size()));
  }
  PlaneCurve curve;
  curve.d_.reserve(points.size());
  curve.x_.reserve(points.size());
  curve.y_.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && !(points[i].d > points[i - 1].d)) {
      throw Error(ErrorCode::NonMonotoneParameter,
                  "spline parameter not strictly increasing at index " + std::to_string(i));
    }
    curve.d_.push_back(points[i].d);
    curve.x_.push_back(points[i].x);
    curve.y_.push_back(points[i].y);
  }
  curve.mx_ = natural_second_derivatives(curve.d_, curve.x_);
  curve.my_ = natural_second_derivatives(curve.d_, curve.y_);
  return curve;
}

std::size_t PlaneCurve::interval(double d) const {
  if (!(d >= d_.front() && d <= d_.back())) {
    std::ostringstream os;
    os.precision(17);
    os << "curve parameter " << d << " outside [" << d_.front() << ", " << d_.back() << "]";
    throw Error(ErrorCode::OutOfRange, os.str());
  }
  auto it = std::upper_bound(d_.begin(), d_.end(), d);
  std::size_t i = static_cast<std::size_t>(it - d_.begin());
  if (i == 0) i = 1;
  if (i >= d_.size()) i = d_.size() - 1;
  return i - 1;
}

Eigen::Vector2d PlaneCurve::position(double d) const {
  const std::size_t i = interval(d);
  const double h = d_[i + 1] - d_[i];
  const double a = (d_[i + 1] - d) / h;
  const double b = (d - d_[i]) / h;
  const double c = h * h / 6.0;
  auto eval = [&](const std::vector<double>& f, const std::vector<double>& m) {
    return a * f[i] + b * f[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * c;
  };
  return {eval(x_, mx_), eval(y_, my_)};
}

Eigen::Vector2d PlaneCurve::first_derivative(double d) const {
  const std::size_t i = interval(d);
  const double h = d_[i + 1] - d_[i];
  const double a = (d_[i + 1] - d) / h;
  const double b = (d - d_[i]) / h;
  auto eval = [&](const std::vector<double>& f, const std::vector<double>& m) {
    return (f[i + 1] - f[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m[i] +
           (3.0 * b * b - 1.0) / 6.0 * h * m[i + 1];
  };
  return {eval(x_, mx_), eval(y_, my_)};
}

Eigen::Vector2d PlaneCurve::second_derivative(double d) const {
  const std::size_t i = interval(d);
  const double h = d_[i + 1] - d_[i];
  const double a = (d_[i + 1] - d) / h;
  const double b = (d - d_[i]) / h;
  return {a * mx_[i] + b * mx_[i + 1], a * my_[i] + b * my_[i + 1]};
}

double curvature_at(const PlaneCurve& curve, double d) {
  const Eigen::Vector2d p1 = curve.first_derivative(d);
  const Eigen::Vector2d p2 = curve.second_derivative(d);
  const double speed2 = p1.squaredNorm();
  if (speed2 == 0.0) return 0.0;
  return (p1.x() * p2.y() - p1.y() * p2.x()) / std::pow(speed2, 1.5);
}

double heading_at(const PlaneCurve& curve, double d) {
  const Eigen::Vector2d p1 = curve.first_derivative(d);
  return std::atan2(p1.y(), p1.x());
}

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

std::vector<std::size_t> simplify_rdp_indices(std::span<const Eigen::Vector2d> points,
                                              double epsilon) {
  const std::size_t n = points.size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  if (n < 3 || epsilon <= 0.0) return all;

  std::vector<bool> keep(n, false);
  keep.front() = keep.back() = true;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    if (last <= first + 1) continue;
    double worst = -1.0;
    std::size_t worst_index = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double dist = point_segment_distance(points[i], points[first], points[last]);
      if (dist > worst) {
        worst = dist;
        worst_index = i;
      }
    }
    if (worst > epsilon) {
      keep[worst_index] = true;
      stack.emplace_back(first, worst_index);
      stack.emplace_back(worst_index, last);
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) kept.push_back(i);
  }
  return kept;
}

std::vector<Eigen::Vector2d> simplify_rdp(std::span<const Eigen::Vector2d> points,
                                          double epsilon) {
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i : simplify_rdp_indices(points, epsilon)) out.push_back(points[i]);
  return out;
}

std::vector<double> arc_length(std::span<const Eigen::Vector2d> points) {
  std::vector<double> d;
  d.reserve(points.size());
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0) total += (points[i] - points[i - 1]).norm();
    d.push_back(total);
  }
  return d;
}

Orientation::Orientation(double roll_rad, double pitch_rad, double yaw_rad)
    : roll(wrap_angle(roll_rad)), pitch(wrap_angle(pitch_rad)), yaw(wrap_angle(yaw_rad)) {}

Eigen::Matrix3d rotation_matrix(const Orientation& o) {
  const double cr = std::cos(o.roll), sr = std::sin(o.roll);
  const double cp = std::cos(o.pitch), sp = std::sin(o.pitch);
  const double cy = std::cos(o.yaw), sy = std::sin(o.yaw);

  Eigen::Matrix3d rz;
  rz << cy, -sy, 0.0,
        sy, cy, 0.0,
        0.0, 0.0, 1.0;
  // Rotation about +y by -pitch: a climbing forward axis gains +z.
  Eigen::Matrix3d ry;
  ry << cp, 0.0, -sp,
        0.0, 1.0, 0.0,
        sp, 0.0, cp;
  Eigen::Matrix3d rx;
  rx << 1.0, 0.0, 0.0,
        0.0, cr, -sr,
        0.0, sr, cr;
  return rz * ry * rx;
}

Eigen::Vector3d rotate(const Orientation& o, const Eigen::Vector3d& v) {
  return rotation_matrix(o) * v;
}

Eigen::Vector3d rotate_inverse(const Orientation& o, const Eigen::Vector3d& v) {
  return rotation_matrix(o).transpose() * v;
}

}  // namespace railpf
