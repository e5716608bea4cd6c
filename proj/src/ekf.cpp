#include "railpf/ekf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "railpf/error.hpp"

namespace railpf {

void EkfConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(T > 0.0)) fail("T must be positive");
  if (!(sigma_ax >= 0.0) || !(sigma_wz >= 0.0)) fail("process sigmas must be >= 0");
  if (!(sigma_px > 0.0) || !(sigma_py > 0.0) || !(sigma_v > 0.0)) {
    fail("GNSS sigmas must be positive");
  }
  if (!(sigma_map > 0.0)) fail("sigma_map must be positive");
  if (!(gate > 0.0)) fail("gate must be positive");
  if (bias_window < 1) fail("bias_window must be >= 1");
  zvu.validate();
}

Eigen::Matrix4d make_psd(const Eigen::Matrix4d& P) {
  Eigen::Matrix4d sym = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(sym);
  if (es.eigenvalues().minCoeff() >= -1e-9) return sym;
  Eigen::Vector4d lambda = es.eigenvalues().cwiseMax(0.0);
  Eigen::Matrix4d fixed = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (fixed + fixed.transpose());
}

namespace {

using Complex = std::complex<double>;

// Moments J_m = int_0^T t^m exp(i w t) dt for m = 0..2.
struct Moments {
  Complex j0, j1, j2;
};

Moments turn_moments(double omega, double T) {
  const Complex c(0.0, omega);
  Moments m;
  if (std::abs(omega * T) < kCtraSeriesThreshold) {
    // Series in (i w): the closed form cancels catastrophically for small w T.
    Complex term(1.0, 0.0);
    m = {};
    for (int k = 0; k < 12; ++k) {
      const double tk = std::pow(T, k);
      m.j0 += term * tk * T / static_cast<double>(k + 1);
      m.j1 += term * tk * T * T / static_cast<double>(k + 2);
      m.j2 += term * tk * T * T * T / static_cast<double>(k + 3);
      term *= c / static_cast<double>(k + 1);
    }
    return m;
  }
  const Complex e = std::exp(c * T);
  m.j0 = (e - 1.0) / c;
  m.j1 = T * e / c - m.j0 / c;
  m.j2 = T * T * e / c - 2.0 * m.j1 / c;
  return m;
}

Eigen::Matrix4d joseph(const Eigen::Matrix4d& P, const Eigen::MatrixXd& K, const Eigen::MatrixXd& H,
                       const Eigen::MatrixXd& R) {
  const Eigen::Matrix4d I_KH = Eigen::Matrix4d::Identity() - K * H;
  return I_KH * P * I_KH.transpose() + K * R * K.transpose();
}

}  // namespace

EkfState ekf_predict(const EkfState& state, double a_x, double omega_z, double T,
                     const EkfConfig& cfg) {
  const double theta = state.heading();
  const double v = state.v();
  const Moments m = turn_moments(omega_z, T);
  const Complex rot = std::polar(1.0, theta);
  const Complex step = rot * (v * m.j0 + a_x * m.j1);
  const Complex d_dv = rot * m.j0;
  const Complex d_da = rot * m.j1;
  const Complex d_dw = rot * Complex(0.0, 1.0) * (v * m.j1 + a_x * m.j2);

  EkfState out;
  out.x(0) = state.x(0) + step.real();
  out.x(1) = state.x(1) + step.imag();
  out.x(2) = wrap_angle(theta + omega_z * T);
  out.x(3) = v + a_x * T;

  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = -step.imag();
  F(1, 2) = step.real();
  F(0, 3) = d_dv.real();
  F(1, 3) = d_dv.imag();

  Eigen::Matrix<double, 4, 2> G;
  G << d_da.real(), d_dw.real(),
       d_da.imag(), d_dw.imag(),
       0.0, T,
       T, 0.0;
  const Eigen::Vector2d q(cfg.sigma_ax * cfg.sigma_ax, cfg.sigma_wz * cfg.sigma_wz);
  out.P = make_psd(F * state.P * F.transpose() + G * q.asDiagonal() * G.transpose());
  return out;
}

EkfState ekf_update_gnss(const EkfState& state, const GnssSample& gnss, const EkfConfig& cfg) {
  double sx = cfg.sigma_px, sy = cfg.sigma_py, sv = cfg.sigma_v;
  if (cfg.gnss_sigma_from_receiver) {
    if (gnss.sigma_px > 0.0) sx = gnss.sigma_px;
    if (gnss.sigma_py > 0.0) sy = gnss.sigma_py;
    if (gnss.sigma_v > 0.0) sv = gnss.sigma_v;
  }
  Eigen::Matrix<double, 3, 4> H = Eigen::Matrix<double, 3, 4>::Zero();
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  H(2, 3) = 1.0;
  const Eigen::Vector3d z(gnss.p_x, gnss.p_y, gnss.v);
  const Eigen::Vector3d innovation = z - H * state.x;
  const Eigen::Matrix3d R = Eigen::Vector3d(sx * sx, sy * sy, sv * sv).asDiagonal();
  const Eigen::Matrix3d S = H * state.P * H.transpose() + R;
  const Eigen::Matrix<double, 4, 3> K = state.P * H.transpose() * S.inverse();

  EkfState out;
  out.x = state.x + K * innovation;
  out.x(2) = wrap_angle(out.x(2));
  out.P = make_psd(joseph(state.P, K, H, R));
  return out;
}

EkfState ekf_map_match(const EkfState& state, const TrackMap& map, double sigma_map,
                       double gate) {
  const TrackProjection proj = map.project({state.p_x(), state.p_y()});
  if (proj.distance > gate) {
    throw Error(ErrorCode::NoNearbyTrack,
                "nearest track " + std::to_string(proj.distance) + " m away, gate " +
                    std::to_string(gate) + " m");
  }
  const Eigen::Vector2d normal(-proj.tangent.y(), proj.tangent.x());
  Eigen::Matrix<double, 1, 4> H = Eigen::Matrix<double, 1, 4>::Zero();
  H(0, 0) = normal.x();
  H(0, 1) = normal.y();
  const double innovation = 0.0 - proj.across;
  const double R = sigma_map * sigma_map;
  const double S = (H * state.P * H.transpose())(0, 0) + R;
  const Eigen::Vector4d K = state.P * H.transpose() / S;

  EkfState out;
  out.x = state.x + K * innovation;
  out.x(2) = wrap_angle(out.x(2));
  out.P = make_psd(joseph(state.P, K, H, Eigen::Matrix<double, 1, 1>::Constant(R)));
  return out;
}

EkfSession::EkfSession(const TrackMap& map, EkfConfig cfg)
    : map_(map), cfg_(cfg), imu_(cfg.zvu, cfg.bias_window, cfg.g) {
  cfg_.validate();
}

void EkfSession::initialize(const GnssSample& fix) {
  const TrackProjection proj = map_.project({fix.p_x, fix.p_y});
  segment_hint_ = proj.segment;
  const double heading = map_.lookup(proj.d).theta_z;
  const double sx = fix.sigma_px > 0.0 ? fix.sigma_px : cfg_.sigma_px;
  const double sy = fix.sigma_py > 0.0 ? fix.sigma_py : cfg_.sigma_py;
  const double sv = fix.sigma_v > 0.0 ? fix.sigma_v : cfg_.sigma_v;
  const double heading_sigma = 1.0 * std::numbers::pi / 180.0;
  EkfState s;
  s.x << fix.p_x, fix.p_y, heading, fix.v;
  s.P = Eigen::Vector4d(sx * sx, sy * sy, heading_sigma * heading_sigma, sv * sv).asDiagonal();
  initialize(s);
}

void EkfSession::initialize(const EkfState& state) {
  state_ = state;
  initialized_ = true;
}

EkfStepResult EkfSession::step(const ImuSample& imu, const std::optional<GnssSample>& gnss) {
  if (!initialized_) {
    if (!gnss) throw Error(ErrorCode::InvalidConfig, "EKF stepped before initialization");
    initialize(*gnss);
  }
  double dt = cfg_.T;
  if (last_t_ && imu.t > *last_t_) dt = imu.t - *last_t_;
  last_t_ = imu.t;

  constexpr std::size_t kWindow = 20;
  const Eigen::Vector2d p0(state_.p_x(), state_.p_y());
  TrackProjection here = map_.project_near(p0, segment_hint_, kWindow);
  if (here.distance > cfg_.gate) here = map_.project(p0);
  segment_hint_ = here.segment;

  EkfStepResult result;
  const ProcessedImu processed = imu_.process(imu, map_.orientation_at(here.d));
  result.zvu = processed.standstill;
  if (result.zvu) {
    state_.x(3) = 0.0;
    state_.P.row(3).setZero();
    state_.P.col(3).setZero();
  } else {
    state_ = ekf_predict(state_, processed.filter_input.a_x, processed.filter_input.omega_z, dt,
                         cfg_);
  }
  if (gnss) state_ = ekf_update_gnss(state_, *gnss, cfg_);
  if (cfg_.map_match_every_step || gnss) {
    try {
      state_ = ekf_map_match(state_, map_, cfg_.sigma_map, cfg_.gate);
      result.map_matched = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoNearbyTrack) throw;
    }
  }

  const Eigen::Vector2d p(state_.p_x(), state_.p_y());
  TrackProjection after = map_.project_near(p, segment_hint_, kWindow);
  if (after.distance > cfg_.gate) after = map_.project(p);
  segment_hint_ = after.segment;
  result.state = state_;
  result.d = after.d;
  result.sigma_d = std::sqrt(std::max(0.0, (after.tangent.transpose() *
                                            state_.P.topLeftCorner<2, 2>() * after.tangent)(0, 0)));
  result.trace_P = state_.P.trace();
  return result;
}

}  // namespace railpf
