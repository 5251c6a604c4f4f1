#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "isac/errors.hpp"
#include "isac/model.hpp"

namespace isac {

using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Relative threshold below which r_bar - l*cos(theta_L) counts as zero.
inline constexpr double kBaselineTolerance = 1e-9;

struct LocalObservables {
  bool bistatic = false;
  double delay = 0.0;    // s
  double doa = 0.0;      // rad, in the Rx frame
  double doppler = 0.0;  // Hz
  double range_tx = 0.0;  // m, Tx -> target (equals range_rx for monostatic)
  double range_rx = 0.0;  // m, target -> Rx
  // bistatic only
  double baseline = 0.0;        // l
  double bistatic_range = 0.0;  // r_bar
  double beta = 0.0;            // direction Rx -> Tx, global frame
  double shift = 0.0;           // orientation_rx - beta
  double look_angle = 0.0;      // doa + shift
  bool on_baseline = false;
};

inline Mat2 jac_rotation(double orientation) {
  const double c = std::cos(orientation), s = std::sin(orientation);
  Mat2 j;
  j << c, s, -s, c;
  return j;
}

inline Vec2 global_to_local(const Vec2& p, const Node& node) {
  return jac_rotation(node.orientation) * (p - node.position);
}

inline Vec2 local_to_global(const Vec2& p_local, const Node& node) {
  return jac_rotation(node.orientation).transpose() * p_local + node.position;
}

namespace detail {

inline double checked_range(const Vec2& d) {
  const double r = d.norm();
  if (!(r > 0.0)) throw BoundsError(ErrorCode::singular_geometry, "target coincides with a node");
  return r;
}

inline double checked_doa(const Vec2& p, const Node& rx) {
  const Vec2 pl = global_to_local(p, rx);
  const double doa = std::atan2(pl.y(), pl.x());
  if (!(std::abs(doa) < kPi / 2)) {
    throw BoundsError(ErrorCode::out_of_field, "target behind the array of '" + rx.id + "'");
  }
  return doa;
}

}  // namespace detail

inline LocalObservables mono_observables(const Node& node, const TargetState& t, double wavelength) {
  const Vec2 d = t.position - node.position;
  const double r = detail::checked_range(d);
  LocalObservables o;
  o.range_tx = o.range_rx = r;
  o.delay = 2.0 * r / kSpeedOfLight;
  o.doa = detail::checked_doa(t.position, node);
  o.doppler = 2.0 / wavelength * d.dot(t.velocity) / r;
  return o;
}

inline LocalObservables bis_observables(const Node& tx, const Node& rx, const TargetState& t, double wavelength) {
  const Vec2 dt = t.position - tx.position;
  const Vec2 dn = t.position - rx.position;
  const double rt = detail::checked_range(dt);
  const double rn = detail::checked_range(dn);
  LocalObservables o;
  o.bistatic = true;
  o.range_tx = rt;
  o.range_rx = rn;
  o.delay = (rt + rn) / kSpeedOfLight;
  o.doa = detail::checked_doa(t.position, rx);
  o.doppler = (t.velocity.dot(dt) / rt + t.velocity.dot(dn) / rn) / wavelength;
  const Vec2 b = tx.position - rx.position;
  o.baseline = b.norm();
  o.bistatic_range = rt + rn;
  o.beta = o.baseline > 0.0 ? std::atan2(b.y(), b.x()) : 0.0;
  o.shift = wrap_angle(rx.orientation - o.beta);
  o.look_angle = wrap_angle(o.doa + o.shift);
  const double denom = o.bistatic_range - o.baseline * std::cos(o.look_angle);
  o.on_baseline = denom <= kBaselineTolerance * o.bistatic_range;
  return o;
}

/// Rx distance on the bistatic ellipse given the measured DoA.
inline double bistatic_range_to_distance(double r_bar, double l, double look_angle) {
  if (!(l >= 0.0) || !(r_bar > l)) {
    throw BoundsError(ErrorCode::invalid_bistatic_range, "bistatic range must exceed the baseline");
  }
  return (r_bar * r_bar - l * l) / (2.0 * (r_bar - l * std::cos(look_angle)));
}

/// d(tau, theta_R)/d(x_n, y_n) with tau = 2r/c.
inline Mat2 jac_mono_position(const Vec2& p_local) {
  const double r2 = p_local.squaredNorm();
  if (!(r2 > 0.0)) throw BoundsError(ErrorCode::singular_geometry, "zero range");
  const double r = std::sqrt(r2);
  const double x = p_local.x(), y = p_local.y();
  Mat2 j;
  j << 2.0 / kSpeedOfLight * x / r, 2.0 / kSpeedOfLight * y / r, -y / r2, x / r2;
  return j;
}

/// d(x_n, y_n)/d(tau, theta_R) for a bistatic pair with tau = r_bar/c.
inline Mat2 jac_bis_position(const LocalObservables& o) {
  const double l = o.baseline, rb = o.bistatic_range;
  const double D = rb - l * std::cos(o.look_angle);
  if (!(D > kBaselineTolerance * rb)) {
    throw BoundsError(ErrorCode::singular_geometry, "target on the bistatic baseline");
  }
  const double Q = l * l + rb * rb - 2.0 * l * rb * std::cos(o.look_angle);
  const double den = 2.0 * D * D;
  const double c = kSpeedOfLight;
  Mat2 j;
  j(0, 0) = c * std::cos(o.doa) * Q / den;
  j(0, 1) = (l * l - rb * rb) * (rb * std::sin(o.doa) + l * std::sin(o.shift)) / den;
  j(1, 0) = c * std::sin(o.doa) * Q / den;
  j(1, 1) = (l * l - rb * rb) * (l * std::cos(o.shift) - rb * std::cos(o.doa)) / den;
  return j;
}

/// Rows [f_D; tau; theta_R], columns [x; y; v_x; v_y], global frame offsets.
inline Mat34 jac_mono_state(const Node& node, const TargetState& t, double wavelength) {
  const Vec2 d = t.position - node.position;
  const double r = detail::checked_range(d);
  const double x = d.x(), y = d.y(), vx = t.velocity.x(), vy = t.velocity.y();
  const double r2 = r * r, r3 = r2 * r;
  const double k = 2.0 / wavelength;
  Mat34 j;
  j << k * y * (-x * vy + y * vx) / r3, k * x * (x * vy - y * vx) / r3, k * x / r, k * y / r,
      2.0 / kSpeedOfLight * x / r, 2.0 / kSpeedOfLight * y / r, 0.0, 0.0,
      -y / r2, x / r2, 0.0, 0.0;
  return j;
}

inline Mat34 jac_bis_state(const Node& tx, const Node& rx, const TargetState& t, double wavelength) {
  const Vec2 dt = t.position - tx.position;
  const Vec2 dn = t.position - rx.position;
  const double rt = detail::checked_range(dt), rn = detail::checked_range(dn);
  const double xt = dt.x(), yt = dt.y(), xn = dn.x(), yn = dn.y();
  const double vx = t.velocity.x(), vy = t.velocity.y();
  const double rt3 = rt * rt * rt, rn3 = rn * rn * rn;
  const double il = 1.0 / wavelength;
  Mat34 j;
  j(0, 0) = il * (yt * (yt * vx - xt * vy) / rt3 + yn * (yn * vx - xn * vy) / rn3);
  j(0, 1) = il * (xt * (xt * vy - yt * vx) / rt3 + xn * (xn * vy - yn * vx) / rn3);
  j(0, 2) = il * (xt / rt + xn / rn);
  j(0, 3) = il * (yt / rt + yn / rn);
  j(1, 0) = (xt / rt + xn / rn) / kSpeedOfLight;
  j(1, 1) = (yt / rt + yn / rn) / kSpeedOfLight;
  j(1, 2) = j(1, 3) = 0.0;
  j(2, 0) = -yn / (rn * rn);
  j(2, 1) = xn / (rn * rn);
  j(2, 2) = j(2, 3) = 0.0;
  return j;
}

/// d(v_x, v_y)/d(|v|, angle v).
inline Mat2 jac_polar_velocity(const Vec2& v) {
  const double s = v.norm();
  if (!(s > 0.0)) throw BoundsError(ErrorCode::undefined_heading, "heading undefined for zero velocity");
  const double a = std::atan2(v.y(), v.x());
  Mat2 j;
  j << std::cos(a), -s * std::sin(a), std::sin(a), s * std::cos(a);
  return j;
}

}  // namespace isac
