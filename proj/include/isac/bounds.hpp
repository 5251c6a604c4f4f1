#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isac/errors.hpp"
#include "isac/fisher.hpp"
#include "isac/geom.hpp"
#include "isac/link.hpp"
#include "isac/model.hpp"

namespace isac {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
using Mat4 = Eigen::Matrix4d;

// ---------------------------------------------------------------------------
// Power and link enumeration

/// Sensing power (W) a transmitting node spends, after the scenario's power policy.
inline double effective_sensing_power(const Scenario& s, const Node& tx) {
  if (tx.sensing_power) return *tx.sensing_power;
  const double full = s.params.default_sensing_power();
  if (s.power_policy == PowerPolicy::normalized_total) {
    const auto n = s.transmitter_count();
    return n > 0 ? full / static_cast<double>(n) : full;
  }
  return full;
}

struct LinkRef {
  const Node* tx = nullptr;
  const Node* rx = nullptr;

  bool monostatic() const { return tx == rx; }
  std::string id() const { return monostatic() ? rx->id : tx->id + ">" + rx->id; }
};

/// Every monostatic node is a link with itself; every rx node pairs with its tx.
inline std::vector<LinkRef> enumerate_links(const Scenario& s) {
  std::vector<LinkRef> out;
  for (const auto& n : s.nodes) {
    if (n.role == Role::monostatic) out.push_back({&n, &n});
    if (n.role == Role::rx) {
      const Node* tx = s.find(n.tx_id);
      if (tx == nullptr) throw BoundsError(ErrorCode::invalid_argument, "rx '" + n.id + "' has no tx");
      out.push_back({tx, &n});
    }
  }
  return out;
}

/// Everything the bound formulas need for one link and one target.
struct LinkState {
  LinkRef ref;
  LinkGeometry geometry;
  LocalObservables obs;
  double sensing_power = 0.0;
  LinkSnr snr;
  Eigen::Vector3d efim;  // diagonal EFIM over [f_D, tau, theta_R]
};

/// Throws singular-geometry / out-of-field for links that cannot observe the target.
inline LinkState analyze_link(const SystemParams& p, const Node& tx, const Node& rx, const TargetState& t,
                              double sensing_power) {
  LinkState ls;
  ls.ref = {&tx, &rx};
  ls.sensing_power = sensing_power;
  const double lambda = p.wavelength();
  if (&tx == &rx) {
    ls.obs = mono_observables(rx, t, lambda);
    ls.geometry = LinkGeometry::monostatic(ls.obs.range_rx, ls.obs.doa);
  } else {
    ls.obs = bis_observables(tx, rx, t, lambda);
    const Vec2 pt = global_to_local(t.position, tx);
    ls.geometry = LinkGeometry::bistatic(ls.obs.range_tx, ls.obs.range_rx, ls.obs.doa, std::atan2(pt.y(), pt.x()));
  }
  ls.snr = link_snr(p, ls.geometry, t.rcs, sensing_power);
  ls.efim = efim_local_diagonal(p, ls.geometry, t.rcs, sensing_power);
  return ls;
}

// ---------------------------------------------------------------------------
// Closed-form single-link PEBs

inline double peb_mono_closed(const SystemParams& p, const Node& node, const TargetState& t,
                              std::optional<double> sensing_power = std::nullopt) {
  const auto o = mono_observables(node, t, p.wavelength());
  const auto g = LinkGeometry::monostatic(o.range_rx, o.doa);
  const FrameDerived f = derive_frame(p);
  const double snr = link_snr(p, g, t.rcs, sensing_power).snr;
  const double K = f.K, M = f.M, NR = p.n_rx_ant, df = p.subcarrier_spacing, c = kSpeedOfLight;
  const double r = o.range_rx, cos2 = std::cos(o.doa) * std::cos(o.doa);
  const double crlb = 6.0 * f.eta / (kPi * kPi * K * M * NR * snr) *
                      (c * c / 16.0 / (df * df * (K * K - 1)) + r * r / ((NR * NR - 1) * cos2));
  return std::sqrt(crlb);
}

/// Returns +inf when the target sits on the Tx-Rx baseline.
inline double peb_bis_closed(const SystemParams& p, const Node& tx, const Node& rx, const TargetState& t,
                             std::optional<double> sensing_power = std::nullopt) {
  const auto o = bis_observables(tx, rx, t, p.wavelength());
  if (o.on_baseline) return kInf;
  const auto g = LinkGeometry::bistatic(o.range_tx, o.range_rx, o.doa);
  const FrameDerived f = derive_frame(p);
  const double snr = link_snr(p, g, t.rcs, sensing_power).snr;
  const double K = f.K, M = f.M, NR = p.n_rx_ant, df = p.subcarrier_spacing, c = kSpeedOfLight;
  const double l = o.baseline, rb = o.bistatic_range, cl = std::cos(o.look_angle);
  const double cos2 = std::cos(o.doa) * std::cos(o.doa);
  const double Q = l * l + rb * rb - 2.0 * l * rb * cl;
  const double D = rb - l * cl;
  const double crlb = 3.0 * f.eta * Q / (8.0 * kPi * kPi * snr * NR * K * M * std::pow(D, 4)) *
                      (c * c * Q / (df * df * (K * K - 1)) +
                       4.0 * (l * l - rb * rb) * (l * l - rb * rb) / ((NR * NR - 1) * cos2));
  return std::sqrt(crlb);
}

// ---------------------------------------------------------------------------
// Per-link information in the global frame

struct PositionContribution {
  Mat2 efim = Mat2::Zero();
  bool forward_fallback = false;  // printed inverse Jacobian was singular
};

/// Jacobian^T * EFIM(tau, theta) * Jacobian with the Jacobian taken w.r.t. global (x, y).
inline PositionContribution link_position_efim(const LinkState& ls, const TargetState& t) {
  const Mat2 E = ls.efim.tail<2>().asDiagonal();
  const Node& rx = *ls.ref.rx;
  const Mat2 R = jac_rotation(rx.orientation);
  PositionContribution out;
  Mat2 J;
  if (ls.ref.monostatic()) {
    J = jac_mono_position(global_to_local(t.position, rx)) * R;
  } else if (!ls.obs.on_baseline) {
    J = jac_bis_position(ls.obs).inverse() * R;
  } else {
    // printed inverse is undefined on the baseline; use the forward map directly
    const Mat34 js = jac_bis_state(*ls.ref.tx, rx, t, 1.0);
    J = js.block<2, 2>(1, 0);
    out.forward_fallback = true;
  }
  out.efim = J.transpose() * E * J;
  out.efim = 0.5 * (out.efim + out.efim.transpose());
  return out;
}

/// Closed-form rank-one velocity EFIM of one link.
inline Mat2 node_velocity_efim(const SystemParams& p, const LinkState& ls, const TargetState& t) {
  const FrameDerived f = derive_frame(p);
  const double K = f.K, M = f.M, NR = p.n_rx_ant, Ts = p.symbol_duration, df = p.subcarrier_spacing;
  const double lambda = p.wavelength(), c = kSpeedOfLight, eta = f.eta;
  const double snr = ls.snr.snr;
  const double cos2 = std::cos(ls.obs.doa) * std::cos(ls.obs.doa);
  const double vx = t.velocity.x(), vy = t.velocity.y();
  const Vec2 dn = t.position - ls.ref.rx->position;
  const double xn = dn.x(), yn = dn.y();

  if (ls.ref.monostatic()) {
    const double r = ls.obs.range_rx;
    const double cross = xn * vy - yn * vx;
    const double k = 8.0 * snr * NR * K * M * kPi * kPi * Ts * Ts * (M * M - 1) * (NR * NR - 1) * cos2 /
                     (eta * (48.0 * (M * M - 1) * Ts * Ts * cross * cross +
                             3.0 * (NR * NR - 1) * r * r * lambda * lambda * cos2));
    return k * dn * dn.transpose();
  }

  const Vec2 dt = t.position - ls.ref.tx->position;
  const double xt = dt.x(), yt = dt.y();
  const double rt = ls.obs.range_tx, rn = ls.obs.range_rx;
  const double A = 2.0 * kPi * kPi * df * df * Ts * Ts * snr * K * (K * K - 1) * M * (M * M - 1) * NR *
                   (NR * NR - 1) / eta;
  const double cn = vy * xn - vx * yn;
  const double ct = vy * xt - vx * yt;
  const double dot = xn * xt + yn * yt;
  const double u1 = std::pow(rt, 4) * cn * (xn * xn + yn * yn) + rn * std::pow(rt, 3) * cn * dot +
                    std::pow(rn, 3) * rt * ct * dot + std::pow(rn, 4) * ct * (xt * xt + yt * yt);
  const double cr = xt * yn - xn * yt;
  const double lin = rt * xn * xn + rn * xn * xt + rt * yn * yn + rn * yn * yt;
  const double u2 = c * c * Ts * Ts * (M * M - 1) * rn * rn * ct * ct * cr * cr +
                    lambda * lambda * df * df * (K * K - 1) * std::pow(rt, 4) * lin * lin;
  const double num_base = rt * (xn * xn + yn * yn) + rn * dot;
  const double k = A * std::pow(rt, 4) * cos2 * num_base * num_base /
                   (12.0 * df * df * Ts * Ts * (K * K - 1) * (M * M - 1) * u1 * u1 +
                    3.0 * (NR * NR - 1) * rn * rn * rt * rt * cos2 * u2);
  const Vec2 w(rt * xn + rn * xt, rt * yn + rn * yt);
  return k * w * w.transpose();
}

/// J_Omega^T * EFIM(f_D, tau, theta) * J_Omega over (x, y, v_x, v_y).
inline Mat4 link_state_efim(const SystemParams& p, const LinkState& ls, const TargetState& t) {
  const double lambda = p.wavelength();
  const Mat34 J = ls.ref.monostatic() ? jac_mono_state(*ls.ref.rx, t, lambda)
                                      : jac_bis_state(*ls.ref.tx, *ls.ref.rx, t, lambda);
  Mat4 m = J.transpose() * ls.efim.asDiagonal() * J;
  return 0.5 * (m + m.transpose());
}

// ---------------------------------------------------------------------------
// Polar velocity bounds from an aggregated velocity EFIM

struct VelocityBounds {
  double crlb_speed = kInf;    // (m/s)^2
  double crlb_heading = kInf;  // rad^2
  bool singular = true;

  double veb() const { return std::sqrt(crlb_speed); }
};

inline VelocityBounds polar_velocity_bounds(const Mat2& V, const Vec2& v) {
  if (!(v.norm() > 0.0)) throw BoundsError(ErrorCode::undefined_heading, "heading undefined for zero velocity");
  VelocityBounds out;
  if (is_singular_2x2(V)) return out;
  const double a = std::atan2(v.y(), v.x());
  const double ca = std::cos(a), sa = std::sin(a), s2a = std::sin(2.0 * a);
  const double vxx = V(0, 0), vyy = V(1, 1), vxy = 0.5 * (V(0, 1) + V(1, 0));
  const double det = vxx * vyy - vxy * vxy;
  out.crlb_speed = (vyy * ca * ca + vxx * sa * sa - vxy * s2a) / det;
  out.crlb_heading = (vxx * ca * ca + vyy * sa * sa + vxy * s2a) / (det * v.squaredNorm());
  out.singular = false;
  return out;
}

// ---------------------------------------------------------------------------
// Network evaluation

struct LinkReport {
  std::string id;
  std::string tx_id;
  std::string rx_id;
  bool contributes = false;
  double snr_db = -kInf;
  Mat2 position_efim = Mat2::Zero();
  Mat2 velocity_efim = Mat2::Zero();
};

struct BoundReport {
  double peb = kInf;
  double veb = kInf;
  double veb_exact = kInf;
  double crlb_heading = kInf;
  Mat2 position_efim = Mat2::Zero();
  Mat2 velocity_efim = Mat2::Zero();
  Mat4 state_efim = Mat4::Zero();
  std::vector<LinkReport> per_node;
  std::vector<std::string> flags;

  std::size_t contributing_links() const {
    std::size_t n = 0;
    for (const auto& l : per_node) n += l.contributes ? 1 : 0;
    return n;
  }
  bool has_flag(const std::string& prefix) const {
    for (const auto& f : flags)
      if (f.rfind(prefix, 0) == 0) return true;
    return false;
  }
};

namespace detail {

struct NetworkLinks {
  std::vector<LinkState> links;
  std::vector<LinkReport> reports;
  std::vector<std::string> flags;
};

inline NetworkLinks collect_links(const Scenario& s, const TargetState& t) {
  NetworkLinks out;
  for (const auto& ref : enumerate_links(s)) {
    LinkReport rep;
    rep.id = ref.id();
    rep.tx_id = ref.tx->id;
    rep.rx_id = ref.rx->id;
    try {
      LinkState ls = analyze_link(s.params, *ref.tx, *ref.rx, t, effective_sensing_power(s, *ref.tx));
      ls.ref = ref;
      rep.contributes = true;
      rep.snr_db = linear_to_db(ls.snr.snr);
      if (ls.obs.on_baseline) out.flags.push_back("on-baseline:" + rep.id);
      out.links.push_back(ls);
    } catch (const BoundsError& e) {
      if (e.code() != ErrorCode::out_of_field && e.code() != ErrorCode::singular_geometry) throw;
      out.flags.push_back(std::string(to_string(e.code())) + ":" + rep.id);
    }
    out.reports.push_back(rep);
  }
  return out;
}

inline LinkReport& report_for(NetworkLinks& n, const LinkState& ls) {
  const std::string id = ls.ref.id();
  for (auto& r : n.reports)
    if (r.id == id) return r;
  throw BoundsError(ErrorCode::invalid_argument, "unknown link " + id);
}

}  // namespace detail

/// Full evaluation: PEB, approximate and exact VEB, heading CRLB, per-link breakdown.
/// Singular information yields +inf plus a flag rather than an exception.
inline BoundReport evaluate(const Scenario& s, const TargetState& t) {
  auto net = detail::collect_links(s, t);
  BoundReport rep;
  rep.flags = net.flags;
  if (net.links.empty()) {
    rep.per_node = net.reports;
    throw BoundsError(ErrorCode::no_information, "no link observes the target");
  }
  for (const auto& ls : net.links) {
    auto& lr = detail::report_for(net, ls);
    const auto pc = link_position_efim(ls, t);
    if (pc.forward_fallback) rep.flags.push_back("forward-jacobian:" + lr.id);
    lr.position_efim = pc.efim;
    lr.velocity_efim = node_velocity_efim(s.params, ls, t);
    rep.position_efim += pc.efim;
    rep.velocity_efim += lr.velocity_efim;
    rep.state_efim += link_state_efim(s.params, ls, t);
  }
  rep.per_node = net.reports;

  if (is_singular_2x2(rep.position_efim)) {
    rep.flags.push_back("singular-position-efim");
  } else {
    rep.peb = std::sqrt(rep.position_efim.inverse().trace());
  }

  if (!(t.speed() > 0.0)) {
    rep.flags.push_back("undefined-heading");
    rep.veb = rep.veb_exact = rep.crlb_heading = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  const auto vb = polar_velocity_bounds(rep.velocity_efim, t.velocity);
  if (vb.singular) rep.flags.push_back("singular-velocity-efim");
  rep.veb = vb.veb();
  rep.crlb_heading = vb.crlb_heading;

  const Mat2 Ipp = rep.state_efim.topLeftCorner<2, 2>();
  if (is_singular_2x2(Ipp)) {
    rep.flags.push_back("singular-state-efim");
  } else {
    const Mat2 Vex = rep.state_efim.bottomRightCorner<2, 2>() -
                     rep.state_efim.bottomLeftCorner<2, 2>() * Ipp.inverse() * rep.state_efim.topRightCorner<2, 2>();
    const auto ve = polar_velocity_bounds(0.5 * (Vex + Vex.transpose()), t.velocity);
    if (ve.singular) rep.flags.push_back("singular-exact-velocity-efim");
    rep.veb_exact = ve.veb();
  }
  return rep;
}

inline FisherMatrix network_position_efim(const Scenario& s, const TargetState& t,
                                          std::vector<std::string>* flags = nullptr) {
  auto net = detail::collect_links(s, t);
  if (net.links.empty()) throw BoundsError(ErrorCode::no_information, "no link observes the target");
  Mat2 sum = Mat2::Zero();
  for (const auto& ls : net.links) {
    const auto pc = link_position_efim(ls, t);
    if (pc.forward_fallback) net.flags.push_back("forward-jacobian:" + ls.ref.id());
    sum += pc.efim;
  }
  if (flags) flags->insert(flags->end(), net.flags.begin(), net.flags.end());
  return FisherMatrix({"x", "y"}, sum);
}

inline double network_peb(const Scenario& s, const TargetState& t, std::vector<std::string>* flags = nullptr) {
  const auto I = network_position_efim(s, t, flags);
  const Mat2 m = I.values;
  if (is_singular_2x2(m)) {
    if (flags) flags->push_back("singular-position-efim");
    return kInf;
  }
  return std::sqrt(m.inverse().trace());
}

struct VelocityResult {
  double veb = kInf;
  double crlb_heading = kInf;
  Mat2 efim = Mat2::Zero();
};

inline VelocityResult network_velocity_bounds(const Scenario& s, const TargetState& t,
                                              std::vector<std::string>* flags = nullptr) {
  if (!(t.speed() > 0.0)) throw BoundsError(ErrorCode::undefined_heading, "heading undefined for zero velocity");
  auto net = detail::collect_links(s, t);
  if (net.links.empty()) throw BoundsError(ErrorCode::no_information, "no link observes the target");
  VelocityResult out;
  for (const auto& ls : net.links) out.efim += node_velocity_efim(s.params, ls, t);
  const auto vb = polar_velocity_bounds(out.efim, t.velocity);
  if (vb.singular) net.flags.push_back("singular-velocity-efim");
  out.veb = vb.veb();
  out.crlb_heading = vb.crlb_heading;
  if (flags) flags->insert(flags->end(), net.flags.begin(), net.flags.end());
  return out;
}

inline double network_velocity_bounds_exact(const Scenario& s, const TargetState& t,
                                            std::vector<std::string>* flags = nullptr) {
  if (!(t.speed() > 0.0)) throw BoundsError(ErrorCode::undefined_heading, "heading undefined for zero velocity");
  auto net = detail::collect_links(s, t);
  if (net.links.empty()) throw BoundsError(ErrorCode::no_information, "no link observes the target");
  Mat4 sum = Mat4::Zero();
  for (const auto& ls : net.links) sum += link_state_efim(s.params, ls, t);
  double veb = kInf;
  const Mat2 Ipp = sum.topLeftCorner<2, 2>();
  if (is_singular_2x2(Ipp)) {
    net.flags.push_back("singular-state-efim");
  } else {
    Mat2 V = sum.bottomRightCorner<2, 2>() - sum.bottomLeftCorner<2, 2>() * Ipp.inverse() * sum.topRightCorner<2, 2>();
    const auto vb = polar_velocity_bounds(0.5 * (V + V.transpose()), t.velocity);
    if (vb.singular) net.flags.push_back("singular-exact-velocity-efim");
    veb = vb.veb();
  }
  if (flags) flags->insert(flags->end(), net.flags.begin(), net.flags.end());
  return veb;
}

}  // namespace isac
