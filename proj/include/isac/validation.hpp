#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isac/bounds.hpp"
#include "isac/geom.hpp"
#include "isac/link.hpp"
#include "isac/model.hpp"
#include "isac/oracle.hpp"

// Oracle checks shared by the `validate` command and the acceptance binary.

namespace isac::validation {

struct CheckResult {
  std::string name;
  double worst = 0.0;      // worst observed error measure
  double tolerance = 0.0;  // pass iff worst <= tolerance
  std::size_t samples = 0;
  std::string note;

  bool pass() const { return std::isfinite(worst) && worst <= tolerance; }
};

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// max |A - N| after equilibrating rows and columns of N by their largest entries,
/// so mixed units (seconds next to metres) do not hide errors.
inline double scaled_max_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& N) {
  const Eigen::Index r = N.rows(), c = N.cols();
  Eigen::VectorXd rs(r), cs(c);
  for (Eigen::Index i = 0; i < r; ++i) rs(i) = std::max(N.row(i).cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index j = 0; j < c; ++j) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) m = std::max(m, std::abs(N(i, j)) / rs(i));
    cs(j) = std::max(m, 1e-300);
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) worst = std::max(worst, std::abs(A(i, j) - N(i, j)) / (rs(i) * cs(j)));
  return worst;
}

// ---------------------------------------------------------------------------
// Random draws

struct LinkCase {
  SystemParams params;
  LinkGeometry geometry;
  double rcs = 1.0;
  double phase = 0.0;
  double doppler = 0.0;
};

inline SystemParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  SystemParams p;
  p.n_tx_ant = pick(1, 64);
  p.n_rx_ant = pick(2, 128);
  const bool full = u(rng) < 0.5;
  p.active_subcarriers = full ? 3168 : pick(8, 1024);
  p.symbols_per_frame = full ? 1120 : pick(8, 512);
  p.frac_subcarriers = 0.2 + 0.8 * u(rng);
  p.frac_symbols = 0.2 + 0.8 * u(rng);
  p.carrier_freq = 2e9 + 70e9 * u(rng);
  p.subcarrier_spacing = 15e3 * std::pow(2.0, pick(0, 4));
  p.symbol_duration = 1.07 / p.subcarrier_spacing;
  p.total_power = 0.01 + 10.0 * u(rng);
  const char* cons[] = {"qpsk", "16qam", "64qam", "256qam"};
  p.constellation = ConstellationSpec::by_name(cons[pick(0, 3)]);
  return p;
}

inline LinkCase random_link_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LinkCase c;
  c.params = random_params(rng);
  const double doa = (2.0 * u(rng) - 1.0) * 1.3;
  const double rt = 2.0 + 300.0 * u(rng), rr = 2.0 + 300.0 * u(rng);
  const double dod = (2.0 * u(rng) - 1.0) * 1.3;
  const double offset = u(rng) < 0.5 ? 0.0 : (2.0 * u(rng) - 1.0) * 0.05;
  c.geometry = u(rng) < 0.5 ? LinkGeometry::monostatic(rt, doa, offset) : LinkGeometry::bistatic(rt, rr, doa, dod, offset);
  c.rcs = 0.01 + 10.0 * u(rng);
  c.phase = (2.0 * u(rng) - 1.0) * kPi;
  c.doppler = (2.0 * u(rng) - 1.0) * 5000.0;
  return c;
}

struct BistaticCase {
  Node tx, rx;
  TargetState target;
};

/// Tx, Rx and target a few metres apart, target in front of the Rx and off the baseline.
inline BistaticCase random_bistatic_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 100.0), v(-30.0, 30.0), a(-kPi, kPi), o(-1.2, 1.2);
  for (;;) {
    const Vec2 st(u(rng), u(rng)), sn(u(rng), u(rng)), p(u(rng), u(rng));
    if ((st - sn).norm() < 3 || (p - st).norm() < 3 || (p - sn).norm() < 3) continue;
    const Vec2 d = p - sn;
    const double ori = std::atan2(d.y(), d.x()) + o(rng);
    BistaticCase c{Node::transmitter("t", st, a(rng)), Node::receiver("r", sn, ori, "t"),
                   TargetState::at(p, Vec2(v(rng), v(rng)))};
    const auto obs = bis_observables(c.tx, c.rx, c.target, 0.01);
    if (obs.bistatic_range - obs.baseline < 0.5) continue;
    if (obs.bistatic_range - obs.baseline * std::cos(obs.look_angle) < 1e-3 * obs.bistatic_range) continue;
    return c;
  }
}

// ---------------------------------------------------------------------------
// Checks

/// Analytic 5x5 FIM against the finite-difference Gaussian FIM.
inline CheckResult check_fim_oracle(std::size_t draws = 200, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  double worst_nz = 0.0, worst_zero = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto c = random_link_case(rng);
    const auto A = fim_single_link(c.params, c.geometry, c.rcs).values;
    const auto m = oracle::MeanSignalModel::from_link(c.params, c.geometry, c.rcs, c.phase, c.doppler);
    const auto N = oracle::fim_numeric(m).values;
    const double norm = N.norm();
    for (Eigen::Index r = 0; r < 5; ++r) {
      for (Eigen::Index k = 0; k < 5; ++k) {
        if (A(r, k) == 0.0) {
          worst_zero = std::max(worst_zero, std::abs(N(r, k)) / norm);
        } else {
          worst_nz = std::max(worst_nz, rel_diff(A(r, k), N(r, k)));
        }
      }
    }
  }
  CheckResult out{"fim_vs_oracle", std::max(worst_nz, worst_zero), 1e-5, draws, ""};
  out.note = "nonzero rel " + sci(worst_nz) + ", zero-pattern " + sci(worst_zero);
  return out;
}

/// Closed-form scalar CRLBs against the diagonal of the inverted FIM.
inline CheckResult check_scalar_crlbs(std::size_t draws = 200, std::uint64_t seed = 2) {
  std::mt19937_64 rng(seed);
  double worst = 0.0, worst_phi = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto c = random_link_case(rng);
    const Eigen::MatrixXd inv = invert(fim_single_link(c.params, c.geometry, c.rcs));
    const auto s = scalar_crlbs(c.params, c.geometry, c.rcs);
    worst = std::max({worst, rel_diff(s.alpha, inv(0, 0)), rel_diff(s.fd, inv(2, 2)), rel_diff(s.tau, inv(3, 3)),
                      rel_diff(s.theta, inv(4, 4))});
    worst_phi = std::max(worst_phi, rel_diff(s.phi, inv(1, 1)));
  }
  CheckResult out{"scalar_crlbs_vs_inverse", std::max(worst, worst_phi), 1e-9, draws, ""};
  out.note = "phi rel " + sci(worst_phi);
  return out;
}

/// [FIM^-1] restricted to the kept parameters equals the inverse EFIM (2x2 and 3x3).
inline CheckResult check_efim_inverse(std::size_t draws = 100, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto c = random_link_case(rng);
    const Eigen::MatrixXd inv = invert(fim_single_link(c.params, c.geometry, c.rcs));
    const Eigen::MatrixXd e2 = invert(efim_delay_angle(c.params, c.geometry, c.rcs));
    const Eigen::MatrixXd e3 = invert(efim_doppler_delay_angle(c.params, c.geometry, c.rcs));
    for (int r = 0; r < 2; ++r)
      for (int k = 0; k < 2; ++k)
        worst = std::max(worst, std::abs(e2(r, k) - inv(3 + r, 3 + k)) / std::sqrt(inv(3 + r, 3 + r) * inv(3 + k, 3 + k)));
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k)
        worst = std::max(worst, std::abs(e3(r, k) - inv(2 + r, 2 + k)) / std::sqrt(inv(2 + r, 2 + r) * inv(2 + k, 2 + k)));
  }
  return {"efim_inverse_property", worst, 1e-9, draws, "2x2 (tau, theta) and 3x3 (f_D, tau, theta)"};
}

namespace detail {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace detail

/// Every analytic Jacobian against central differences, plus the bistatic inverse-function product.
inline std::vector<CheckResult> check_jacobians(std::size_t points = 100, std::uint64_t seed = 4) {
  using detail::vec;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-100.0, 100.0), a(-kPi, kPi), sp(0.5, 40.0), vel(-30.0, 30.0);
  const double lambda = kSpeedOfLight / 28e9;
  double mono_pos = 0, bis_pos = 0, bis_prod = 0, mono_state = 0, bis_state = 0, rot = 0, polar = 0;

  for (std::size_t i = 0; i < points; ++i) {
    // mono position: local (x, y) -> (2r/c, atan2)
    Vec2 pl(std::abs(u(rng)) + 1.0, u(rng));
    auto fm = [](const Eigen::VectorXd& q) { return vec({2.0 * q.norm() / kSpeedOfLight, std::atan2(q(1), q(0))}); };
    mono_pos = std::max(mono_pos, scaled_max_error(jac_mono_position(pl), oracle::jacobian_numeric(fm, pl)));

    // rotation
    const Node n = Node::monostatic("a", Vec2(u(rng), u(rng)), a(rng));
    auto fr = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd { return global_to_local(Vec2(q(0), q(1)), n); };
    rot = std::max(rot, scaled_max_error(jac_rotation(n.orientation), oracle::jacobian_numeric(fr, vec({u(rng), u(rng)}))));

    // polar velocity: (|v|, angle) -> (v_x, v_y)
    const Eigen::Vector2d z(sp(rng), a(rng));
    auto fp = [](const Eigen::VectorXd& q) { return vec({q(0) * std::cos(q(1)), q(0) * std::sin(q(1))}); };
    const Vec2 v(z(0) * std::cos(z(1)), z(0) * std::sin(z(1)));
    polar = std::max(polar, scaled_max_error(jac_polar_velocity(v), oracle::jacobian_numeric(fp, z)));

    // mono state
    {
      Vec2 s(u(rng), u(rng)), p(u(rng), u(rng));
      while ((p - s).norm() < 2.0) p = Vec2(u(rng), u(rng));
      const Vec2 d = p - s;
      const Node node = Node::monostatic("m", s, std::atan2(d.y(), d.x()) + 0.5 * std::sin(a(rng)));
      const TargetState t = TargetState::at(p, Vec2(vel(rng), vel(rng)));
      auto fs = [&](const Eigen::VectorXd& q) {
        const auto o = mono_observables(node, TargetState::at(Vec2(q(0), q(1)), Vec2(q(2), q(3))), lambda);
        return vec({o.doppler, o.delay, o.doa});
      };
      mono_state = std::max(mono_state, scaled_max_error(jac_mono_state(node, t, lambda),
                                                         oracle::jacobian_numeric(fs, vec({p.x(), p.y(), t.velocity.x(), t.velocity.y()}))));
    }

    // bistatic
    const auto c = random_bistatic_case(rng);
    const auto o = bis_observables(c.tx, c.rx, c.target, lambda);
    const Mat2 J = jac_bis_position(o);
    auto finv = [&](const Eigen::VectorXd& q) {
      const double r = bistatic_range_to_distance(kSpeedOfLight * q(0), o.baseline, q(1) + o.shift);
      return vec({r * std::cos(q(1)), r * std::sin(q(1))});
    };
    bis_pos = std::max(bis_pos, scaled_max_error(J, oracle::jacobian_numeric(finv, vec({o.delay, o.doa}), vec({1e-15, 1e-7}))));
    auto ffwd = [&](const Eigen::VectorXd& q) {
      const Vec2 pg = local_to_global(Vec2(q(0), q(1)), c.rx);
      return vec({((pg - c.tx.position).norm() + q.norm()) / kSpeedOfLight, std::atan2(q(1), q(0))});
    };
    const Vec2 ploc = global_to_local(c.target.position, c.rx);
    const Eigen::MatrixXd prod = J * oracle::jacobian_numeric(ffwd, ploc);
    bis_prod = std::max(bis_prod, (prod - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff());

    auto fb = [&](const Eigen::VectorXd& q) {
      const auto ob = bis_observables(c.tx, c.rx, TargetState::at(Vec2(q(0), q(1)), Vec2(q(2), q(3))), lambda);
      return vec({ob.doppler, ob.delay, ob.doa});
    };
    const auto& t = c.target;
    bis_state = std::max(bis_state, scaled_max_error(jac_bis_state(c.tx, c.rx, t, lambda),
                                                     oracle::jacobian_numeric(fb, vec({t.position.x(), t.position.y(), t.velocity.x(), t.velocity.y()}))));
  }
  const double tol = 1e-6;
  return {{"jacobian_mono_position", mono_pos, tol, points, ""},
          {"jacobian_bis_position", bis_pos, tol, points, ""},
          {"jacobian_bis_inverse_product", bis_prod, tol, points, "|J_inv * J_fwd - I|"},
          {"jacobian_mono_state", mono_state, tol, points, ""},
          {"jacobian_bis_state", bis_state, tol, points, ""},
          {"jacobian_rotation", rot, tol, points, ""},
          {"jacobian_polar_velocity", polar, tol, points, ""}};
}

/// Bistatic pair with co-located Tx and Rx against a monostatic node at the same spot.
inline std::vector<CheckResult> check_degeneracy(std::size_t draws = 100, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0), o(-1.2, 1.2), vel(-30.0, 30.0);
  double peb_closed = 0, peb_pipe = 0, vel_efim = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Vec2 s(u(rng), u(rng));
    Vec2 p(u(rng), u(rng));
    while ((p - s).norm() < 2.0) p = Vec2(u(rng), u(rng));
    const Vec2 d = p - s;
    const double ori = std::atan2(d.y(), d.x()) + o(rng);
    const SystemParams params;
    Scenario mono, bis;
    mono.params = bis.params = params;
    mono.nodes = {Node::monostatic("m", s, ori)};
    bis.nodes = {Node::transmitter("t", s, ori), Node::receiver("r", s, ori, "t")};
    const TargetState t = TargetState::at(p, Vec2(vel(rng), vel(rng)));

    peb_closed = std::max(peb_closed, rel_diff(peb_bis_closed(params, bis.nodes[0], bis.nodes[1], t),
                                               peb_mono_closed(params, mono.nodes[0], t)));
    const auto rm = evaluate(mono, t), rb = evaluate(bis, t);
    peb_pipe = std::max(peb_pipe, rel_diff(rb.peb, rm.peb));
    const double scale = rm.velocity_efim.cwiseAbs().maxCoeff();
    vel_efim = std::max(vel_efim, (rb.velocity_efim - rm.velocity_efim).cwiseAbs().maxCoeff() / scale);
  }
  const double tol = 1e-6;
  return {{"degeneracy_peb_closed_form", peb_closed, tol, draws, ""},
          {"degeneracy_peb_pipeline", peb_pipe, tol, draws, ""},
          {"degeneracy_velocity_efim", vel_efim, tol, draws, ""}};
}

/// Single-link velocity EFIMs are rank one; collinear networks give VEB = inf with a flag.
inline std::vector<CheckResult> check_rank(std::size_t draws = 100, std::uint64_t seed = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0), o(-1.0, 1.0), vel(-30.0, 30.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    Scenario s;
    TargetState t;
    if (i % 2 == 0) {
      Vec2 pos(u(rng), u(rng)), p(u(rng), u(rng));
      while ((p - pos).norm() < 2.0) p = Vec2(u(rng), u(rng));
      const Vec2 d = p - pos;
      s.nodes = {Node::monostatic("m", pos, std::atan2(d.y(), d.x()) + o(rng))};
      t = TargetState::at(p, Vec2(vel(rng), vel(rng)));
    } else {
      const auto c = random_bistatic_case(rng);
      s.nodes = {c.tx, c.rx};
      t = c.target;
    }
    const auto V = evaluate(s, t).velocity_efim;
    const double tr = V.trace();
    worst = std::max(worst, std::abs(V.determinant()) / (tr * tr));
  }
  CheckResult rank{"velocity_efim_rank_one", worst, 1e-12, draws, "|det| / trace^2"};

  // nodes and target on one line
  Scenario line;
  line.nodes = {Node::monostatic("a", Vec2(0, 0), 0.0), Node::monostatic("b", Vec2(100, 0), kPi),
                Node::monostatic("c", Vec2(-20, 0), 0.0)};
  const auto rep = evaluate(line, TargetState::at(Vec2(40, 0), Vec2(3, 4)));
  const bool ok = std::isinf(rep.veb) && rep.has_flag("singular-velocity-efim");
  CheckResult col{"collinear_veb_infinite", ok ? 0.0 : 1.0, 0.0, 1, "veb=" + sci(rep.veb)};
  return {rank, col};
}

/// eta and its dB loss for the square QAM orders.
inline std::vector<CheckResult> check_constellations() {
  const int orders[] = {16, 64, 256};
  const double eta_ref[] = {1.89, 2.69, 3.44};
  const double db_ref[] = {2.76, 4.29, 5.36};
  double we = 0, wd = 0;
  std::string note;
  for (int i = 0; i < 3; ++i) {
    const double eta = constellation_penalty(ConstellationSpec::qam(orders[i]));
    we = std::max(we, std::abs(eta - eta_ref[i]));
    wd = std::max(wd, std::abs(linear_to_db(eta) - db_ref[i]));
    note += std::to_string(orders[i]) + "qam=" + sci(eta) + " ";
  }
  return {{"constellation_eta", we, 0.01, 3, note}, {"constellation_loss_db", wd, 0.05, 3, ""}};
}

/// Oracle identities of the steering vectors and the mean signal.
inline std::vector<CheckResult> check_oracle_identities(std::size_t draws = 50, std::uint64_t seed = 8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> th(-1.3, 1.3);
  double orth = 0.0, second = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const int n = std::uniform_int_distribution<int>(2, 128)(rng);
    const double t = th(rng);
    const auto b = ula_steering(n, t);
    orth = std::max(orth, std::abs(b.dot(ula_steering_derivative(n, t))) / n);
    // -b^H b'' equals |b'|^2 for a constant-norm vector
    const double ref = kPi * kPi * (static_cast<double>(n) * n - 1) * n * std::cos(t) * std::cos(t) / 12.0;
    second = std::max(second, rel_diff(ula_steering_derivative(n, t).squaredNorm(), ref));
  }
  return {{"steering_orthogonality", orth, 1e-12, draws, "|b^H b'| / N_R"},
          {"steering_second_moment", second, 1e-12, draws, "|b'|^2 vs closed form"}};
}

inline std::vector<CheckResult> run_all() {
  std::vector<CheckResult> out;
  out.push_back(check_fim_oracle());
  out.push_back(check_scalar_crlbs());
  out.push_back(check_efim_inverse());
  for (auto& r : check_oracle_identities()) out.push_back(r);
  for (auto& r : check_jacobians()) out.push_back(r);
  for (auto& r : check_degeneracy()) out.push_back(r);
  for (auto& r : check_rank()) out.push_back(r);
  for (auto& r : check_constellations()) out.push_back(r);
  return out;
}

}  // namespace isac::validation
