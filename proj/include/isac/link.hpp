#pragma once

#include <cmath>
#include <complex>
#include <optional>

#include <Eigen/Dense>

#include "isac/errors.hpp"
#include "isac/fisher.hpp"
#include "isac/model.hpp"

namespace isac {

enum class LinkKind { monostatic, bistatic };

/// Geometry of one Tx -> target -> Rx path as seen by the radio model.
struct LinkGeometry {
  LinkKind kind = LinkKind::monostatic;
  double range_tx = 1.0;         // m, r_T (equals r for monostatic)
  double range_rx = 1.0;         // m, r_R
  double doa_local = 0.0;        // rad, DoA in the Rx array frame
  double dod_local = 0.0;        // rad, DoD in the Tx array frame
  double pointing_offset = 0.0;  // rad, steering direction minus true DoD

  static LinkGeometry monostatic(double r, double doa, double dod_offset = 0.0) {
    return {LinkKind::monostatic, r, r, doa, doa, dod_offset};
  }
  static LinkGeometry bistatic(double r_tx, double r_rx, double doa, double dod = 0.0, double offset = 0.0) {
    return {LinkKind::bistatic, r_tx, r_rx, doa, dod, offset};
  }

  void validate() const {
    if (!(range_tx > 0.0) || !(range_rx > 0.0)) {
      throw BoundsError(ErrorCode::singular_geometry, "link range must be > 0");
    }
    if (!(std::abs(doa_local) < kPi / 2)) {
      throw BoundsError(ErrorCode::out_of_field, "DoA outside the array field of view");
    }
  }
};

// ---------------------------------------------------------------------------
// Arrays

/// Half-wavelength ULA response, element phases pi*l*sin(theta) with l centred on zero.
inline Eigen::VectorXcd ula_steering(int n, double theta) {
  Eigen::VectorXcd a(n);
  const double s = std::sin(theta);
  for (int i = 0; i < n; ++i) {
    const double l = i - 0.5 * (n - 1);
    a(i) = std::polar(1.0, kPi * l * s);
  }
  return a;
}

/// Derivative of ula_steering with respect to theta.
inline Eigen::VectorXcd ula_steering_derivative(int n, double theta) {
  Eigen::VectorXcd a = ula_steering(n, theta);
  const double c = std::cos(theta);
  for (int i = 0; i < n; ++i) {
    const double l = i - 0.5 * (n - 1);
    a(i) *= std::complex<double>(0.0, kPi * l * c);
  }
  return a;
}

/// Array factor a^H(theta_true) a(theta_steer).
inline std::complex<double> pointing_factor(int n, double theta_true, double theta_steer) {
  return ula_steering(n, theta_true).dot(ula_steering(n, theta_steer));
}

// ---------------------------------------------------------------------------
// SNR

struct LinkSnr {
  double snr = 0.0;          // per receive antenna, before symbol division
  double snr_postdiv = 0.0;  // snr / eta
  double alpha = 0.0;        // path amplitude from the radar equation
};

/// Radar-equation SNR. `sensing_power` is the transmitter's sensing budget in W
/// (spread over K subcarriers); defaults to rho_f * P_T.
inline LinkSnr link_snr(const SystemParams& p, const LinkGeometry& g, double rcs,
                        std::optional<double> sensing_power = std::nullopt) {
  if (!(g.range_tx > 0.0) || !(g.range_rx > 0.0)) {
    throw BoundsError(ErrorCode::singular_geometry, "link range must be > 0");
  }
  if (!(rcs > 0.0)) throw BoundsError(ErrorCode::invalid_argument, "rcs must be > 0");
  const FrameDerived f = derive_frame(p);
  const double p_avg = sensing_power.value_or(p.default_sensing_power()) / f.K;
  const double four_pi3 = std::pow(4.0 * kPi, 3);
  const double alpha2 = p.tx_gain * p.rx_gain * kSpeedOfLight * kSpeedOfLight * rcs /
                        (four_pi3 * p.carrier_freq * p.carrier_freq * g.range_tx * g.range_tx * g.range_rx *
                         g.range_rx);
  double gain = static_cast<double>(p.n_tx_ant);
  if (g.pointing_offset != 0.0) {
    const auto ups = pointing_factor(p.n_tx_ant, g.dod_local, g.dod_local + g.pointing_offset);
    gain = std::norm(ups) / p.n_tx_ant;
  }
  LinkSnr out;
  out.alpha = std::sqrt(alpha2);
  out.snr = alpha2 * p_avg * gain / f.noise_var;
  out.snr_postdiv = out.snr / f.eta;
  return out;
}

// ---------------------------------------------------------------------------
// Fisher information

inline const std::vector<std::string>& link_parameter_labels() {
  static const std::vector<std::string> labels{"alpha", "phi", "f_D", "tau", "theta_R"};
  return labels;
}

namespace detail {

struct LinkFactors {
  double K, M, NR, Ts, df, cos2, s, alpha;
};

inline LinkFactors link_factors(const SystemParams& p, const LinkGeometry& g, double rcs,
                                std::optional<double> sensing_power) {
  g.validate();
  if (p.n_rx_ant < 2) throw BoundsError(ErrorCode::insufficient_resources, "need at least 2 receive antennas");
  const FrameDerived f = derive_frame(p);
  const LinkSnr snr = link_snr(p, g, rcs, sensing_power);
  const double c = std::cos(g.doa_local);
  LinkFactors lf;
  lf.K = f.K;
  lf.M = f.M;
  lf.NR = p.n_rx_ant;
  lf.Ts = p.symbol_duration;
  lf.df = p.subcarrier_spacing;
  lf.cos2 = c * c;
  lf.s = lf.K * lf.M * lf.NR * snr.snr_postdiv;
  lf.alpha = snr.alpha;
  return lf;
}

}  // namespace detail

/// 5x5 FIM over [alpha, phi, f_D, tau, theta_R]. Subcarrier and symbol indices start at 0.
inline FisherMatrix fim_single_link(const SystemParams& p, const LinkGeometry& g, double rcs,
                                    std::optional<double> sensing_power = std::nullopt) {
  const auto f = detail::link_factors(p, g, rcs, sensing_power);
  const double pi2 = kPi * kPi;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(5, 5);
  m(0, 0) = 2.0 / (f.alpha * f.alpha);
  m(1, 1) = 2.0;
  m(1, 2) = 2.0 * kPi * f.Ts * (f.M - 1);
  m(1, 3) = -2.0 * kPi * f.df * (f.K - 1);
  m(2, 2) = 4.0 * pi2 * f.Ts * f.Ts * (2 * f.M - 1) * (f.M - 1) / 3.0;
  m(2, 3) = -2.0 * pi2 * f.Ts * f.df * (f.M - 1) * (f.K - 1);
  m(3, 3) = 4.0 * pi2 * f.df * f.df * (2 * f.K - 1) * (f.K - 1) / 3.0;
  m(4, 4) = pi2 * (f.NR * f.NR - 1) * f.cos2 / 6.0;
  m(2, 1) = m(1, 2);
  m(3, 1) = m(1, 3);
  m(3, 2) = m(2, 3);
  m *= f.s;
  return FisherMatrix(link_parameter_labels(), m);
}

struct ScalarCrlbs {
  double alpha = 0.0;
  double phi = 0.0;
  double fd = 0.0;               // Hz^2
  double tau = 0.0;              // s^2
  double theta = 0.0;            // rad^2
  double range = 0.0;            // m^2
  double bistatic_range = 0.0;   // m^2
};

inline ScalarCrlbs scalar_crlbs(const SystemParams& p, const LinkGeometry& g, double rcs,
                                std::optional<double> sensing_power = std::nullopt) {
  const auto f = detail::link_factors(p, g, rcs, sensing_power);
  const double pi2 = kPi * kPi;
  // f.s already carries K*M*N_R*SNR/eta
  ScalarCrlbs out;
  out.alpha = f.alpha * f.alpha / (2.0 * f.s);
  out.phi = (7.0 * f.K * f.M + f.K + f.M - 5.0) / (2.0 * (f.K + 1) * (f.M + 1) * f.s);
  out.fd = 3.0 / (2.0 * pi2 * f.Ts * f.Ts * (f.M * f.M - 1) * f.s);
  out.tau = 3.0 / (2.0 * pi2 * f.df * f.df * (f.K * f.K - 1) * f.s);
  out.theta = 6.0 / (pi2 * (f.NR * f.NR - 1) * f.cos2 * f.s);
  out.range = 0.25 * kSpeedOfLight * kSpeedOfLight * out.tau;
  out.bistatic_range = 4.0 * out.range;
  return out;
}

/// Diagonal of the EFIM over [f_D, tau, theta_R] straight from the closed form.
inline Eigen::Vector3d efim_local_diagonal(const SystemParams& p, const LinkGeometry& g, double rcs,
                                           std::optional<double> sensing_power = std::nullopt) {
  const auto f = detail::link_factors(p, g, rcs, sensing_power);
  const double pi2 = kPi * kPi;
  return f.s * Eigen::Vector3d(2.0 * pi2 * f.Ts * f.Ts * (f.M * f.M - 1) / 3.0,
                               2.0 * pi2 * f.df * f.df * (f.K * f.K - 1) / 3.0,
                               pi2 * (f.NR * f.NR - 1) * f.cos2 / 6.0);
}

namespace detail {

// The closed forms are diagonal; the generic Schur complement leaves rounding residue
// (about 1e-16 of the diagonal) in the f_D/tau cross term. Anything below this
// correlation is reset to the exact zero.
inline constexpr double kEfimSnapTolerance = 1e-10;

inline FisherMatrix snap_diagonal(FisherMatrix m) {
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      if (i == j) continue;
      const double scale = std::sqrt(std::abs(m.values(i, i) * m.values(j, j)));
      if (std::abs(m.values(i, j)) <= kEfimSnapTolerance * scale) m.values(i, j) = 0.0;
    }
  }
  return m;
}

}  // namespace detail

inline FisherMatrix efim_delay_angle(const SystemParams& p, const LinkGeometry& g, double rcs,
                                     std::optional<double> sensing_power = std::nullopt,
                                     Warnings* warnings = nullptr) {
  return detail::snap_diagonal(
      schur_complement(fim_single_link(p, g, rcs, sensing_power), std::vector<std::size_t>{3, 4}, warnings));
}

inline FisherMatrix efim_doppler_delay_angle(const SystemParams& p, const LinkGeometry& g, double rcs,
                                             std::optional<double> sensing_power = std::nullopt,
                                             Warnings* warnings = nullptr) {
  return detail::snap_diagonal(
      schur_complement(fim_single_link(p, g, rcs, sensing_power), std::vector<std::size_t>{2, 3, 4}, warnings));
}

}  // namespace isac
