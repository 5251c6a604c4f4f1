#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "isac/errors.hpp"
#include "isac/fisher.hpp"
#include "isac/link.hpp"
#include "isac/model.hpp"

// Numerical ground truth for the closed forms. Nothing here shares code with the
// analytic FIM besides the steering vectors and the radar equation.

namespace isac::oracle {

using cd = std::complex<double>;

/// Noiseless processed samples of one link, parameterized by theta = [alpha, phi, f_D, tau, theta_R].
struct MeanSignalModel {
  SystemParams params;
  LinkGeometry link;
  Eigen::Matrix<double, 5, 1> theta = Eigen::Matrix<double, 5, 1>::Zero();
  std::optional<double> sensing_power;

  /// Builds the model at the true parameters: alpha from the radar equation, theta_R from the geometry.
  static MeanSignalModel from_link(const SystemParams& p, const LinkGeometry& g, double rcs, double phase = 0.0,
                                   double doppler = 0.0, std::optional<double> sensing_power = std::nullopt) {
    MeanSignalModel m;
    m.params = p;
    m.link = g;
    m.sensing_power = sensing_power;
    const auto snr = link_snr(p, g, rcs, sensing_power);
    m.theta << snr.alpha, phase, doppler, (g.range_tx + g.range_rx) / kSpeedOfLight, g.doa_local;
    return m;
  }

  /// Transmit beamforming gain gamma = a^H(theta_T) w_T.
  cd gamma() const {
    const FrameDerived f = derive_frame(params);
    const double p_avg = sensing_power.value_or(params.default_sensing_power()) / f.K;
    const int nt = params.n_tx_ant;
    const Eigen::VectorXcd w = std::sqrt(p_avg / nt) * ula_steering(nt, link.dod_local + link.pointing_offset);
    return ula_steering(nt, link.dod_local).dot(w);
  }
};

namespace detail {

// The mean factors into scalar(alpha, phi) * doppler(m) * delay(k) * b(theta_R).
struct Factors {
  cd scalar;
  Eigen::VectorXcd doppler;  // length M
  Eigen::VectorXcd delay;    // length K
  Eigen::VectorXcd array;    // length N_R
};

inline Factors factors(const MeanSignalModel& m, const Eigen::Matrix<double, 5, 1>& th) {
  const FrameDerived f = derive_frame(m.params);
  Factors out;
  out.scalar = th(0) * std::polar(1.0, th(1)) * m.gamma();
  out.doppler.resize(f.M);
  for (int i = 0; i < f.M; ++i) out.doppler(i) = std::polar(1.0, 2.0 * kPi * i * m.params.symbol_duration * th(2));
  out.delay.resize(f.K);
  for (int k = 0; k < f.K; ++k) out.delay(k) = std::polar(1.0, -2.0 * kPi * k * m.params.subcarrier_spacing * th(3));
  out.array = ula_steering(m.params.n_rx_ant, th(4));
  return out;
}

inline double step_for(int i, double value) {
  static constexpr std::array<double, 5> floors{0.0, 1e-8, 1e-3, 1e-12, 1e-8};
  double h = std::max(floors[static_cast<std::size_t>(i)], 1e-6 * std::abs(value));
  if (!(h > 0.0)) throw BoundsError(ErrorCode::oracle_domain, "finite-difference step underflow");
  return h;
}

}  // namespace detail

/// Processed sample vector (length N_R) on subcarrier k, symbol m_idx.
inline Eigen::VectorXcd mean_signal(const MeanSignalModel& m, int k, int m_idx) {
  const double Ts = m.params.symbol_duration, df = m.params.subcarrier_spacing;
  const cd c = m.theta(0) * std::polar(1.0, m.theta(1)) * std::polar(1.0, 2.0 * kPi * m_idx * Ts * m.theta(2)) *
               std::polar(1.0, -2.0 * kPi * k * df * m.theta(3)) * m.gamma();
  return c * ula_steering(m.params.n_rx_ant, m.theta(4));
}

/// Gaussian-model FIM, 2/sigma^2 * sum_{k,m} Re{dmu_i^H dmu_j}, by brute force over every
/// (k, m) with central differences of mean_signal (steps h and h/2, Richardson-combined).
/// Cost O(K*M*N_R); use on small frames.
inline FisherMatrix fim_numeric_bruteforce(const MeanSignalModel& m) {
  const FrameDerived f = derive_frame(m.params);
  const int nr = m.params.n_rx_ant;
  std::array<double, 5> h{};
  for (int i = 0; i < 5; ++i) h[static_cast<std::size_t>(i)] = detail::step_for(i, m.theta(i));
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(5, 5);
  Eigen::MatrixXcd d(nr, 5);
  MeanSignalModel plus = m, minus = m;
  for (int k = 0; k < f.K; ++k) {
    for (int mi = 0; mi < f.M; ++mi) {
      for (int i = 0; i < 5; ++i) {
        auto central = [&](double hi) {
          plus.theta = m.theta;
          minus.theta = m.theta;
          plus.theta(i) += hi;
          minus.theta(i) -= hi;
          return Eigen::VectorXcd((mean_signal(plus, k, mi) - mean_signal(minus, k, mi)) / (2.0 * hi));
        };
        const double hi = h[static_cast<std::size_t>(i)];
        d.col(i) = (4.0 * central(0.5 * hi) - central(hi)) / 3.0;
      }
      acc += (d.adjoint() * d).real();
    }
  }
  acc *= 2.0 / f.noise_var_postdiv;
  return FisherMatrix(link_parameter_labels(), 0.5 * (acc + acc.transpose()));
}

/// Same quantity as fim_numeric_bruteforce. Each parameter moves exactly one factor of
/// the mean, so the per-(k, m) difference quotient is the difference quotient of that factor
/// times the others and the (k, m) sums separate into products of short sums.
inline FisherMatrix fim_numeric(const MeanSignalModel& m) {
  const FrameDerived f = derive_frame(m.params);
  const detail::Factors base = detail::factors(m, m.theta);
  std::array<detail::Factors, 5> d;
  for (int i = 0; i < 5; ++i) {
    const double h = detail::step_for(i, m.theta(i));
    // central difference of the one factor that moves, at step hs
    auto central = [&](double hs) {
      auto tp = m.theta, tm = m.theta;
      tp(i) += hs;
      tm(i) -= hs;
      const auto fp = detail::factors(m, tp), fm = detail::factors(m, tm);
      detail::Factors di = base;
      switch (i) {
        case 0:
        case 1: di.scalar = (fp.scalar - fm.scalar) / (2.0 * hs); break;
        case 2: di.doppler = (fp.doppler - fm.doppler) / (2.0 * hs); break;
        case 3: di.delay = (fp.delay - fm.delay) / (2.0 * hs); break;
        default: di.array = (fp.array - fm.array) / (2.0 * hs); break;
      }
      return di;
    };
    // one Richardson step: the delay phase 2*pi*k*df*h reaches 1e-2 rad on wide frames,
    // which leaves a plain central difference at the 1e-5 level
    const detail::Factors coarse = central(h), fine = central(0.5 * h);
    detail::Factors di = base;
    switch (i) {
      case 0:
      case 1: di.scalar = (4.0 * fine.scalar - coarse.scalar) / 3.0; break;
      case 2: di.doppler = (4.0 * fine.doppler - coarse.doppler) / 3.0; break;
      case 3: di.delay = (4.0 * fine.delay - coarse.delay) / 3.0; break;
      default: di.array = (4.0 * fine.array - coarse.array) / 3.0; break;
    }
    if (!std::isfinite(std::abs(di.scalar)) || !di.doppler.allFinite() || !di.delay.allFinite() ||
        !di.array.allFinite()) {
      throw BoundsError(ErrorCode::oracle_domain, "non-finite derivative in fim_numeric");
    }
    d[static_cast<std::size_t>(i)] = std::move(di);
  }
  Eigen::MatrixXd acc(5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i; j < 5; ++j) {
      const cd v = std::conj(d[i].scalar) * d[j].scalar * d[i].doppler.dot(d[j].doppler) *
                   d[i].delay.dot(d[j].delay) * d[i].array.dot(d[j].array);
      acc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v.real();
      acc(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v.real();
    }
  }
  acc *= 2.0 / f.noise_var_postdiv;
  return FisherMatrix(link_parameter_labels(), acc);
}

/// Central-difference Jacobian of f at x. Step h_i = max(floor_i, 1e-6 |x_i|) with
/// floor_i = 1e-6 unless `floors` overrides it (needed when x mixes seconds and metres).
inline Eigen::MatrixXd jacobian_numeric(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                                        const Eigen::VectorXd& x,
                                        const std::optional<Eigen::VectorXd>& floors = std::nullopt) {
  const Eigen::VectorXd f0 = fn(x);
  if (!f0.allFinite()) throw BoundsError(ErrorCode::oracle_domain, "map not finite at the expansion point");
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double fl = floors ? (*floors)(i) : 1e-6;
    const double h = std::max(fl, 1e-6 * std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const Eigen::VectorXd fp = fn(xp), fm = fn(xm);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw BoundsError(ErrorCode::oracle_domain, "map not finite near the expansion point");
    }
    J.col(i) = (fp - fm) / (2.0 * h);
  }
  return J;
}

}  // namespace isac::oracle
