#include <gtest/gtest.h>

#include <random>

#include "isac/oracle.hpp"
#include "isac/validation.hpp"
#include "test_util.hpp"

using namespace isac;
using isac::testing::rel_err;

namespace {

SystemParams small_params() {
  SystemParams p;
  p.active_subcarriers = 40;
  p.symbols_per_frame = 30;
  p.frac_subcarriers = 0.5;
  p.frac_symbols = 0.5;
  p.n_rx_ant = 8;
  p.n_tx_ant = 4;
  return p;
}

}  // namespace

TEST(MeanSignal, EnergyMatchesSteeringNorms) {
  const SystemParams p = small_params();
  const auto g = LinkGeometry::bistatic(30, 45, 0.4, -0.2);
  const auto m = oracle::MeanSignalModel::from_link(p, g, 2.0, 0.3, 150.0);
  const FrameDerived f = derive_frame(p);
  double energy = 0.0;
  for (int k = 0; k < f.K; ++k)
    for (int mi = 0; mi < f.M; ++mi) energy += oracle::mean_signal(m, k, mi).squaredNorm();
  const double a = m.theta(0);
  EXPECT_LE(rel_err(energy, f.K * f.M * a * a * p.n_rx_ant * std::norm(m.gamma())), 1e-12);
}

TEST(MeanSignal, BoresightBeamGain) {
  const SystemParams p = small_params();
  const auto m = oracle::MeanSignalModel::from_link(p, LinkGeometry::monostatic(20, 0.6), 1.0);
  const double p_avg = p.default_sensing_power() / derive_frame(p).K;
  EXPECT_LE(rel_err(std::norm(m.gamma()), p_avg * p.n_tx_ant), 1e-12);
}

TEST(MeanSignal, MispointingLowersGain) {
  const SystemParams p = small_params();
  const auto on = oracle::MeanSignalModel::from_link(p, LinkGeometry::monostatic(20, 0.1), 1.0);
  const auto off = oracle::MeanSignalModel::from_link(p, LinkGeometry::monostatic(20, 0.1, 0.2), 1.0);
  EXPECT_LT(std::norm(off.gamma()), std::norm(on.gamma()));
}

TEST(Steering, NormsAndOrthogonality) {
  for (int n : {2, 7, 16, 64}) {
    for (double th : {-1.2, -0.3, 0.0, 0.9}) {
      const auto b = ula_steering(n, th);
      EXPECT_NEAR(b.squaredNorm(), n, 1e-12);
      EXPECT_LE(std::abs(b.dot(ula_steering_derivative(n, th))), 1e-12 * n);
    }
  }
}

TEST(Steering, DerivativeMatchesNumeric) {
  const int n = 12;
  const double th = 0.37, h = 1e-6;
  const Eigen::VectorXcd num = (ula_steering(n, th + h) - ula_steering(n, th - h)) / (2 * h);
  EXPECT_LE((num - ula_steering_derivative(n, th)).norm() / num.norm(), 1e-8);
}

TEST(FimNumeric, AngleEntryMatchesSteeringIdentity) {
  const SystemParams p = small_params();
  const auto g = LinkGeometry::monostatic(25, 0.5);
  const auto m = oracle::MeanSignalModel::from_link(p, g, 1.0);
  const auto F = oracle::fim_numeric(m);
  const FrameDerived f = derive_frame(p);
  const double NR = p.n_rx_ant, c = std::cos(0.5);
  const double bdd = kPi * kPi * (NR * NR - 1) * NR * c * c / 12.0;
  const double a = m.theta(0);
  const double expected = 2.0 / f.noise_var_postdiv * f.K * f.M * a * a * std::norm(m.gamma()) * bdd;
  EXPECT_LE(rel_err(F(4, 4), expected), 1e-8);
}

TEST(FimNumeric, MatchesAnalyticSmallAndDefault) {
  for (const SystemParams& p : {small_params(), SystemParams{}}) {
    for (const auto& g : {LinkGeometry::monostatic(30, 0.2), LinkGeometry::bistatic(50, 20, -0.9, 0.3, 0.02)}) {
      const auto A = fim_single_link(p, g, 1.0).values;
      const auto N = oracle::fim_numeric(oracle::MeanSignalModel::from_link(p, g, 1.0, 0.7, 300.0)).values;
      for (int r = 0; r < 5; ++r)
        for (int k = 0; k < 5; ++k) {
          if (A(r, k) == 0.0) {
            EXPECT_LE(std::abs(N(r, k)), 1e-5 * N.norm());
          } else {
            EXPECT_LE(rel_err(A(r, k), N(r, k)), 1e-5) << r << "," << k;
          }
        }
    }
  }
}

TEST(FimNumeric, BruteForceEqualsSeparable) {
  const SystemParams p = small_params();
  const auto m = oracle::MeanSignalModel::from_link(p, LinkGeometry::bistatic(40, 25, 0.3, -0.4), 1.0, -1.1, 80.0);
  const auto a = oracle::fim_numeric(m).values;
  const auto b = oracle::fim_numeric_bruteforce(m).values;
  for (int r = 0; r < 5; ++r)
    for (int k = 0; k < 5; ++k) EXPECT_LE(std::abs(a(r, k) - b(r, k)), 1e-9 * std::sqrt(a(r, r) * a(k, k)));
}

TEST(FimNumeric, DoublingAlphaQuadruplesPhaseEntry) {
  const SystemParams p = small_params();
  auto m = oracle::MeanSignalModel::from_link(p, LinkGeometry::monostatic(30, 0.2), 1.0);
  const double base = oracle::fim_numeric(m)(1, 1);
  m.theta(0) *= 2.0;
  EXPECT_LE(rel_err(oracle::fim_numeric(m)(1, 1), 4.0 * base), 1e-10);
}

TEST(FimNumeric, SymmetricAndIndependentOfNuisanceValues) {
  const SystemParams p = small_params();
  const auto g = LinkGeometry::monostatic(30, -0.4);
  const auto a = oracle::fim_numeric(oracle::MeanSignalModel::from_link(p, g, 1.0, 0.0, 0.0));
  const auto b = oracle::fim_numeric(oracle::MeanSignalModel::from_link(p, g, 1.0, 2.5, -900.0));
  EXPECT_TRUE(a.is_symmetric(1e-12));
  for (int r = 0; r < 5; ++r)
    for (int k = 0; k < 5; ++k) EXPECT_LE(std::abs(a(r, k) - b(r, k)), 1e-7 * std::sqrt(a(r, r) * a(k, k)));
}

TEST(FimNumeric, FrameRotationInvariant) {
  // the link only sees local angles, so rotating the whole scene changes nothing
  const SystemParams p = small_params();
  const Node n0 = Node::monostatic("a", Vec2(0, 0), 0.3);
  const Node n1 = Node::monostatic("a", Vec2(0, 0), 0.3 + 1.1);
  const Vec2 t0(20, 9);
  const Vec2 t1 = jac_rotation(-1.1) * t0;
  const auto o0 = mono_observables(n0, TargetState::at(t0), p.wavelength());
  const auto o1 = mono_observables(n1, TargetState::at(t1), p.wavelength());
  const auto f0 = oracle::fim_numeric(oracle::MeanSignalModel::from_link(p, LinkGeometry::monostatic(o0.range_rx, o0.doa), 1.0));
  const auto f1 = oracle::fim_numeric(oracle::MeanSignalModel::from_link(p, LinkGeometry::monostatic(o1.range_rx, o1.doa), 1.0));
  EXPECT_LE((f0.values - f1.values).cwiseAbs().maxCoeff() / f0.values.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(JacobianNumeric, LinearMapIsExact) {
  Eigen::MatrixXd A(3, 2);
  A << 1.5, -2.0, 0.25, 4.0, -7.0, 0.5;
  auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * x; };
  // the step cannot be exact in binary, so the residue is roundoff of order eps*|f|/h
  const Eigen::MatrixXd J = oracle::jacobian_numeric(f, Eigen::Vector2d(0.75, -0.5));
  EXPECT_LE((J - A).cwiseAbs().maxCoeff() / A.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(JacobianNumeric, TrigAtZero) {
  auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd o(2);
    o << std::sin(x(0)), std::cos(x(0));
    return o;
  };
  const Eigen::MatrixXd J = oracle::jacobian_numeric(f, Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(J(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(J(1, 0), 0.0, 1e-9);
}

TEST(JacobianNumeric, NonFiniteIsDomainError) {
  auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd o(1);
    o << std::log(x(0));
    return o;
  };
  try {
    oracle::jacobian_numeric(f, Eigen::VectorXd::Zero(1));
    FAIL();
  } catch (const BoundsError& e) {
    EXPECT_EQ(e.code(), ErrorCode::oracle_domain);
  }
}

TEST(JacobianNumeric, FloorsOverrideStep) {
  // with the default 1e-6 floor a step this size would swamp a 1e-9 scale input
  auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd o(1);
    o << std::sin(1e9 * x(0));
    return o;
  };
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2e-9);
  const Eigen::MatrixXd J = oracle::jacobian_numeric(f, x, Eigen::VectorXd::Constant(1, 1e-15));
  EXPECT_LE(rel_err(J(0, 0), 1e9 * std::cos(2.0)), 1e-6);
}

TEST(ValidationSuite, AllChecksPass) {
  for (const auto& r : validation::run_all()) EXPECT_TRUE(r.pass()) << r.name << " worst=" << r.worst;
}
