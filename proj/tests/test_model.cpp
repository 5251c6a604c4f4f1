#include <gtest/gtest.h>

#include <random>

#include "isac/model.hpp"
#include "oracles/reference_values.hpp"

using namespace isac;

TEST(Constellation, QpskHasNoPenalty) { EXPECT_DOUBLE_EQ(constellation_penalty(ConstellationSpec::qpsk()), 1.0); }

TEST(Constellation, QamPenalties) {
  EXPECT_NEAR(constellation_penalty(ConstellationSpec::qam(16)), 1.89, 0.01);
  EXPECT_NEAR(constellation_penalty(ConstellationSpec::qam(64)), 2.69, 0.01);
  EXPECT_NEAR(constellation_penalty(ConstellationSpec::qam(256)), 3.44, 0.01);
}

TEST(Constellation, QamLossInDb) {
  EXPECT_NEAR(linear_to_db(constellation_penalty(ConstellationSpec::qam(16))), 2.76, 0.05);
  EXPECT_NEAR(linear_to_db(constellation_penalty(ConstellationSpec::qam(64))), 4.29, 0.05);
  EXPECT_NEAR(linear_to_db(constellation_penalty(ConstellationSpec::qam(256))), 5.36, 0.05);
}

TEST(Constellation, ZeroPointIsDegenerate) {
  const auto c = ConstellationSpec::normalized({{0.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}});
  try {
    constellation_penalty(c);
    FAIL();
  } catch (const BoundsError& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_constellation);
  }
}

TEST(Constellation, UnitPowerInvariantEnforced) {
  EXPECT_THROW(ConstellationSpec::from_points({{2.0, 0.0}}), BoundsError);
  EXPECT_THROW(ConstellationSpec::from_points({}), BoundsError);
  EXPECT_NO_THROW(ConstellationSpec::from_points({{1.0, 0.0}, {0.0, -1.0}}));
}

TEST(Constellation, JensenLowerBound) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::complex<double>> pts;
    for (int i = 0; i < 8; ++i) pts.emplace_back(n(rng), n(rng));
    EXPECT_GE(constellation_penalty(ConstellationSpec::normalized(pts)), 1.0 - 1e-12);
  }
}

TEST(Constellation, ByName) {
  EXPECT_EQ(ConstellationSpec::by_name("16qam").points().size(), 16u);
  EXPECT_THROW(ConstellationSpec::by_name("8psk"), BoundsError);
}

TEST(Frame, Defaults) {
  const auto f = derive_frame(SystemParams{});
  EXPECT_EQ(f.K, isac_ref::kFrameK);
  EXPECT_EQ(f.M, isac_ref::kFrameM);
  EXPECT_EQ(f.K, 633);
  EXPECT_EQ(f.M, 112);
  // -15 dBm per subcarrier
  EXPECT_NEAR(linear_to_db(f.avg_power * 1e3), -15.0, 0.01);
  EXPECT_DOUBLE_EQ(f.noise_var, 4e-20 * 120e3);
}

TEST(Frame, FullAllocation) {
  SystemParams p;
  p.frac_subcarriers = 1.0;
  p.active_subcarriers = 64;
  EXPECT_EQ(derive_frame(p).K, 64);
}

TEST(Frame, QpskKeepsNoiseVariance) {
  const auto f = derive_frame(SystemParams{});
  EXPECT_DOUBLE_EQ(f.noise_var_postdiv, f.noise_var);
}

TEST(Frame, QamScalesNoiseVariance) {
  SystemParams p;
  p.constellation = ConstellationSpec::qam(16);
  const auto f = derive_frame(p);
  EXPECT_DOUBLE_EQ(f.noise_var_postdiv, f.eta * f.noise_var);
}

TEST(Frame, InsufficientResources) {
  SystemParams p;
  p.frac_symbols = 1.0 / 1120.0;
  try {
    derive_frame(p);
    FAIL();
  } catch (const BoundsError& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_resources);
  }
}

TEST(Frame, Deterministic) {
  const auto a = derive_frame(SystemParams{});
  const auto b = derive_frame(SystemParams{});
  EXPECT_EQ(a.K, b.K);
  EXPECT_EQ(a.avg_power, b.avg_power);
}

TEST(Params, RejectsNonPhysical) {
  SystemParams p;
  p.noise_psd = 0.0;
  EXPECT_THROW(p.validate(), BoundsError);
  p = SystemParams{};
  p.frac_subcarriers = 1.5;
  EXPECT_THROW(p.validate(), BoundsError);
}

TEST(Node, OrientationWrapped) {
  const auto n = Node::monostatic("a", Vec2(0, 0), 3.0 * kPi);
  EXPECT_NEAR(n.orientation, kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(-kPi), kPi, 1e-15);
  EXPECT_GT(wrap_angle(-kPi + 1e-9), -kPi);
}

TEST(Scenario, RxMustReferenceTx) {
  Scenario s;
  s.nodes.push_back(Node::receiver("r", Vec2(0, 0), 0.0, "missing"));
  EXPECT_THROW(s.validate(), BoundsError);
  s.nodes.insert(s.nodes.begin(), Node::transmitter("missing", Vec2(5, 0), 0.0));
  EXPECT_NO_THROW(s.validate());
}

TEST(Scenario, NeedsALink) {
  Scenario s;
  s.nodes.push_back(Node::transmitter("t", Vec2(0, 0), 0.0));
  try {
    s.validate();
    FAIL();
  } catch (const BoundsError& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_information);
  }
}

TEST(Scenario, DuplicateIds) {
  Scenario s;
  s.nodes.push_back(Node::monostatic("a", Vec2(0, 0), 0.0));
  s.nodes.push_back(Node::monostatic("a", Vec2(1, 0), 0.0));
  EXPECT_THROW(s.validate(), BoundsError);
}

TEST(Target, PolarConstruction) {
  const auto t = TargetState::polar(Vec2(1, 2), 22.0, 0.5);
  EXPECT_NEAR(t.speed(), 22.0, 1e-12);
  EXPECT_NEAR(t.heading(), 0.5, 1e-12);
}
