#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isac/errors.hpp"

namespace isac {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = std::numbers::pi;

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

// ---------------------------------------------------------------------------
// Constellations

/// Equiprobable symbol alphabet, normalized to unit average power.
class ConstellationSpec {
 public:
  using Point = std::complex<double>;

  ConstellationSpec() : ConstellationSpec(qpsk()) {}

  /// Validates the unit-average-power invariant; does not rescale.
  static ConstellationSpec from_points(std::vector<Point> points, std::string name = "custom") {
    if (points.empty()) {
      throw BoundsError(ErrorCode::invalid_argument, "constellation has no points");
    }
    double mean_power = 0.0;
    for (const auto& x : points) mean_power += std::norm(x);
    mean_power /= static_cast<double>(points.size());
    if (std::abs(mean_power - 1.0) > 1e-12) {
      throw BoundsError(ErrorCode::invalid_argument,
                        "constellation average power must be 1 (got " + std::to_string(mean_power) + ")");
    }
    return ConstellationSpec(std::move(points), std::move(name));
  }

  /// Rescales arbitrary points to unit average power.
  static ConstellationSpec normalized(std::vector<Point> points, std::string name = "custom") {
    if (points.empty()) {
      throw BoundsError(ErrorCode::invalid_argument, "constellation has no points");
    }
    double mean_power = 0.0;
    for (const auto& x : points) mean_power += std::norm(x);
    mean_power /= static_cast<double>(points.size());
    if (!(mean_power > 0.0)) {
      throw BoundsError(ErrorCode::degenerate_constellation, "all constellation points are zero");
    }
    const double scale = 1.0 / std::sqrt(mean_power);
    for (auto& x : points) x *= scale;
    return ConstellationSpec(std::move(points), std::move(name));
  }

  static ConstellationSpec qpsk() {
    const double h = 1.0 / std::sqrt(2.0);
    return ConstellationSpec({{h, h}, {-h, h}, {-h, -h}, {h, -h}}, "qpsk");
  }

  /// Square M-QAM (order 4, 16, 64, 256, ...).
  static ConstellationSpec qam(int order) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
    if (order < 4 || side * side != order) {
      throw BoundsError(ErrorCode::invalid_argument, "QAM order must be a square >= 4");
    }
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(order));
    for (int i = 0; i < side; ++i) {
      for (int q = 0; q < side; ++q) {
        pts.emplace_back(2.0 * i - (side - 1), 2.0 * q - (side - 1));
      }
    }
    auto spec = normalized(std::move(pts), std::to_string(order) + "qam");
    return spec;
  }

  /// Accepts "qpsk", "16qam", "64qam", "256qam" (case sensitive).
  static ConstellationSpec by_name(const std::string& name) {
    if (name == "qpsk") return qpsk();
    const auto pos = name.find("qam");
    if (pos != std::string::npos && pos + 3 == name.size() && pos > 0) {
      return qam(std::stoi(name.substr(0, pos)));
    }
    throw BoundsError(ErrorCode::invalid_argument, "unknown constellation '" + name + "'");
  }

  const std::vector<Point>& points() const noexcept { return points_; }
  const std::string& name() const noexcept { return name_; }

  bool operator==(const ConstellationSpec& o) const { return points_ == o.points_ && name_ == o.name_; }

 private:
  ConstellationSpec(std::vector<Point> points, std::string name)
      : points_(std::move(points)), name_(std::move(name)) {}

  std::vector<Point> points_;
  std::string name_;
};

/// Noise enhancement caused by dividing out the data symbols: mean of 1/|x_i|^2.
inline double constellation_penalty(const ConstellationSpec& c) {
  double acc = 0.0;
  for (const auto& x : c.points()) {
    const double p = std::norm(x);
    if (p == 0.0) {
      throw BoundsError(ErrorCode::degenerate_constellation, "constellation contains the origin");
    }
    acc += 1.0 / p;
  }
  return acc / static_cast<double>(c.points().size());
}

// ---------------------------------------------------------------------------
// Radio parameters

/// Radio and frame constants shared by every base station. Defaults are the
/// 5G NR FR2 numerology used throughout the project's reference scenarios.
struct SystemParams {
  int n_tx_ant = 16;
  int n_rx_ant = 16;
  int symbols_per_frame = 1120;
  int active_subcarriers = 3168;
  double carrier_freq = 28e9;         // Hz
  double subcarrier_spacing = 120e3;  // Hz
  double symbol_duration = 8.92e-6;   // s, cyclic prefix included
  double frac_subcarriers = 0.2;
  double frac_symbols = 0.1;
  double total_power = 0.1;  // W (20 dBm)
  double noise_psd = 4e-20;  // W/Hz
  double tx_gain = 1.0;
  double rx_gain = 1.0;
  ConstellationSpec constellation = ConstellationSpec::qpsk();

  double wavelength() const { return kSpeedOfLight / carrier_freq; }

  /// Power one transmitter spends on sensing when nothing else says otherwise.
  double default_sensing_power() const { return frac_subcarriers * total_power; }

  /// Throws on any invariant violation other than the resource count check in derive_frame.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw BoundsError(ErrorCode::invalid_argument, what);
    };
    require(n_tx_ant >= 1, "n_tx_ant must be >= 1");
    require(n_rx_ant >= 1, "n_rx_ant must be >= 1");
    require(symbols_per_frame >= 1, "symbols_per_frame must be >= 1");
    require(active_subcarriers >= 1, "active_subcarriers must be >= 1");
    require(carrier_freq > 0.0, "carrier_freq must be > 0");
    require(subcarrier_spacing > 0.0, "subcarrier_spacing must be > 0");
    require(symbol_duration > 0.0, "symbol_duration must be > 0");
    require(frac_subcarriers > 0.0 && frac_subcarriers <= 1.0, "frac_subcarriers must be in (0, 1]");
    require(frac_symbols > 0.0 && frac_symbols <= 1.0, "frac_symbols must be in (0, 1]");
    require(total_power > 0.0, "total_power must be > 0");
    require(noise_psd > 0.0, "noise_psd must be > 0");
    require(tx_gain > 0.0 && rx_gain > 0.0, "antenna gains must be > 0");
  }

  bool operator==(const SystemParams&) const = default;
};

struct FrameDerived {
  int K = 0;                        // sensing subcarriers
  int M = 0;                        // sensing symbols
  double avg_power = 0.0;           // W per subcarrier at the default sensing power
  double noise_var = 0.0;           // N0 * df
  double noise_var_postdiv = 0.0;   // eta * N0 * df
  double eta = 1.0;
};

/// Resource counts use floor(rho * total); both must leave at least two samples.
inline FrameDerived derive_frame(const SystemParams& p) {
  p.validate();
  FrameDerived d;
  // the small epsilon keeps e.g. 0.1 * 1120 from flooring to 111
  d.K = static_cast<int>(std::floor(p.frac_subcarriers * p.active_subcarriers + 1e-9));
  d.M = static_cast<int>(std::floor(p.frac_symbols * p.symbols_per_frame + 1e-9));
  if (d.K < 2 || d.M < 2) {
    throw BoundsError(ErrorCode::insufficient_resources,
                      "need at least 2 sensing subcarriers and symbols (K=" + std::to_string(d.K) +
                          ", M=" + std::to_string(d.M) + ")");
  }
  d.eta = constellation_penalty(p.constellation);
  d.avg_power = p.default_sensing_power() / d.K;
  d.noise_var = p.noise_psd * p.subcarrier_spacing;
  d.noise_var_postdiv = d.eta * d.noise_var;
  return d;
}

// ---------------------------------------------------------------------------
// Network entities

enum class Role { monostatic, tx, rx };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::monostatic: return "monostatic";
    case Role::tx: return "tx";
    case Role::rx: return "rx";
  }
  return "?";
}

struct Node {
  std::string id;
  Vec2 position = Vec2::Zero();
  double orientation = 0.0;  // rad, boresight of the ULA w.r.t. the global x-axis
  Role role = Role::monostatic;
  std::string tx_id;                    // only for Role::rx
  std::optional<double> sensing_power;  // W; unset means SystemParams::default_sensing_power()

  bool transmits() const { return role != Role::rx; }
  bool receives() const { return role != Role::tx; }

  static Node monostatic(std::string id, Vec2 pos, double orientation) {
    return Node{std::move(id), pos, wrap_angle(orientation), Role::monostatic, {}, std::nullopt};
  }
  static Node transmitter(std::string id, Vec2 pos, double orientation) {
    return Node{std::move(id), pos, wrap_angle(orientation), Role::tx, {}, std::nullopt};
  }
  static Node receiver(std::string id, Vec2 pos, double orientation, std::string tx_id) {
    return Node{std::move(id), pos, wrap_angle(orientation), Role::rx, std::move(tx_id), std::nullopt};
  }

  bool operator==(const Node& o) const {
    return id == o.id && position == o.position && orientation == o.orientation && role == o.role &&
           tx_id == o.tx_id && sensing_power == o.sensing_power;
  }
};

/// Orientation that points a node's boresight at `toward`.
inline double facing(const Vec2& from, const Vec2& toward) {
  const Vec2 d = toward - from;
  return wrap_angle(std::atan2(d.y(), d.x()));
}

struct TargetState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double rcs = 1.0;    // m^2
  double phase = 0.0;  // rad, nuisance

  double speed() const { return velocity.norm(); }
  double heading() const { return std::atan2(velocity.y(), velocity.x()); }

  static TargetState at(Vec2 p, Vec2 v = Vec2::Zero(), double rcs = 1.0) {
    return TargetState{p, v, rcs, 0.0};
  }
  static TargetState polar(Vec2 p, double speed, double heading, double rcs = 1.0) {
    return TargetState{p, Vec2(speed * std::cos(heading), speed * std::sin(heading)), rcs, 0.0};
  }
};

enum class PowerPolicy { fixed_per_node, normalized_total };

struct Scenario {
  SystemParams params;
  std::vector<Node> nodes;
  PowerPolicy power_policy = PowerPolicy::normalized_total;

  const Node* find(const std::string& id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  std::size_t transmitter_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes) n += node.transmits() ? 1 : 0;
    return n;
  }

  double sensing_power_of(const Node& n) const {
    return n.sensing_power.value_or(params.default_sensing_power());
  }

  /// Checks ids, rx references and that at least one sensing link exists.
  void validate() const {
    params.validate();
    bool has_link = false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.id.empty()) throw BoundsError(ErrorCode::invalid_argument, "node id must not be empty");
      for (std::size_t j = 0; j < i; ++j) {
        if (nodes[j].id == n.id) throw BoundsError(ErrorCode::invalid_argument, "duplicate node id '" + n.id + "'");
      }
      if (n.orientation <= -kPi || n.orientation > kPi) {
        throw BoundsError(ErrorCode::invalid_argument, "orientation of '" + n.id + "' not in (-pi, pi]");
      }
      if (n.sensing_power && !(*n.sensing_power > 0.0)) {
        throw BoundsError(ErrorCode::invalid_argument, "sensing_power of '" + n.id + "' must be > 0");
      }
      if (n.role == Role::monostatic) has_link = true;
      if (n.role == Role::rx) {
        const Node* tx = find(n.tx_id);
        if (tx == nullptr || tx->role != Role::tx) {
          throw BoundsError(ErrorCode::invalid_argument,
                            "rx '" + n.id + "' references unknown tx '" + n.tx_id + "'");
        }
        has_link = true;
      }
    }
    if (!has_link) {
      throw BoundsError(ErrorCode::no_information, "scenario has no monostatic node and no tx/rx pair");
    }
  }

  bool operator==(const Scenario&) const = default;
};

}  // namespace isac
