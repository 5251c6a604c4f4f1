#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "isac/bounds.hpp"
#include "isac/errors.hpp"
#include "isac/model.hpp"
#include "isac/scenario_io.hpp"

namespace isac {

// ---------------------------------------------------------------------------
// Configuration types

struct GridSpec {
  double x_min = 0.0, x_max = 84.0;
  double y_min = 0.0, y_max = 84.0;
  double step = 1.0;
  double y_step = 0.0;  // 0 means same as step

  double dy() const { return y_step > 0.0 ? y_step : step; }

  void validate() const {
    if (!(step > 0.0) || y_step < 0.0) throw BoundsError(ErrorCode::invalid_argument, "grid step must be > 0");
    if (!(x_max > x_min) || !(y_max > y_min)) {
      throw BoundsError(ErrorCode::invalid_argument, "grid max must exceed min");
    }
  }
  std::size_t nx() const { return static_cast<std::size_t>(std::floor((x_max - x_min) / step + 1e-9)) + 1; }
  std::size_t ny() const { return static_cast<std::size_t>(std::floor((y_max - y_min) / dy() + 1e-9)) + 1; }
  std::size_t size() const { return nx() * ny(); }

  /// Row-major over y then x: index = iy * nx + ix.
  Vec2 point(std::size_t index) const {
    const std::size_t ix = index % nx(), iy = index / nx();
    return Vec2(x_min + static_cast<double>(ix) * step, y_min + static_cast<double>(iy) * dy());
  }
};

struct McConfig {
  std::size_t draws = 1000;
  std::uint64_t seed = 7;
  double speed = 22.0;  // m/s

  void validate() const {
    if (draws < 1) throw BoundsError(ErrorCode::invalid_argument, "Monte Carlo draws must be >= 1");
    if (!(speed > 0.0)) throw BoundsError(ErrorCode::invalid_argument, "Monte Carlo speed must be > 0");
  }
};

enum class Metric { peb, veb, veb_exact, crlb_heading };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::peb: return "peb";
    case Metric::veb: return "veb";
    case Metric::veb_exact: return "veb_exact";
    case Metric::crlb_heading: return "crlb_heading";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "peb") return Metric::peb;
  if (s == "veb") return Metric::veb;
  if (s == "veb_exact" || s == "veb-exact") return Metric::veb_exact;
  if (s == "crlb_heading" || s == "heading") return Metric::crlb_heading;
  throw BoundsError(ErrorCode::invalid_argument, "unknown metric '" + s + "'");
}

// ---------------------------------------------------------------------------
// Threads and random streams

/// Worker count: explicit request, else ISAC_BOUNDS_THREADS, else (0 or unset) all cores.
inline unsigned resolve_threads(int requested = -1) {
  long n = requested;
  if (n < 0) {
    const char* env = std::getenv("ISAC_BOUNDS_THREADS");
    n = 0;
    if (env != nullptr && *env != '\0') {
      char* end = nullptr;
      n = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || n < 0) {
        throw BoundsError(ErrorCode::invalid_argument, "ISAC_BOUNDS_THREADS must be a non-negative integer");
      }
    }
  }
  if (n == 0) n = static_cast<long>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<unsigned>(n);
}

/// Runs fn(i) for i in [0, n) on `workers` threads. Results must be written by index.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Heading sequence for one grid cell: depends only on (seed, stream), never on scheduling.
inline std::vector<double> draw_headings(std::uint64_t seed, std::uint64_t stream, std::size_t n) {
  std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL)));
  std::vector<double> out(n);
  for (auto& h : out) {
    // top 53 bits -> [0, 1); avoids implementation-defined distributions
    h = 2.0 * kPi * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Power

/// Materializes per-node sensing powers. Under normalized_total every transmitting node
/// gets rho_f * P_T / N_Tx; fixed_per_node leaves the scenario untouched.
inline Scenario normalize_power(const Scenario& s) {
  if (s.power_policy == PowerPolicy::fixed_per_node) return s;
  const std::size_t ntx = s.transmitter_count();
  if (ntx == 0) throw BoundsError(ErrorCode::no_information, "scenario has no transmitting node");
  Scenario out = s;
  const double each = s.params.default_sensing_power() / static_cast<double>(ntx);
  for (auto& n : out.nodes) {
    if (n.transmits()) {
      n.sensing_power = each;
    } else {
      n.sensing_power.reset();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metric evaluation at one target position

struct CellValue {
  double value = kInf;
  std::string flag;  // ';'-separated, empty when clean
};

namespace detail {

inline std::string join_flags(const std::vector<std::string>& flags) {
  std::set<std::string> uniq(flags.begin(), flags.end());
  std::string out;
  for (const auto& f : uniq) {
    if (!out.empty()) out += ';';
    out += f;
  }
  return out;
}

inline double velocity_metric(const SystemParams& p, const std::vector<LinkState>& links, const TargetState& t,
                              Metric metric, bool* singular) {
  if (metric == Metric::veb_exact) {
    Mat4 sum = Mat4::Zero();
    for (const auto& ls : links) sum += link_state_efim(p, ls, t);
    const Mat2 Ipp = sum.topLeftCorner<2, 2>();
    if (is_singular_2x2(Ipp)) {
      *singular = true;
      return kInf;
    }
    const Mat2 V =
        sum.bottomRightCorner<2, 2>() - sum.bottomLeftCorner<2, 2>() * Ipp.inverse() * sum.topRightCorner<2, 2>();
    const auto vb = polar_velocity_bounds(0.5 * (V + V.transpose()), t.velocity);
    *singular = vb.singular;
    return vb.veb();
  }
  Mat2 V = Mat2::Zero();
  for (const auto& ls : links) V += node_velocity_efim(p, ls, t);
  const auto vb = polar_velocity_bounds(V, t.velocity);
  *singular = vb.singular;
  return metric == Metric::veb ? vb.veb() : vb.crlb_heading;
}

}  // namespace detail

/// Velocity metrics average over mc.draws uniform headings at mc.speed, using the
/// random stream `stream`. Any singular draw makes the mean +inf; the flag records the fraction.
inline CellValue evaluate_metric(const Scenario& s, const Vec2& position, Metric metric, const McConfig& mc,
                                 std::uint64_t stream = 0) {
  CellValue out;
  TargetState t = TargetState::at(position);
  try {
    if (metric == Metric::peb) {
      std::vector<std::string> flags;
      out.value = network_peb(s, t, &flags);
      out.flag = detail::join_flags(flags);
      return out;
    }
    mc.validate();
    auto net = detail::collect_links(s, t);
    if (net.links.empty()) throw BoundsError(ErrorCode::no_information, "no link observes the target");
    const auto headings = draw_headings(mc.seed, stream, mc.draws);
    double acc = 0.0;
    std::size_t singular_count = 0;
    for (double h : headings) {
      t.velocity = Vec2(mc.speed * std::cos(h), mc.speed * std::sin(h));
      bool singular = false;
      acc += detail::velocity_metric(s.params, net.links, t, metric, &singular);
      singular_count += singular ? 1 : 0;
    }
    out.value = acc / static_cast<double>(mc.draws);
    if (singular_count > 0) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "singular-fraction=%.4g",
                    static_cast<double>(singular_count) / static_cast<double>(mc.draws));
      net.flags.emplace_back(buf);
    }
    out.flag = detail::join_flags(net.flags);
  } catch (const BoundsError& e) {
    if (e.code() != ErrorCode::no_information) throw;
    out.value = kInf;
    out.flag = to_string(e.code());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heatmaps

struct HeatCell {
  double x = 0.0, y = 0.0;
  double value = kInf;
  std::string flag;
};

inline std::vector<HeatCell> heatmap(const Scenario& s, const GridSpec& g, Metric metric, const McConfig& mc,
                                     int threads = -1) {
  g.validate();
  s.validate();
  const Scenario sn = normalize_power(s);
  std::vector<HeatCell> cells(g.size());
  parallel_for(cells.size(), resolve_threads(threads), [&](std::size_t i) {
    const Vec2 p = g.point(i);
    const auto v = evaluate_metric(sn, p, metric, mc, i);
    cells[i] = HeatCell{p.x(), p.y(), v.value, v.flag};
  });
  return cells;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParam { frac_subcarriers, frac_symbols, n_rx_ant };

inline const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::frac_subcarriers: return "frac_subcarriers";
    case SweepParam::frac_symbols: return "frac_symbols";
    case SweepParam::n_rx_ant: return "n_rx_ant";
  }
  return "?";
}

inline SweepParam parse_sweep_param(const std::string& s) {
  if (s == "frac_subcarriers") return SweepParam::frac_subcarriers;
  if (s == "frac_symbols") return SweepParam::frac_symbols;
  if (s == "n_rx_ant") return SweepParam::n_rx_ant;
  throw BoundsError(ErrorCode::invalid_argument, "unknown sweep parameter '" + s + "'");
}

struct SweepPoint {
  double parameter = 0.0;
  double value = kInf;
  std::string flag;
  bool valid = true;
};

inline Scenario with_parameter(const Scenario& s, SweepParam param, double value) {
  Scenario out = s;
  switch (param) {
    case SweepParam::frac_subcarriers: out.params.frac_subcarriers = value; break;
    case SweepParam::frac_symbols: out.params.frac_symbols = value; break;
    case SweepParam::n_rx_ant:
      if (value != std::floor(value)) throw BoundsError(ErrorCode::invalid_argument, "n_rx_ant must be an integer");
      out.params.n_rx_ant = static_cast<int>(value);
      break;
  }
  return out;
}

/// One metric value per parameter value. Power is re-normalized at every point; a value
/// that breaks the frame (K or M below 2, bad fraction) yields an invalid entry, not a gap.
inline std::vector<SweepPoint> sweep(const Scenario& s, const Vec2& target, SweepParam param,
                                     const std::vector<double>& values, Metric metric, const McConfig& mc,
                                     int threads = -1) {
  s.validate();
  std::vector<SweepPoint> out(values.size());
  parallel_for(values.size(), resolve_threads(threads), [&](std::size_t i) {
    SweepPoint pt;
    pt.parameter = values[i];
    try {
      const Scenario si = normalize_power(with_parameter(s, param, values[i]));
      si.validate();
      derive_frame(si.params);
      const auto v = evaluate_metric(si, target, metric, mc, 0);
      pt.value = v.value;
      pt.flag = v.flag;
    } catch (const BoundsError& e) {
      if (e.code() != ErrorCode::insufficient_resources && e.code() != ErrorCode::invalid_argument) throw;
      pt.valid = false;
      pt.value = std::numeric_limits<double>::quiet_NaN();
      pt.flag = e.what();
    }
    out[i] = pt;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Selection

struct SelectionProblem {
  SystemParams params;
  PowerPolicy power_policy = PowerPolicy::normalized_total;
  std::vector<Node> candidates;
  std::size_t choose = 1;
  Metric metric = Metric::peb;
  Vec2 target = Vec2::Zero();
  McConfig mc;
};

struct RankedChoice {
  std::vector<std::string> ids;  // sorted
  double value = kInf;
  std::string flag;
};

struct SelectionResult {
  RankedChoice best;
  std::vector<RankedChoice> ranking;  // best first
};

namespace detail {

inline constexpr double kTieTolerance = 1e-12;

inline bool ranks_before(const RankedChoice& a, const RankedChoice& b) {
  const bool fa = std::isfinite(a.value), fb = std::isfinite(b.value);
  if (fa != fb) return fa;
  if (fa && std::abs(a.value - b.value) > kTieTolerance * std::max(std::abs(a.value), std::abs(b.value))) {
    return a.value < b.value;
  }
  return a.ids < b.ids;
}

inline void rank(std::vector<RankedChoice>& v) { std::stable_sort(v.begin(), v.end(), ranks_before); }

}  // namespace detail

/// Exhaustive search over all C(n, k) subsets.
inline SelectionResult select_nodes(const SelectionProblem& p, int threads = -1) {
  const std::size_t n = p.candidates.size();
  if (p.choose < 1 || p.choose > n) throw BoundsError(ErrorCode::invalid_argument, "choose must be in [1, n]");
  std::vector<Node> cands = p.candidates;
  std::sort(cands.begin(), cands.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < n; ++i) {
    if (cands[i].id == cands[i - 1].id) throw BoundsError(ErrorCode::invalid_argument, "duplicate candidate id");
  }

  std::vector<std::vector<std::size_t>> subsets;
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(p.choose), true);
  do {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) idx.push_back(i);
    subsets.push_back(idx);
  } while (std::prev_permutation(mask.begin(), mask.end()));

  std::vector<RankedChoice> ranking(subsets.size());
  parallel_for(subsets.size(), resolve_threads(threads), [&](std::size_t k) {
    Scenario s;
    s.params = p.params;
    s.power_policy = p.power_policy;
    RankedChoice rc;
    for (auto i : subsets[k]) {
      s.nodes.push_back(cands[i]);
      rc.ids.push_back(cands[i].id);
    }
    try {
      s.validate();
      const auto v = evaluate_metric(normalize_power(s), p.target, p.metric, p.mc, 0);
      rc.value = v.value;
      rc.flag = v.flag;
    } catch (const BoundsError& e) {
      if (e.code() != ErrorCode::no_information && e.code() != ErrorCode::invalid_argument) throw;
      rc.value = kInf;
      rc.flag = e.what();
    }
    ranking[k] = std::move(rc);
  });
  detail::rank(ranking);
  if (ranking.empty() || !std::isfinite(ranking.front().value)) {
    throw BoundsError(ErrorCode::no_feasible_subset, "every subset has a singular bound");
  }
  return {ranking.front(), ranking};
}

/// Each node in turn transmits while every other node receives it as a bistatic Rx.
inline SelectionResult select_tx(const Scenario& s, const Vec2& target, Metric metric, const McConfig& mc,
                                 int threads = -1) {
  if (s.nodes.size() < 2) throw BoundsError(ErrorCode::invalid_argument, "select_tx needs at least 2 nodes");
  std::vector<RankedChoice> ranking(s.nodes.size());
  parallel_for(s.nodes.size(), resolve_threads(threads), [&](std::size_t k) {
    Scenario c;
    c.params = s.params;
    c.power_policy = s.power_policy;
    const Node& tx = s.nodes[k];
    c.nodes.push_back(Node::transmitter(tx.id, tx.position, tx.orientation));
    c.nodes.back().sensing_power = tx.sensing_power;
    for (std::size_t j = 0; j < s.nodes.size(); ++j) {
      if (j == k) continue;
      const Node& rx = s.nodes[j];
      c.nodes.push_back(Node::receiver(rx.id, rx.position, rx.orientation, tx.id));
    }
    RankedChoice rc;
    rc.ids = {tx.id};
    try {
      c.validate();
      const auto v = evaluate_metric(normalize_power(c), target, metric, mc, 0);
      rc.value = v.value;
      rc.flag = v.flag;
    } catch (const BoundsError& e) {
      if (e.code() != ErrorCode::no_information && e.code() != ErrorCode::invalid_argument) throw;
      rc.flag = e.what();
    }
    ranking[k] = std::move(rc);
  });
  detail::rank(ranking);
  if (!std::isfinite(ranking.front().value)) {
    throw BoundsError(ErrorCode::no_feasible_subset, "no transmitter choice gives a finite bound");
  }
  return {ranking.front(), ranking};
}

}  // namespace isac
