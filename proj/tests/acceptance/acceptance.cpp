// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed here.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "isac/engine.hpp"
#include "isac/scenario_io.hpp"
#include "isac/validation.hpp"

using namespace isac;
namespace v = isac::validation;

namespace {

constexpr double kOracleTol = 1e-5;
constexpr double kCrlbTol = 1e-9;
constexpr double kEfimTol = 1e-9;
constexpr double kJacobianTol = 1e-6;
constexpr double kDegeneracyTol = 1e-6;
constexpr double kRankTol = 1e-12;
constexpr double kEtaTol = 0.01;
constexpr double kDbTol = 0.05;
constexpr double kNearBsPeb = 0.005;
constexpr double kNearBsRadius = 10.0;
constexpr double kSubCentimetre = 0.01;
constexpr double kVebApproxTol = 0.05;
constexpr double kOracleSeconds = 30.0;
constexpr double kHeatmapSeconds = 60.0;

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
    if (!cond) {
      ok = false;
      detail += " [x]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario load(const char* name) { return load_scenario(std::string(ISAC_SCENARIO_DIR) + "/" + name + ".json"); }

void add_checks(Verdict& vd, const std::vector<v::CheckResult>& rs, double tol) {
  for (const auto& r : rs) vd.require(r.pass() && r.tolerance <= tol, r.name + "=" + v::sci(r.worst));
}

Verdict c1() {
  Verdict vd;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = v::check_fim_oracle(200, 1);
  const double secs = seconds_since(t0);
  add_checks(vd, {r}, kOracleTol);
  vd.require(secs < kOracleSeconds, "time=" + v::sci(secs) + "s");
  return vd;
}

Verdict c2() {
  Verdict vd;
  const auto r = v::check_scalar_crlbs(200, 2);
  add_checks(vd, {r}, kCrlbTol);
  if (!r.note.empty()) vd.detail += " (" + r.note + ")";
  return vd;
}

Verdict c3() {
  Verdict vd;
  add_checks(vd, {v::check_efim_inverse(100, 3)}, kEfimTol);
  return vd;
}

Verdict c4() {
  Verdict vd;
  add_checks(vd, v::check_jacobians(100, 4), kJacobianTol);
  return vd;
}

Verdict c5() {
  Verdict vd;
  add_checks(vd, v::check_degeneracy(100, 5), kDegeneracyTol);
  return vd;
}

Verdict c6() {
  Verdict vd;
  const auto rs = v::check_rank(100, 6);
  for (const auto& r : rs) {
    // the collinear check reports 0 on success, so the rank tolerance covers both
    vd.require(r.pass() && r.tolerance <= kRankTol, r.name + "=" + v::sci(r.worst));
  }
  return vd;
}

Verdict c7() {
  Verdict vd;
  const auto rs = v::check_constellations();
  vd.require(rs.at(0).pass() && rs[0].tolerance <= kEtaTol, "eta_err=" + v::sci(rs[0].worst));
  vd.require(rs.at(1).pass() && rs[1].tolerance <= kDbTol, "db_err=" + v::sci(rs[1].worst));
  return vd;
}

Verdict c8() {
  Verdict vd;
  const GridSpec g{0, 84, 0, 84, 1};
  const McConfig mc;

  const Scenario mono = load("four_bs");
  const auto t0 = std::chrono::steady_clock::now();
  const auto cells = heatmap(mono, g, Metric::peb, mc, 1);
  const double secs = seconds_since(t0);
  vd.require(secs < kHeatmapSeconds, "time=" + v::sci(secs) + "s");

  for (const auto& n : mono.nodes) {
    double best = kInf;
    for (const auto& c : cells) {
      if ((Vec2(c.x, c.y) - n.position).norm() > kNearBsRadius) continue;
      if (c.flag.find("singular-geometry:" + n.id) != std::string::npos) continue;
      best = std::min(best, c.value);
    }
    vd.require(best < kNearBsPeb, n.id + "_min=" + v::sci(best));
  }

  // tx at (42,0) and receiver bs4 at (42,84): every interior cell on x = 42 is on that baseline
  const Scenario multi = load("multistatic");
  const auto mcells = heatmap(multi, g, Metric::peb, mc, 1);
  auto at = [&](int ix, int iy) { return mcells[static_cast<std::size_t>(iy) * g.nx() + ix]; };
  int on_line = 0, marked = 0;
  for (int iy = 1; iy < 84; ++iy) {
    ++on_line;
    const auto c = at(42, iy);
    const bool flagged = c.flag.find("on-baseline:tx>bs4") != std::string::npos;
    const bool elevated = !std::isfinite(c.value) || (c.value > at(41, iy).value && c.value > at(43, iy).value);
    if (flagged || elevated) ++marked;
  }
  vd.require(marked == on_line, "baseline_cells=" + std::to_string(marked) + "/" + std::to_string(on_line));
  return vd;
}

Verdict c9() {
  Verdict vd;
  const Vec2 target(70, 56);
  const McConfig mc;

  const Scenario mono = load("mono_pair");
  const Scenario bis = load("bistatic_pairs");
  const double pm = evaluate_metric(normalize_power(mono), target, Metric::peb, mc).value;
  const double pb = evaluate_metric(normalize_power(bis), target, Metric::peb, mc).value;
  vd.require(pb < kSubCentimetre, "bistatic_pairs=" + v::sci(pb));
  vd.require(pm > kSubCentimetre, "mono_pair=" + v::sci(pm));

  std::vector<double> nr;
  for (int n = 8; n <= 100; ++n) nr.push_back(n);
  int configs = 0, monotone = 0;
  for (const char* name : {"four_bs", "multistatic", "eight_node", "mixed", "mono_pair", "bistatic_pairs"}) {
    const Scenario s = load(name);
    for (Metric m : {Metric::peb, Metric::veb}) {
      ++configs;
      const auto pts = sweep(s, target, SweepParam::n_rx_ant, nr, m, mc);
      bool ok = true;
      for (std::size_t i = 1; i < pts.size(); ++i) ok = ok && pts[i].valid && pts[i].value < pts[i - 1].value;
      if (ok) {
        ++monotone;
      } else {
        vd.require(false, std::string(name) + "/" + to_string(m) + " not monotone");
      }
    }
  }
  vd.require(monotone == configs, "monotone=" + std::to_string(monotone) + "/" + std::to_string(configs));
  return vd;
}

Verdict c10() {
  Verdict vd;
  Scenario s = load("four_bs");
  s.params.n_rx_ant = 100;
  s = normalize_power(s);

  // gated on the named targets under every seeded heading; the area-wide figure is reported only
  McConfig mc;
  double worst = 0.0;
  std::size_t n = 0;
  for (const Vec2& p : {Vec2(70, 56), Vec2(12, 51), Vec2(42, 42), Vec2(70, 20), Vec2(13, 21), Vec2(23, 64),
                        Vec2(37, 50)}) {
    for (double h : draw_headings(mc.seed, 0, mc.draws)) {
      TargetState t = TargetState::at(p);
      t.velocity = Vec2(mc.speed * std::cos(h), mc.speed * std::sin(h));
      const auto r = evaluate(s, t);
      worst = std::max(worst, std::abs(r.veb - r.veb_exact) / r.veb_exact);
      ++n;
    }
  }
  vd.require(std::isfinite(worst) && worst <= kVebApproxTol,
             "veb_rel_gap=" + v::sci(worst) + " over " + std::to_string(n));

  McConfig area_mc;
  area_mc.draws = 100;
  const GridSpec area{0, 84, 0, 84, 2};
  const auto va = heatmap(s, area, Metric::veb, area_mc, 0);
  const auto ve = heatmap(s, area, Metric::veb_exact, area_mc, 0);
  std::size_t cells = 0, over = 0;
  double area_worst = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (!std::isfinite(va[i].value) || !std::isfinite(ve[i].value)) continue;
    const double gap = std::abs(va[i].value - ve[i].value) / ve[i].value;
    ++cells;
    over += gap > kVebApproxTol ? 1 : 0;
    area_worst = std::max(area_worst, gap);
  }
  vd.detail += " (area: " + std::to_string(over) + "/" + std::to_string(cells) + " cells above, worst " +
               v::sci(area_worst) + ")";

  const Scenario eight = load("eight_node");
  bool bs_differs = false, bs_stable = true;
  for (const Vec2& t : {Vec2(12, 51), Vec2(42, 42), Vec2(70, 20)}) {
    SelectionProblem prob;
    prob.params = eight.params;
    prob.power_policy = eight.power_policy;
    prob.candidates = eight.nodes;
    prob.choose = 4;
    prob.target = t;
    prob.mc = mc;
    prob.metric = Metric::peb;
    const auto a = select_nodes(prob, 1);
    prob.metric = Metric::veb;
    const auto b = select_nodes(prob, 1);
    const auto b2 = select_nodes(prob, 8);
    bs_differs = bs_differs || a.best.ids != b.best.ids;
    bs_stable = bs_stable && b.best.ids == b2.best.ids && b.best.value == b2.best.value;
  }
  vd.require(bs_differs, "bs_selection_metric_dependent");
  vd.require(bs_stable, "bs_selection_deterministic");

  bool tx_differs = false, tx_stable = true;
  for (const Vec2& t : {Vec2(13, 21), Vec2(23, 64), Vec2(70, 20), Vec2(37, 50)}) {
    const auto a = select_tx(eight, t, Metric::peb, mc, 1);
    const auto b = select_tx(eight, t, Metric::veb, mc, 1);
    const auto b2 = select_tx(eight, t, Metric::veb, mc, 8);
    tx_differs = tx_differs || a.best.ids != b.best.ids;
    tx_stable = tx_stable && b.best.ids == b2.best.ids && b.best.value == b2.best.value;
  }
  vd.require(tx_differs, "tx_selection_metric_dependent");
  vd.require(tx_stable, "tx_selection_deterministic");
  return vd;
}

Verdict c11() {
  Verdict vd;
  const Scenario s = load("four_bs");
  const GridSpec g{0, 84, 0, 84, 3};
  McConfig mc;
  mc.seed = 7;
  for (Metric m : {Metric::veb, Metric::peb}) {
    const auto ref = heatmap(s, g, m, mc, 1);
    for (unsigned w : {4u, 8u}) {
      const auto other = heatmap(s, g, m, mc, static_cast<int>(w));
      bool same = other.size() == ref.size();
      for (std::size_t i = 0; same && i < ref.size(); ++i) {
        same = std::memcmp(&ref[i].value, &other[i].value, sizeof(double)) == 0 && ref[i].flag == other[i].flag;
      }
      vd.require(same, std::string(to_string(m)) + "@" + std::to_string(w) + "_workers");
    }
  }
  return vd;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"oracle equivalence", c1},   {"closed-form CRLBs", c2},       {"EFIM inverse property", c3},
      {"Jacobian suite", c4},       {"degeneracy", c5},              {"rank law", c6},
      {"constellation penalties", c7}, {"heatmap reproduction", c8}, {"sweep trends", c9},
      {"VEB approximation and selection", c10}, {"engine determinism", c11}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict vd;
    try {
      vd = criteria[i].second();
    } catch (const std::exception& e) {
      vd.ok = false;
      vd.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %2zu %s: %s\n", vd.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, vd.detail.c_str());
    std::fflush(stdout);
    failed += vd.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
