#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isac/bounds.hpp"
#include "isac/engine.hpp"
#include "isac/errors.hpp"
#include "isac/scenario_io.hpp"
#include "isac/table.hpp"
#include "isac/validation.hpp"

namespace isac::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitInfeasible = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Command {
  std::string verb;
  std::string scenario_path;
  std::optional<Vec2> target;
  std::optional<Vec2> velocity;
  std::optional<GridSpec> grid;
  Metric metric = Metric::peb;
  McConfig mc;
  std::string output_path;
  Format format = Format::csv;
  std::string param;
  std::vector<double> values;
  std::size_t k = 0;
  std::vector<std::string> candidates;
  std::size_t draws = 200;  // validate only
  bool help = false;
  std::string help_text;
};

// ---------------------------------------------------------------------------
// Argument value parsers

namespace parse_detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": '" + s + "' is not a finite number");
  }
}

}  // namespace parse_detail

/// "x,y"
inline Vec2 parse_point(const std::string& s, const std::string& what) {
  const auto parts = parse_detail::split(s, ',');
  if (parts.size() != 2) throw UsageError(what + ": expected x,y");
  return Vec2(parse_detail::to_double(parts[0], what), parse_detail::to_double(parts[1], what));
}

/// "x0:x1:dx,y0:y1:dy", or a single "a:b:s" used for both axes.
inline GridSpec parse_grid(const std::string& s) {
  auto axis = [](const std::string& a, double& lo, double& hi, double& step) {
    const auto p = parse_detail::split(a, ':');
    if (p.size() != 3) throw UsageError("--grid: expected min:max:step");
    lo = parse_detail::to_double(p[0], "--grid");
    hi = parse_detail::to_double(p[1], "--grid");
    step = parse_detail::to_double(p[2], "--grid");
  };
  const auto parts = parse_detail::split(s, ',');
  if (parts.empty() || parts.size() > 2) throw UsageError("--grid: expected x0:x1:dx,y0:y1:dy");
  GridSpec g;
  axis(parts[0], g.x_min, g.x_max, g.step);
  if (parts.size() == 2) {
    double dy = 0.0;
    axis(parts[1], g.y_min, g.y_max, dy);
    g.y_step = dy;
  } else {
    g.y_min = g.x_min;
    g.y_max = g.x_max;
  }
  try {
    g.validate();
  } catch (const BoundsError& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  }
  return g;
}

/// "v1,v2,..." or an inclusive range "a:b:step".
inline std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto p = parse_detail::split(s, ':');
    if (p.size() != 3) throw UsageError("--values: expected a:b:step");
    const double a = parse_detail::to_double(p[0], "--values"), b = parse_detail::to_double(p[1], "--values"),
                 st = parse_detail::to_double(p[2], "--values");
    if (!(st > 0.0) || b < a) throw UsageError("--values: need step > 0 and b >= a");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / st + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * st);
    return out;
  }
  for (const auto& v : parse_detail::split(s, ',')) out.push_back(parse_detail::to_double(v, "--values"));
  if (out.empty()) throw UsageError("--values: empty list");
  return out;
}

// ---------------------------------------------------------------------------
// Command parsing

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"link", "peb", "veb", "heatmap", "sweep", "select-bs", "select-tx",
                                          "validate"};
  return v;
}

/// `args` excludes the program name. Throws UsageError; a help request returns help=true.
inline Command parse_command(const std::vector<std::string>& args) {
  CLI::App app{"Accuracy bounds for OFDM MIMO sensing networks", "isac_bounds"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  struct Raw {
    std::string scenario, target, velocity, grid, metric, format = "csv", output, param, values, candidates;
    std::size_t mc = 1000, k = 0, draws = 200;
    std::uint64_t seed = 7;
    double speed = 22.0;
  } raw;

  auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    if (needs_scenario) sub->add_option("--scenario", raw.scenario, "Scenario JSON document")->required();
    sub->add_option("--format", raw.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--output,-o", raw.output, "Output path (default stdout)");
  };
  auto add_mc = [&](CLI::App* sub) {
    sub->add_option("--mc", raw.mc, "Monte Carlo heading draws")->check(CLI::PositiveNumber);
    sub->add_option("--seed", raw.seed, "Random seed");
    sub->add_option("--speed", raw.speed, "Target speed for heading draws (m/s)");
  };
  auto add_metric = [&](CLI::App* sub) {
    sub->add_option("--metric", raw.metric, "peb, veb, veb_exact or crlb_heading");
  };
  auto add_target = [&](CLI::App* sub) { sub->add_option("--target", raw.target, "Target position x,y (m)")->required(); };

  auto* link = app.add_subcommand("link", "Per-link SNR and scalar CRLBs at one target");
  add_common(link, true);
  add_target(link);
  link->add_option("--velocity", raw.velocity, "Target velocity vx,vy (m/s)");

  auto* peb = app.add_subcommand("peb", "Position error bound at one target");
  add_common(peb, true);
  add_target(peb);

  auto* veb = app.add_subcommand("veb", "Velocity error bounds at one target");
  add_common(veb, true);
  add_target(veb);
  veb->add_option("--velocity", raw.velocity, "Target velocity vx,vy (m/s); omit to average over headings");
  add_mc(veb);

  auto* heat = app.add_subcommand("heatmap", "Metric over a grid of target positions");
  add_common(heat, true);
  heat->add_option("--grid", raw.grid, "x0:x1:dx,y0:y1:dy")->required();
  add_metric(heat);
  add_mc(heat);

  auto* sw = app.add_subcommand("sweep", "Metric versus one radio parameter");
  add_common(sw, true);
  add_target(sw);
  sw->add_option("--param", raw.param, "frac_subcarriers, frac_symbols or n_rx_ant")->required();
  sw->add_option("--values", raw.values, "v1,v2,... or a:b:step")->required();
  add_metric(sw);
  add_mc(sw);

  auto* sbs = app.add_subcommand("select-bs", "Best k-subset of monostatic nodes");
  add_common(sbs, true);
  add_target(sbs);
  sbs->add_option("--k", raw.k, "Subset size")->required()->check(CLI::PositiveNumber);
  sbs->add_option("--candidates", raw.candidates, "Comma-separated node ids (default all)");
  add_metric(sbs);
  add_mc(sbs);

  auto* stx = app.add_subcommand("select-tx", "Best transmitter with all other nodes receiving");
  add_common(stx, true);
  add_target(stx);
  add_metric(stx);
  add_mc(stx);

  auto* val = app.add_subcommand("validate", "Run the oracle check suite");
  add_common(val, false);
  val->add_option("--draws", raw.draws, "Random draws for the FIM checks")->check(CLI::PositiveNumber);
  val->add_option("--seed", raw.seed, "Random seed");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    Command c;
    c.help = true;
    c.help_text = app.help();
    return c;
  } catch (const CLI::CallForAllHelp&) {
    Command c;
    c.help = true;
    c.help_text = app.help("", CLI::AppFormatMode::All);
    return c;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto* sub : app.get_subcommands()) msg += "\n\n" + sub->help();
    if (app.get_subcommands().empty()) msg += "\n\n" + app.help();
    throw UsageError(msg);
  }

  Command c;
  c.verb = app.get_subcommands().front()->get_name();
  c.scenario_path = raw.scenario;
  c.output_path = raw.output;
  c.format = raw.format == "json" ? Format::json : Format::csv;
  if (!raw.target.empty()) c.target = parse_point(raw.target, "--target");
  if (!raw.velocity.empty()) c.velocity = parse_point(raw.velocity, "--velocity");
  if (!raw.grid.empty()) c.grid = parse_grid(raw.grid);
  if (!raw.metric.empty()) {
    try {
      c.metric = parse_metric(raw.metric);
    } catch (const BoundsError& e) {
      throw UsageError(std::string("--metric: ") + e.what());
    }
  }
  c.mc.draws = raw.mc;
  c.mc.seed = raw.seed;
  c.mc.speed = raw.speed;
  if (!(c.mc.speed > 0.0)) throw UsageError("--speed must be > 0");
  c.param = raw.param;
  if (c.verb == "sweep") {
    try {
      parse_sweep_param(raw.param);
    } catch (const BoundsError& e) {
      throw UsageError(std::string("--param: ") + e.what());
    }
    c.values = parse_values(raw.values);
  }
  c.k = raw.k;
  if (!raw.candidates.empty()) c.candidates = parse_detail::split(raw.candidates, ',');
  c.draws = raw.draws;
  return c;
}

// ---------------------------------------------------------------------------
// Verb implementations; each returns the table to emit.

namespace run_detail {

inline Table metric_table() { return Table{{"x", "y", "metric", "value", "flag"}, {}}; }

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : sep) + s;
  return out;
}

inline Table run_link(const Scenario& s, const Command& c) {
  Table t{{"link", "tx", "rx", "snr_db", "crlb_fd", "crlb_tau", "crlb_theta", "crlb_range", "peb_link", "flag"}, {}};
  TargetState target = TargetState::at(*c.target, c.velocity.value_or(Vec2::Zero()));
  bool any = false;
  for (const auto& ref : enumerate_links(s)) {
    try {
      LinkState ls = analyze_link(s.params, *ref.tx, *ref.rx, target, effective_sensing_power(s, *ref.tx));
      ls.ref = ref;
      const auto cr = scalar_crlbs(s.params, ls.geometry, target.rcs, ls.sensing_power);
      const auto pc = link_position_efim(ls, target);
      std::string flag;
      double peb = kInf;
      if (pc.forward_fallback) flag = "forward-jacobian";
      if (is_singular_2x2(pc.efim)) {
        flag += flag.empty() ? "singular-position-efim" : ";singular-position-efim";
      } else {
        peb = std::sqrt(pc.efim.inverse().trace());
      }
      // bistatic range error is the range row for a bistatic pair
      const double range = ref.monostatic() ? cr.range : cr.bistatic_range;
      t.add({ref.id(), ref.tx->id, ref.rx->id, linear_to_db(ls.snr.snr), cr.fd, cr.tau, cr.theta, range, peb, flag});
      any = true;
    } catch (const BoundsError& e) {
      if (e.code() != ErrorCode::out_of_field && e.code() != ErrorCode::singular_geometry) throw;
      t.add({ref.id(), ref.tx->id, ref.rx->id, -kInf, kInf, kInf, kInf, kInf, kInf, std::string(to_string(e.code()))});
    }
  }
  if (!any) throw BoundsError(ErrorCode::no_information, "no link observes the target");
  return t;
}

inline Table run_peb(const Scenario& s, const Command& c) {
  Table t = metric_table();
  std::vector<std::string> flags;
  const double v = network_peb(normalize_power(s), TargetState::at(*c.target), &flags);
  t.add({c.target->x(), c.target->y(), std::string("peb"), v, isac::detail::join_flags(flags)});
  return t;
}

inline Table run_veb(const Scenario& s, const Command& c) {
  Table t = metric_table();
  const Scenario sn = normalize_power(s);
  const double x = c.target->x(), y = c.target->y();
  if (c.velocity) {
    const auto rep = evaluate(sn, TargetState::at(*c.target, *c.velocity));
    const std::string flag = isac::detail::join_flags(rep.flags);
    t.add({x, y, std::string("veb"), rep.veb, flag});
    t.add({x, y, std::string("veb_exact"), rep.veb_exact, flag});
    t.add({x, y, std::string("crlb_heading"), rep.crlb_heading, flag});
    return t;
  }
  for (Metric m : {Metric::veb, Metric::veb_exact, Metric::crlb_heading}) {
    const auto v = evaluate_metric(sn, *c.target, m, c.mc, 0);
    if (v.flag == to_string(ErrorCode::no_information)) {
      throw BoundsError(ErrorCode::no_information, "no link observes the target");
    }
    t.add({x, y, std::string(to_string(m)), v.value, v.flag});
  }
  return t;
}

inline Table run_heatmap(const Scenario& s, const Command& c) {
  Table t = metric_table();
  const std::string name = to_string(c.metric);
  for (const auto& cell : heatmap(s, *c.grid, c.metric, c.mc)) t.add({cell.x, cell.y, name, cell.value, cell.flag});
  return t;
}

inline Table run_sweep(const Scenario& s, const Command& c) {
  Table t{{"param", "param_value", "metric", "value", "flag"}, {}};
  const auto param = parse_sweep_param(c.param);
  const std::string name = to_string(c.metric);
  for (const auto& pt : sweep(s, *c.target, param, c.values, c.metric, c.mc)) {
    t.add({c.param, pt.parameter, name, pt.value, pt.valid ? pt.flag : "invalid:" + pt.flag});
  }
  return t;
}

inline Table ranking_table(const SelectionResult& r, const std::string& key, Metric m) {
  Table t{{"rank", key, "metric", "value", "flag"}, {}};
  long long rank = 1;
  for (const auto& rc : r.ranking) t.add({rank++, join(rc.ids, "+"), std::string(to_string(m)), rc.value, rc.flag});
  return t;
}

inline Table run_select_bs(const Scenario& s, const Command& c) {
  SelectionProblem p;
  p.params = s.params;
  p.power_policy = s.power_policy;
  p.choose = c.k;
  p.metric = c.metric;
  p.target = *c.target;
  p.mc = c.mc;
  if (c.candidates.empty()) {
    p.candidates = s.nodes;
  } else {
    for (const auto& id : c.candidates) {
      const Node* n = s.find(id);
      if (n == nullptr) throw BoundsError(ErrorCode::invalid_argument, "--candidates: no node '" + id + "'");
      p.candidates.push_back(*n);
    }
  }
  if (c.k > p.candidates.size()) throw BoundsError(ErrorCode::invalid_argument, "--k exceeds the candidate count");
  return ranking_table(select_nodes(p), "nodes", c.metric);
}

inline Table run_select_tx(const Scenario& s, const Command& c) {
  return ranking_table(select_tx(s, *c.target, c.metric, c.mc), "tx", c.metric);
}

inline Table run_validate(const Command& c, bool* all_pass) {
  using namespace validation;
  std::vector<CheckResult> results;
  results.push_back(check_fim_oracle(c.draws, c.mc.seed));
  results.push_back(check_scalar_crlbs(c.draws, c.mc.seed + 1));
  results.push_back(check_efim_inverse(c.draws, c.mc.seed + 2));
  for (auto& r : check_oracle_identities(50, c.mc.seed + 3)) results.push_back(r);
  for (auto& r : check_jacobians(100, c.mc.seed + 4)) results.push_back(r);
  for (auto& r : check_degeneracy(100, c.mc.seed + 5)) results.push_back(r);
  for (auto& r : check_rank(100, c.mc.seed + 6)) results.push_back(r);
  for (auto& r : check_constellations()) results.push_back(r);

  Table t{{"check", "worst", "tolerance", "samples", "status", "note"}, {}};
  *all_pass = true;
  for (const auto& r : results) {
    *all_pass = *all_pass && r.pass();
    t.add({r.name, r.worst, r.tolerance, static_cast<long long>(r.samples), std::string(r.pass() ? "pass" : "FAIL"),
           r.note});
  }
  return t;
}

}  // namespace run_detail

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_error: return kExitIo;
    case ErrorCode::parse_error:
    case ErrorCode::invalid_argument: return kExitUsage;
    default: return kExitInfeasible;
  }
}

/// Executes a parsed command. Results go to `out` (or the --output file), diagnostics to `err`.
inline int run(const Command& c, std::ostream& out, std::ostream& err) {
  if (c.help) {
    out << c.help_text;
    return kExitOk;
  }
  try {
    Table t;
    int code = kExitOk;
    if (c.verb == "validate") {
      bool pass = false;
      t = run_detail::run_validate(c, &pass);
      if (!pass) code = kExitCheckFailed;
    } else {
      const Scenario s = load_scenario(c.scenario_path);
      if (c.verb == "link") t = run_detail::run_link(s, c);
      else if (c.verb == "peb") t = run_detail::run_peb(s, c);
      else if (c.verb == "veb") t = run_detail::run_veb(s, c);
      else if (c.verb == "heatmap") t = run_detail::run_heatmap(s, c);
      else if (c.verb == "sweep") t = run_detail::run_sweep(s, c);
      else if (c.verb == "select-bs") t = run_detail::run_select_bs(s, c);
      else if (c.verb == "select-tx") t = run_detail::run_select_tx(s, c);
      else throw UsageError("unknown verb '" + c.verb + "'");
    }
    emit_table(t, c.format, c.output_path, out);
    if (code == kExitCheckFailed) err << "validate: at least one check failed\n";
    return code;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BoundsError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
}

inline int main_entry(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  Command c;
  try {
    c = parse_command(args);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return run(c, out, err);
}

}  // namespace isac::cli
