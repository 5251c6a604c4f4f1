#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "isac/errors.hpp"
#include "isac/model.hpp"

// Scenario documents are JSON. Angles may be given in radians (`orientation`) or
// degrees (`orientation_deg`); a node may instead say `facing: [x, y]`.
// Omitted radio parameters take the SystemParams defaults.

namespace isac {

namespace io_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw BoundsError(ErrorCode::parse_error, where + ": " + what);
}

inline void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) fail(where + "." + it.key(), "unknown key");
  }
}

inline double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

inline int get_count(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<int>();
}

inline Vec2 get_vec2(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) fail(where, "expected [x, y]");
  return Vec2(get_number(v[0], where + "[0]"), get_number(v[1], where + "[1]"));
}

inline double deg2rad(double d) { return d * kPi / 180.0; }

inline ConstellationSpec parse_constellation(const json& v, const std::string& where) {
  try {
    if (v.is_string()) return ConstellationSpec::by_name(v.get<std::string>());
    check_keys(v, where, {"name", "points"});
    if (!v.contains("points") || !v["points"].is_array()) fail(where + ".points", "expected a list of [re, im]");
    std::vector<std::complex<double>> pts;
    for (std::size_t i = 0; i < v["points"].size(); ++i) {
      const Vec2 p = get_vec2(v["points"][i], where + ".points[" + std::to_string(i) + "]");
      pts.emplace_back(p.x(), p.y());
    }
    const std::string name = v.contains("name") ? v["name"].get<std::string>() : "custom";
    double mean_power = 0.0;
    for (const auto& x : pts) mean_power += std::norm(x);
    mean_power /= static_cast<double>(std::max<std::size_t>(pts.size(), 1));
    // already normalized points are kept bit-exact so documents round-trip
    if (std::abs(mean_power - 1.0) <= 1e-12) return ConstellationSpec::from_points(std::move(pts), name);
    return ConstellationSpec::normalized(std::move(pts), name);
  } catch (const BoundsError& e) {
    if (e.code() == ErrorCode::parse_error) throw;
    fail(where, e.what());
  }
}

inline SystemParams parse_params(const json& j, const std::string& where) {
  check_keys(j, where,
             {"n_tx_ant", "n_rx_ant", "symbols_per_frame", "active_subcarriers", "carrier_freq",
              "subcarrier_spacing", "symbol_duration", "frac_subcarriers", "frac_symbols", "total_power",
              "total_power_dbm", "noise_psd", "tx_gain", "rx_gain", "tx_gain_db", "rx_gain_db", "constellation"});
  SystemParams p;
  auto count = [&](const char* key, int& out) {
    if (j.contains(key)) out = get_count(j[key], where + "." + key);
  };
  auto number = [&](const char* key, double& out) {
    if (j.contains(key)) out = get_number(j[key], where + "." + key);
  };
  count("n_tx_ant", p.n_tx_ant);
  count("n_rx_ant", p.n_rx_ant);
  count("symbols_per_frame", p.symbols_per_frame);
  count("active_subcarriers", p.active_subcarriers);
  number("carrier_freq", p.carrier_freq);
  number("subcarrier_spacing", p.subcarrier_spacing);
  number("symbol_duration", p.symbol_duration);
  number("frac_subcarriers", p.frac_subcarriers);
  number("frac_symbols", p.frac_symbols);
  number("total_power", p.total_power);
  number("noise_psd", p.noise_psd);
  number("tx_gain", p.tx_gain);
  number("rx_gain", p.rx_gain);
  if (j.contains("total_power_dbm")) {
    if (j.contains("total_power")) fail(where, "give total_power or total_power_dbm, not both");
    p.total_power = dbm_to_watt(get_number(j["total_power_dbm"], where + ".total_power_dbm"));
  }
  if (j.contains("tx_gain_db")) p.tx_gain = db_to_linear(get_number(j["tx_gain_db"], where + ".tx_gain_db"));
  if (j.contains("rx_gain_db")) p.rx_gain = db_to_linear(get_number(j["rx_gain_db"], where + ".rx_gain_db"));
  if (j.contains("constellation")) p.constellation = parse_constellation(j["constellation"], where + ".constellation");
  try {
    p.validate();
  } catch (const BoundsError& e) {
    fail(where, e.what());
  }
  return p;
}

inline Node parse_node(const json& j, const std::string& where) {
  check_keys(j, where,
             {"id", "position", "orientation", "orientation_deg", "facing", "role", "tx", "sensing_power"});
  Node n;
  if (!j.contains("id") || !j["id"].is_string()) fail(where + ".id", "expected a string");
  n.id = j["id"].get<std::string>();
  if (!j.contains("position")) fail(where + ".position", "missing");
  n.position = get_vec2(j["position"], where + ".position");

  const int given = int(j.contains("orientation")) + int(j.contains("orientation_deg")) + int(j.contains("facing"));
  if (given != 1) fail(where, "exactly one of orientation, orientation_deg, facing is required");
  if (j.contains("orientation")) n.orientation = get_number(j["orientation"], where + ".orientation");
  if (j.contains("orientation_deg")) n.orientation = deg2rad(get_number(j["orientation_deg"], where + ".orientation_deg"));
  if (j.contains("facing")) {
    const Vec2 to = get_vec2(j["facing"], where + ".facing");
    if ((to - n.position).norm() == 0.0) fail(where + ".facing", "node cannot face its own position");
    n.orientation = facing(n.position, to);
  }
  n.orientation = wrap_angle(n.orientation);

  const std::string role = j.contains("role") ? j["role"].get<std::string>() : "monostatic";
  if (role == "monostatic") {
    n.role = Role::monostatic;
  } else if (role == "tx") {
    n.role = Role::tx;
  } else if (role == "rx") {
    n.role = Role::rx;
    if (!j.contains("tx") || !j["tx"].is_string()) fail(where + ".tx", "rx nodes need the id of their tx");
    n.tx_id = j["tx"].get<std::string>();
  } else {
    fail(where + ".role", "expected monostatic, tx or rx");
  }
  if (n.role != Role::rx && j.contains("tx")) fail(where + ".tx", "only rx nodes reference a tx");
  if (j.contains("sensing_power")) n.sensing_power = get_number(j["sensing_power"], where + ".sensing_power");
  return n;
}

inline const char* policy_name(PowerPolicy p) {
  return p == PowerPolicy::fixed_per_node ? "fixed_per_node" : "normalized_total";
}

inline Scenario build_scenario(const json& j) {
  check_keys(j, "$", {"params", "nodes", "power_policy"});
  Scenario s;
  if (j.contains("params")) s.params = io_detail::parse_params(j["params"], "$.params");
  if (j.contains("power_policy")) {
    const auto v = j["power_policy"];
    if (v == "normalized_total") {
      s.power_policy = PowerPolicy::normalized_total;
    } else if (v == "fixed_per_node") {
      s.power_policy = PowerPolicy::fixed_per_node;
    } else {
      io_detail::fail("$.power_policy", "expected normalized_total or fixed_per_node");
    }
  }
  if (!j.contains("nodes") || !j["nodes"].is_array()) io_detail::fail("$.nodes", "expected a list of nodes");
  for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
    s.nodes.push_back(io_detail::parse_node(j["nodes"][i], "$.nodes[" + std::to_string(i) + "]"));
  }
  try {
    s.validate();
  } catch (const BoundsError& e) {
    if (e.code() == ErrorCode::no_information) throw;
    io_detail::fail("$", e.what());
  }
  return s;
}

}  // namespace io_detail

inline Scenario parse_scenario(const std::string& text) {
  using io_detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw BoundsError(ErrorCode::parse_error, std::string("document: ") + e.what());
  }
  try {
    return io_detail::build_scenario(j);
  } catch (const json::exception& e) {
    throw BoundsError(ErrorCode::parse_error, std::string("document: ") + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BoundsError(ErrorCode::io_error, "cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

/// Inverse of parse_scenario: all parameters written out, angles in radians.
inline std::string dump_scenario(const Scenario& s, int indent = 2) {
  using io_detail::json;
  const auto& p = s.params;
  json params = {{"n_tx_ant", p.n_tx_ant},
                 {"n_rx_ant", p.n_rx_ant},
                 {"symbols_per_frame", p.symbols_per_frame},
                 {"active_subcarriers", p.active_subcarriers},
                 {"carrier_freq", p.carrier_freq},
                 {"subcarrier_spacing", p.subcarrier_spacing},
                 {"symbol_duration", p.symbol_duration},
                 {"frac_subcarriers", p.frac_subcarriers},
                 {"frac_symbols", p.frac_symbols},
                 {"total_power", p.total_power},
                 {"noise_psd", p.noise_psd},
                 {"tx_gain", p.tx_gain},
                 {"rx_gain", p.rx_gain}};
  json pts = json::array();
  for (const auto& x : p.constellation.points()) pts.push_back({x.real(), x.imag()});
  params["constellation"] = {{"name", p.constellation.name()}, {"points", pts}};

  json nodes = json::array();
  for (const auto& n : s.nodes) {
    json jn = {{"id", n.id},
               {"position", {n.position.x(), n.position.y()}},
               {"orientation", n.orientation},
               {"role", to_string(n.role)}};
    if (n.role == Role::rx) jn["tx"] = n.tx_id;
    if (n.sensing_power) jn["sensing_power"] = *n.sensing_power;
    nodes.push_back(jn);
  }
  json doc = {{"params", params}, {"power_policy", io_detail::policy_name(s.power_policy)}, {"nodes", nodes}};
  return doc.dump(indent);
}

}  // namespace isac
