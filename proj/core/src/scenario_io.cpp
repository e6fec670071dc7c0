#include "nlosloc/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nlosloc/angles.hpp"
#include "nlosloc/errors.hpp"

namespace nlos {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

double number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + ": '" + key + "' must be finite");
  return x;
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

int integer_or(const json& obj, const char* key, int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + ": '" + key + "' must be an integer");
  return v.get<int>();
}

std::uint64_t seed_or(const json& obj, std::uint64_t fallback, const std::string& where) {
  if (!obj.contains("seed")) return fallback;
  const json& v = obj.at("seed");
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(where + ": 'seed' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::vector<double> numbers(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(where + ": '" + key + "' must be an array");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) throw ConfigError(where + ": '" + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string text(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!obj.at(key).is_string()) throw ConfigError(where + ": '" + key + "' must be a string");
  return obj.at(key).get<std::string>();
}

json parse_json(const std::string& text_in) {
  try {
    return json::parse(text_in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

struct SupportRule {
  std::string mode = "band";
  double halfwidth = deg_to_rad(10.0);
  double step = deg_to_rad(5.0);
  std::optional<double> center;
  std::vector<double> angles;
  std::vector<double> prior;
};

SupportRule parse_support(const json& obj, SupportRule rule, const std::string& where) {
  check_keys(obj, {"mode", "band_halfwidth_deg", "band_step_deg", "center_deg", "angles_deg", "prior"}, where);
  if (obj.contains("mode")) rule.mode = text(obj, "mode", where);
  if (rule.mode == "band") {
    rule.halfwidth = deg_to_rad(number_or(obj, "band_halfwidth_deg", rad_to_deg(rule.halfwidth), where));
    rule.step = deg_to_rad(number_or(obj, "band_step_deg", rad_to_deg(rule.step), where));
    if (obj.contains("center_deg")) rule.center = deg_to_rad(number(obj, "center_deg", where));
  } else if (rule.mode == "list") {
    if (obj.contains("angles_deg")) {
      rule.angles.clear();
      for (double a : numbers(obj, "angles_deg", where)) rule.angles.push_back(deg_to_rad(a));
    }
    if (rule.angles.empty()) throw ConfigError(where + ": list support needs angles_deg");
  } else {
    throw ConfigError(where + ": support mode must be 'band' or 'list'");
  }
  if (obj.contains("prior")) rule.prior = numbers(obj, "prior", where);
  return rule;
}

ScattererSupport build_support(const SupportRule& rule, double true_gamma) {
  ScattererSupport s = rule.mode == "band" ? ScattererSupport::band(rule.center.value_or(true_gamma), rule.halfwidth,
                                                                    rule.step)
                                           : ScattererSupport::uniform(rule.angles);
  if (!rule.prior.empty()) {
    if (rule.prior.size() != s.size()) throw ConfigError("support prior size does not match its angles");
    s.prior = rule.prior;
  }
  return s;
}

PropagationPath parse_path(const json& obj, const Vec2& target, const Vec2& p, const std::string& where) {
  check_keys(obj,
             {"node_id", "gamma_deg", "aoa_deg", "wall_x_m", "wall_y_m", "arrival_offset_deg", "departure_offset_deg",
              "los", "support"},
             where);
  const bool has_gamma = obj.contains("gamma_deg");
  const bool has_offsets = obj.contains("arrival_offset_deg") || obj.contains("departure_offset_deg");
  const bool has_wall = obj.contains("wall_x_m") || obj.contains("wall_y_m");
  const bool los = obj.value("los", false);
  if (los || (!has_gamma && !has_offsets && !has_wall)) {
    const double b = bearing(target - p);
    return PropagationPath{b, b};
  }
  if (has_offsets) {
    if (has_gamma || has_wall) throw ConfigError(where + ": offsets cannot be combined with gamma or a wall");
    return path_from_offsets(target, p, deg_to_rad(number(obj, "arrival_offset_deg", where)),
                             deg_to_rad(number(obj, "departure_offset_deg", where)));
  }
  if (!has_gamma) throw ConfigError(where + ": a wall needs gamma_deg");
  const double gamma = deg_to_rad(number(obj, "gamma_deg", where));
  if (has_wall) {
    const Vec2 w(number(obj, "wall_x_m", where), number(obj, "wall_y_m", where));
    const auto r = reflect_off_wall(target, p, w, gamma);
    if (!r) throw ConfigError(where + ": no single bounce off the given wall");
    return r->path;
  }
  if (!obj.contains("aoa_deg")) throw ConfigError(where + ": gamma_deg needs aoa_deg or a wall point");
  return PropagationPath{wrap_2pi(gamma), wrap_2pi(deg_to_rad(number(obj, "aoa_deg", where)))};
}

Topology parse_topology(const json& v, const std::vector<int>& ids, const std::string& where) {
  const std::size_t m = ids.size();
  if (v.is_string()) {
    const std::string name = v.get<std::string>();
    if (name == "complete") return Topology::complete(m);
    if (name == "star") return Topology::star(m);
    if (name == "ring") return Topology::ring(m);
    throw ConfigError(where + ": topology must be complete, star, ring or an adjacency object");
  }
  check_keys(v, {"adjacency"}, where);
  const json& adj = v.at("adjacency");
  if (!adj.is_object()) throw ConfigError(where + ": adjacency must map node ids to neighbor lists");
  std::map<int, std::size_t> index;
  for (std::size_t k = 0; k < m; ++k) index[ids[k]] = k;
  auto lookup = [&](int id) {
    const auto it = index.find(id);
    if (it == index.end()) throw ConfigError(where + ": adjacency names unknown node " + std::to_string(id));
    return it->second;
  };
  Topology t(m);
  for (const auto& item : adj.items()) {
    int id = 0;
    try {
      id = std::stoi(item.key());
    } catch (const std::exception&) {
      throw ConfigError(where + ": adjacency key '" + item.key() + "' is not a node id");
    }
    if (!item.value().is_array()) throw ConfigError(where + ": adjacency entries must be arrays");
    for (const json& nb : item.value()) {
      if (!nb.is_number_integer()) throw ConfigError(where + ": adjacency entries must be node ids");
      const std::size_t a = lookup(id);
      const std::size_t b = lookup(nb.get<int>());
      if (!t.has_edge(a, b)) t.add_edge(a, b);
    }
  }
  return t;
}

EstimatorSettings parse_estimators(const json& obj, const std::string& where) {
  check_keys(obj, {"centralized", "distributed"}, where);
  EstimatorSettings s;
  if (obj.contains("centralized")) {
    const json& c = obj.at("centralized");
    const std::string w = where + ".centralized";
    check_keys(c, {"starts", "assignment_starts", "max_iter", "max_cycles", "grid", "warmup_start"}, w);
    s.centralized_starts = integer_or(c, "starts", s.centralized_starts, w);
    s.em.assignment_starts = integer_or(c, "assignment_starts", s.em.assignment_starts, w);
    s.em.max_iter = integer_or(c, "max_iter", s.em.max_iter, w);
    s.em.max_cycles = integer_or(c, "max_cycles", s.em.max_cycles, w);
    s.em.grid = integer_or(c, "grid", s.em.grid, w);
    s.em.warmup_start = number_or(c, "warmup_start", s.em.warmup_start, w);
    if (s.centralized_starts < 1 || s.em.assignment_starts < 0 || s.em.max_iter < 1 || s.em.max_cycles < 1 ||
        s.em.grid < 2 || s.em.warmup_start < 0.0)
      throw ConfigError(w + ": out-of-range value");
  }
  if (obj.contains("distributed")) {
    const json& d = obj.at("distributed");
    const std::string w = where + ".distributed";
    check_keys(d, {"restarts", "max_iter", "consensus_tol", "move_tol", "meters_per_radian", "warmup_start",
                   "warmup_factor", "warmup_iter"},
               w);
    s.dist.restarts = integer_or(d, "restarts", s.dist.restarts, w);
    s.dist.em.max_iter = integer_or(d, "max_iter", s.dist.em.max_iter, w);
    s.dist.em.consensus_tol = number_or(d, "consensus_tol", s.dist.em.consensus_tol, w);
    s.dist.em.move_tol = number_or(d, "move_tol", s.dist.em.move_tol, w);
    s.dist.em.meters_per_radian = number_or(d, "meters_per_radian", s.dist.em.meters_per_radian, w);
    s.dist.warmup_start = number_or(d, "warmup_start", s.dist.warmup_start, w);
    s.dist.warmup_factor = number_or(d, "warmup_factor", s.dist.warmup_factor, w);
    s.dist.warmup_iter = integer_or(d, "warmup_iter", s.dist.warmup_iter, w);
    if (s.dist.restarts < 1 || s.dist.em.max_iter < 1 || !(s.dist.em.consensus_tol > 0.0) ||
        !(s.dist.em.move_tol > 0.0) || s.dist.em.meters_per_radian < 0.0 || s.dist.warmup_start < 0.0 ||
        !(s.dist.warmup_factor > 1.0) || s.dist.warmup_iter < 1)
      throw ConfigError(w + ": out-of-range value");
  }
  return s;
}

ScenarioConfig parse_scenario_json(const json& doc, const std::filesystem::path& base_dir) {
  const std::string where = "scenario";
  check_keys(doc,
             {"nodes", "target", "scatterers", "gamma1_deg", "eta0_deg", "support", "noise", "topology", "gossip",
              "schedule", "estimators", "seed"},
             where);
  ScenarioConfig cfg;
  Scenario& s = cfg.scenario;

  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) throw ConfigError("scenario: 'nodes' array required");
  std::vector<Node> nodes;
  std::set<int> seen;
  for (const json& jn : doc.at("nodes")) {
    check_keys(jn, {"id", "x_m", "y_m", "sigma_m", "is_reference"}, "node");
    Node n;
    n.id = integer_or(jn, "id", -1, "node");
    if (!jn.contains("id")) throw ConfigError("node: missing 'id'");
    if (!seen.insert(n.id).second) throw ConfigError("duplicate node id " + std::to_string(n.id));
    const std::string w = "node " + std::to_string(n.id);
    n.position = Vec2(number(jn, "x_m", w), number(jn, "y_m", w));
    n.sigma = number_or(jn, "sigma_m", 1.0, w);
    n.is_reference = jn.value("is_reference", false);
    nodes.push_back(n);
  }
  const auto ref = std::find_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_reference; });
  if (ref == nodes.end()) throw ConfigError("scenario: no reference node");
  std::rotate(nodes.begin(), ref, ref + 1);
  s.nodes = nodes;

  if (!doc.contains("target")) throw ConfigError("scenario: 'target' required");
  check_keys(doc.at("target"), {"x_m", "y_m"}, "target");
  s.target = Vec2(number(doc.at("target"), "x_m", "target"), number(doc.at("target"), "y_m", "target"));
  s.eta0 = deg_to_rad(number_or(doc, "eta0_deg", 0.0, where));

  SupportRule default_rule;
  if (doc.contains("support")) default_rule = parse_support(doc.at("support"), default_rule, "support");

  std::map<int, const json*> scatterers;
  if (doc.contains("scatterers")) {
    if (!doc.at("scatterers").is_array()) throw ConfigError("scenario: 'scatterers' must be an array");
    for (const json& js : doc.at("scatterers")) {
      if (!js.is_object() || !js.contains("node_id") || !js.at("node_id").is_number_integer())
        throw ConfigError("scatterer: integer 'node_id' required");
      const int id = js.at("node_id").get<int>();
      if (!seen.count(id)) throw ConfigError("scatterer for unknown node " + std::to_string(id));
      if (!scatterers.emplace(id, &js).second) throw ConfigError("two scatterers for node " + std::to_string(id));
    }
  }
  for (const Node& n : s.nodes) {
    const std::string w = "scatterer " + std::to_string(n.id);
    const auto it = scatterers.find(n.id);
    const json empty = json::object();
    const json& js = it == scatterers.end() ? empty : *it->second;
    s.paths.push_back(parse_path(js, s.target, n.position, w));
    SupportRule rule = default_rule;
    if (js.contains("support")) rule = parse_support(js.at("support"), default_rule, w + ".support");
    s.supports.push_back(build_support(rule, s.paths.back().gamma));
  }
  s.gamma1 = doc.contains("gamma1_deg") ? wrap_2pi(deg_to_rad(number(doc, "gamma1_deg", where))) : s.paths[0].gamma;
  s.supports[0] = ScattererSupport::uniform({s.gamma1});

  try {
    s.validate();
    true_path_lengths(s);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }

  cfg.noise = NoiseModel::from(s);
  if (doc.contains("noise")) {
    const json& jn = doc.at("noise");
    check_keys(jn, {"tdoa_scale", "tdoa_bias_m", "aoa", "aoa_width_deg"}, "noise");
    cfg.noise.tdoa_scale = number_or(jn, "tdoa_scale", cfg.noise.tdoa_scale, "noise");
    cfg.noise.tdoa_bias = number_or(jn, "tdoa_bias_m", cfg.noise.tdoa_bias, "noise");
    if (jn.contains("aoa")) {
      const std::string kind = text(jn, "aoa", "noise");
      if (kind == "uniform") cfg.noise.aoa_kind = AoaNoise::Uniform;
      else if (kind == "gaussian") cfg.noise.aoa_kind = AoaNoise::Gaussian;
      else throw ConfigError("noise: aoa must be 'uniform' or 'gaussian'");
    }
    cfg.noise.aoa_width = deg_to_rad(number_or(jn, "aoa_width_deg", rad_to_deg(cfg.noise.aoa_width), "noise"));
    if (cfg.noise.tdoa_scale < 0.0 || cfg.noise.aoa_width < 0.0) throw ConfigError("noise: negative scale");
  }

  std::vector<int> ids;
  for (std::size_t i = 1; i < s.nodes.size(); ++i) ids.push_back(s.nodes[i].id);
  cfg.topology = doc.contains("topology") ? parse_topology(doc.at("topology"), ids, "topology")
                                          : Topology::complete(ids.size());
  if (!cfg.topology.connected()) throw ConfigError("topology: graph is not connected");

  cfg.gossip = GossipScheme::pairwise(cfg.topology);
  if (doc.contains("gossip")) {
    const json& jg = doc.at("gossip");
    check_keys(jg, {"scheme", "path"}, "gossip");
    const std::string scheme = jg.contains("scheme") ? text(jg, "scheme", "gossip") : "pairwise";
    if (scheme == "matrix-file") {
      cfg.gossip = load_matrix_set(base_dir / text(jg, "path", "gossip"), cfg.topology);
    } else if (scheme != "pairwise") {
      throw ConfigError("gossip: scheme must be 'pairwise' or 'matrix-file'");
    }
  }

  if (doc.contains("schedule")) {
    const json& js = doc.at("schedule");
    check_keys(js, {"scale", "exponent"}, "schedule");
    cfg.estimators.schedule = StepSchedule(number_or(js, "scale", 1.0, "schedule"),
                                           number_or(js, "exponent", 0.7, "schedule"));
  }
  if (doc.contains("estimators")) {
    const StepSchedule keep = cfg.estimators.schedule;
    cfg.estimators = parse_estimators(doc.at("estimators"), "estimators");
    cfg.estimators.schedule = keep;
  }
  cfg.seed = seed_or(doc, 1, where);
  return cfg;
}

json support_json(const ScattererSupport& s) {
  json angles = json::array();
  for (double a : s.angles) angles.push_back(rad_to_deg(a));
  json out = {{"mode", "list"}, {"angles_deg", angles}};
  const bool uniform =
      std::all_of(s.prior.begin(), s.prior.end(), [&](double p) { return std::abs(p - s.prior.front()) < 1e-15; });
  if (!uniform) out["prior"] = s.prior;
  return out;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir) {
  try {
    return parse_scenario_json(parse_json(json_text), base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text_file(path), path.parent_path());
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["nodes"] = json::array();
  doc["scatterers"] = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Node& n = s.nodes[i];
    doc["nodes"].push_back(
        {{"id", n.id}, {"x_m", n.position.x()}, {"y_m", n.position.y()}, {"sigma_m", n.sigma}, {"is_reference", n.is_reference}});
    json sc = {{"node_id", n.id},
               {"gamma_deg", rad_to_deg(s.paths[i].gamma)},
               {"aoa_deg", rad_to_deg(s.paths[i].theta)}};
    if (i > 0) sc["support"] = support_json(s.supports[i]);
    doc["scatterers"].push_back(sc);
  }
  doc["target"] = {{"x_m", s.target.x()}, {"y_m", s.target.y()}};
  doc["gamma1_deg"] = rad_to_deg(s.gamma1);
  doc["eta0_deg"] = rad_to_deg(s.eta0);
  return doc.dump(2);
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::Centralized: return "centralized";
    case Estimator::Distributed: return "distributed";
    case Estimator::TdoaOnly: return "tdoa_only";
  }
  return "?";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "centralized") return Estimator::Centralized;
  if (name == "distributed") return Estimator::Distributed;
  if (name == "tdoa_only") return Estimator::TdoaOnly;
  throw ConfigError("unknown estimator '" + name + "'");
}

void SweepSpec::validate() const {
  if (trials < 1) throw ConfigError("sweep: trials must be >= 1");
  if (estimators.empty()) throw ConfigError("sweep: no estimators selected");
  if (parameter == SweepParameter::None && values.size() > 1)
    throw ConfigError("sweep: values given but nothing is varied");
  if (parameter != SweepParameter::None && values.empty()) throw ConfigError("sweep: empty value list");
  for (double v : values) {
    if (parameter == SweepParameter::Eta0 && !(v >= 0.0 && v < kPi)) throw ConfigError("sweep: eta0 outside [0, 180) deg");
    if (parameter == SweepParameter::Sigma && !(v > 0.0)) throw ConfigError("sweep: sigma must be > 0");
  }
}

SweepConfig parse_sweep(const std::string& json_text, const std::filesystem::path& base_dir) {
  try {
    const json doc = parse_json(json_text);
    check_keys(doc, {"scenario", "scenario_file", "vary", "values", "trials", "estimators", "out"}, "sweep");
    SweepConfig cfg;
    if (doc.contains("scenario") == doc.contains("scenario_file"))
      throw ConfigError("sweep: give exactly one of 'scenario' and 'scenario_file'");
    cfg.scenario = doc.contains("scenario") ? parse_scenario_json(doc.at("scenario"), base_dir)
                                            : load_scenario(base_dir / text(doc, "scenario_file", "sweep"));
    SweepSpec& spec = cfg.spec;
    const std::string vary = doc.contains("vary") ? text(doc, "vary", "sweep") : "none";
    if (vary == "eta0") spec.parameter = SweepParameter::Eta0;
    else if (vary == "sigma") spec.parameter = SweepParameter::Sigma;
    else if (vary != "none") throw ConfigError("sweep: vary must be eta0, sigma or none");
    if (doc.contains("values")) {
      for (double v : numbers(doc, "values", "sweep"))
        spec.values.push_back(spec.parameter == SweepParameter::Eta0 ? deg_to_rad(v) : v);
    }
    spec.trials = integer_or(doc, "trials", 1, "sweep");
    if (doc.contains("estimators")) {
      if (!doc.at("estimators").is_array()) throw ConfigError("sweep: estimators must be an array");
      spec.estimators.clear();
      for (const json& e : doc.at("estimators")) {
        if (!e.is_string()) throw ConfigError("sweep: estimator names must be strings");
        spec.estimators.push_back(parse_estimator(e.get<std::string>()));
      }
    }
    if (doc.contains("out")) spec.out = text(doc, "out", "sweep");
    spec.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  }
}

SweepConfig load_sweep(const std::filesystem::path& path) {
  return parse_sweep(read_text_file(path), path.parent_path());
}

RelaySpec parse_relay(const std::string& json_text) {
  try {
    const json doc = parse_json(json_text);
    const std::string w = "relay";
    check_keys(doc,
               {"sample_period_ns", "oversample", "packet_length_ms", "chip_rate_hz", "relay_delays_ms",
                "tau_target_ns", "tau_receiver_ns", "receiver_start_ns", "start_offset_range_ns", "snr_db", "trials",
                "seed", "out"},
               w);
    RelaySpec spec;
    RelayConfig& c = spec.base;
    c.sample_period = number_or(doc, "sample_period_ns", 100.0, w) * 1e-9;
    c.oversample = integer_or(doc, "oversample", 10, w);
    c.packet_length = number_or(doc, "packet_length_ms", 10.0, w) * 1e-3;
    c.chip_rate = number_or(doc, "chip_rate_hz", 1e6, w);
    for (double d : numbers(doc, "relay_delays_ms", w)) c.relay_delays.push_back(d * 1e-3);
    for (double t : numbers(doc, "tau_target_ns", w)) c.tau_target.push_back(t * 1e-9);
    for (double t : numbers(doc, "tau_receiver_ns", w)) c.tau_receiver.push_back(t * 1e-9);
    c.receiver_start = number_or(doc, "receiver_start_ns", 0.0, w) * 1e-9;
    if (doc.contains("snr_db") && !doc.at("snr_db").is_null()) c.snr_db = number(doc, "snr_db", w);
    if (doc.contains("start_offset_range_ns")) {
      const auto r = numbers(doc, "start_offset_range_ns", w);
      if (r.size() != 2 || !(r[0] <= r[1])) throw ConfigError("relay: start_offset_range_ns must be [lo, hi]");
      spec.offset_lo = r[0] * 1e-9;
      spec.offset_hi = r[1] * 1e-9;
    }
    c.start_offsets.assign(c.relay_delays.size(), spec.offset_lo);
    spec.trials = integer_or(doc, "trials", 100, w);
    spec.seed = seed_or(doc, 1, w);
    if (doc.contains("out")) spec.out = text(doc, "out", w);
    if (spec.trials < 1) throw ConfigError("relay: trials must be >= 1");
    try {
      c.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("relay: ") + e.what());
    }
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("relay: ") + e.what());
  }
}

RelaySpec load_relay(const std::filesystem::path& path) { return parse_relay(read_text_file(path)); }

GossipScheme load_matrix_set(const std::filesystem::path& path, const Topology& topology) {
  try {
    const json doc = parse_json(read_text_file(path));
    check_keys(doc, {"matrices", "probabilities"}, "matrix file");
    if (!doc.contains("matrices") || !doc.at("matrices").is_array())
      throw ConfigError("matrix file: 'matrices' array required");
    std::vector<Eigen::MatrixXd> mats;
    for (const json& jm : doc.at("matrices")) {
      const auto rows = jm.get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd W(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw ConfigError("matrix file: ragged matrix");
        for (std::size_t k = 0; k < rows[r].size(); ++k)
          W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
      }
      mats.push_back(std::move(W));
    }
    std::vector<double> probs;
    if (doc.contains("probabilities")) probs = numbers(doc, "probabilities", "matrix file");
    return GossipScheme::matrix_set(topology, std::move(mats), std::move(probs));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("matrix file: ") + e.what());
  }
}

}  // namespace nlos
