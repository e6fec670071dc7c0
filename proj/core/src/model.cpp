#include "nlosloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "nlosloc/angles.hpp"
#include "nlosloc/errors.hpp"
#include "nlosloc/rng.hpp"

namespace nlos {

namespace {

constexpr double kEdgeTolerance = 1e-10;

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

Vec2 project_on_ray(const Vec2& x, const Vec2& apex, double angle) {
  const Vec2 e = unit(angle);
  const double t = std::max(0.0, (x - apex).dot(e));
  return apex + t * e;
}

}  // namespace

ScattererSupport ScattererSupport::uniform(std::vector<double> angles) {
  ScattererSupport s;
  const double w = angles.empty() ? 0.0 : 1.0 / static_cast<double>(angles.size());
  s.prior.assign(angles.size(), w);
  s.angles = std::move(angles);
  for (double& a : s.angles) a = wrap_2pi(a);
  return s;
}

ScattererSupport ScattererSupport::band(double center, double halfwidth, double step) {
  if (!(step > 0.0) || halfwidth < 0.0) throw ConfigError("band support needs step > 0 and halfwidth >= 0");
  const int half = static_cast<int>(std::floor(halfwidth / step + 1e-9));
  std::vector<double> angles;
  for (int k = -half; k <= half; ++k) angles.push_back(center + k * step);
  return uniform(std::move(angles));
}

void ScattererSupport::validate() const {
  if (angles.empty()) throw ConfigError("scatterer support is empty");
  if (prior.size() != angles.size()) throw ConfigError("support prior size mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < angles.size(); ++j) {
    if (!(angles[j] >= 0.0 && angles[j] < kTwoPi)) throw ConfigError("support angle outside [0, 2pi)");
    if (!(prior[j] >= 0.0)) throw ConfigError("negative support prior");
    total += prior[j];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("support prior does not sum to 1");
}

void Scenario::validate() const {
  const std::size_t n = nodes.size();
  if (n < 2) throw ConfigError("scenario needs at least two nodes");
  if (paths.size() != n || supports.size() != n)
    throw ConfigError("scenario paths/supports must have one entry per node");
  if (!nodes[0].is_reference) throw ConfigError("node at index 0 must be the reference");
  int references = 0;
  for (const Node& node : nodes) {
    if (node.is_reference) ++references;
    if (!(node.sigma > 0.0)) throw ConfigError("node " + std::to_string(node.id) + ": sigma must be > 0");
  }
  if (references != 1) throw ConfigError("exactly one reference node required");
  if (!(eta0 >= 0.0 && eta0 < kPi)) throw ConfigError("eta0 must lie in [0, pi)");
  if (std::abs(std::cos(gamma1 - paths[0].gamma)) < 1.0 - 1e-9)
    throw ConfigError("gamma1 disagrees with the reference node's scatterer");
  for (std::size_t i = 0; i < n; ++i) {
    supports[i].validate();
    if (!try_steering_vector(paths[i].theta, paths[i].gamma))
      throw InconsistentScenario("node " + std::to_string(nodes[i].id) + ": singular true path");
  }
}

NoiseModel NoiseModel::from(const Scenario& scenario) {
  NoiseModel m;
  m.aoa_width = scenario.eta0;
  return m;
}

NoiseModel NoiseModel::noiseless() {
  NoiseModel m;
  m.tdoa_scale = 0.0;
  return m;
}

std::optional<Vec2> try_steering_vector(double theta, double gamma) {
  const double c = std::cos(theta - gamma);
  if (std::abs(c) <= kSingularCos) return std::nullopt;
  return Vec2(std::cos(gamma) / c, std::sin(gamma) / c);
}

Vec2 steering_vector(double theta, double gamma) {
  auto g = try_steering_vector(theta, gamma);
  if (!g) throw SingularGeometry("scatterer plane parallel to the arrival ray");
  return *g;
}

double path_length(const Vec2& q, const Vec2& p, double theta, double gamma) {
  const double d = steering_vector(theta, gamma).dot(q - p);
  if (!(d > 0.0)) throw NonPhysicalPath("non-positive single-bounce path length");
  return d;
}

double bearing(const Vec2& v) { return wrap_2pi(std::atan2(v.y(), v.x())); }

Wedge Wedge::from_path(const Vec2& p, double theta, double gamma) {
  return Wedge{p, wrap_2pi(theta), wrap_pi(2.0 * (gamma - theta))};
}

bool Wedge::is_ray() const { return std::abs(width) < 1e-12; }

bool Wedge::contains(const Vec2& q) const {
  const Vec2 d = q - apex;
  if (d.norm() < 1e-12) return true;
  const double delta = wrap_pi(bearing(d) - start);
  if (is_ray()) return std::abs(delta) <= kRayTolerance;
  if (width > 0.0) return delta >= -kEdgeTolerance && delta <= width + kEdgeTolerance;
  return delta <= kEdgeTolerance && delta >= width - kEdgeTolerance;
}

Vec2 Wedge::project(const Vec2& x) const {
  if (contains(x)) return x;
  const Vec2 a = project_on_ray(x, apex, start);
  if (is_ray()) return a;
  const Vec2 b = project_on_ray(x, apex, start + width);
  return (x - a).squaredNorm() <= (x - b).squaredNorm() ? a : b;
}

Wedge Wedge::intersect_common_start(const Vec2& apex, double start, const std::vector<double>& widths) {
  Wedge w{apex, start, 0.0};
  if (widths.empty()) return w;
  const bool all_pos = std::all_of(widths.begin(), widths.end(), [](double x) { return x > 1e-12; });
  const bool all_neg = std::all_of(widths.begin(), widths.end(), [](double x) { return x < -1e-12; });
  if (all_pos) w.width = *std::min_element(widths.begin(), widths.end());
  if (all_neg) w.width = *std::max_element(widths.begin(), widths.end());
  return w;
}

bool wedge_contains(const Vec2& q, const Vec2& p, double theta, double gamma) {
  return Wedge::from_path(p, theta, gamma).contains(q);
}

PropagationPath path_from_offsets(const Vec2& q, const Vec2& p, double arrival_offset,
                                  double departure_offset) {
  const double psi = bearing(q - p);
  const double theta = psi + arrival_offset;
  const double phi = psi - departure_offset;
  return PropagationPath{wrap_2pi(0.5 * (theta + phi)), wrap_2pi(theta)};
}

std::optional<Reflection> reflect_off_wall(const Vec2& q, const Vec2& p, const Vec2& wall_point,
                                           double gamma) {
  const Vec2 n(-std::sin(gamma), std::cos(gamma));
  const double sp = n.dot(p - wall_point);
  const double sq = n.dot(q - wall_point);
  if (!(sp * sq > 0.0)) return std::nullopt;
  const Vec2 mirror = p - 2.0 * sp * n;
  const double t = sq / (sq + sp);
  const Vec2 c = q + t * (mirror - q);
  if ((c - p).norm() < 1e-12) return std::nullopt;
  Reflection r;
  r.bounce_point = c;
  r.length = (q - mirror).norm();
  r.path = PropagationPath{wrap_2pi(gamma), bearing(c - p)};
  return r;
}

std::vector<double> true_path_lengths(const Scenario& scenario) {
  std::vector<double> d(scenario.size());
  for (std::size_t i = 0; i < scenario.size(); ++i) {
    const auto& path = scenario.paths[i];
    const Vec2& p = scenario.nodes[i].position;
    auto g = try_steering_vector(path.theta, path.gamma);
    if (!g) throw InconsistentScenario("singular true path at node " + std::to_string(scenario.nodes[i].id));
    d[i] = g->dot(scenario.target - p);
    if (!(d[i] > 0.0))
      throw InconsistentScenario("non-physical true path at node " + std::to_string(scenario.nodes[i].id));
    if (!wedge_contains(scenario.target, p, path.theta, path.gamma))
      throw InconsistentScenario("target violates the true wedge of node " +
                                 std::to_string(scenario.nodes[i].id));
  }
  return d;
}

MeasurementSet synthesize_measurements(const Scenario& scenario, std::uint64_t seed) {
  return synthesize_measurements(scenario, seed, NoiseModel::from(scenario));
}

MeasurementSet synthesize_measurements(const Scenario& scenario, std::uint64_t seed,
                                       const NoiseModel& noise) {
  scenario.validate();
  const std::vector<double> d = true_path_lengths(scenario);
  const std::size_t n = scenario.size();

  MeasurementSet z;
  z.tdoa.assign(n, 0.0);
  z.aoa.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = scenario.nodes[i];
    CounterRng rng(seed, static_cast<std::uint64_t>(node.id));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double tdoa_draw = gauss(rng);
    const double aoa_draw =
        noise.aoa_kind == AoaNoise::Uniform ? rng.uniform(-1.0, 1.0) : gauss(rng);
    if (i > 0) {
      z.tdoa[i] = d[i] - d[0] + noise.tdoa_bias + noise.tdoa_scale * node.sigma * tdoa_draw;
    }
    z.aoa[i] = wrap_2pi(scenario.paths[i].theta + noise.aoa_width * aoa_draw);
  }
  z.reference = ReferenceBroadcast{scenario.nodes[0].position, scenario.gamma1, z.aoa[0]};
  return z;
}

double network_diameter(const std::vector<Node>& nodes) {
  double best = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      best = std::max(best, (nodes[i].position - nodes[j].position).norm());
  return best;
}

Vec2 node_centroid(const std::vector<Node>& nodes) {
  Vec2 c = Vec2::Zero();
  for (const Node& node : nodes) c += node.position;
  return nodes.empty() ? c : Vec2(c / static_cast<double>(nodes.size()));
}

}  // namespace nlos
