#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace nlos {

using Vec2 = Eigen::Vector2d;

/// Threshold on |cos(theta - gamma)| below which the steering vector is undefined.
inline constexpr double kSingularCos = 1e-9;

/// Angular tolerance used when the wedge collapses to a ray (line of sight).
inline constexpr double kRayTolerance = 1e-6;

struct Node {
  int id = 0;
  Vec2 position = Vec2::Zero();
  /// TDOA noise standard deviation in meters, as assumed by the estimators.
  double sigma = 1.0;
  bool is_reference = false;
};

/// Finite support of a latent scatterer orientation, with prior weights.
struct ScattererSupport {
  std::vector<double> angles;
  std::vector<double> prior;

  static ScattererSupport uniform(std::vector<double> angles);
  /// center +/- halfwidth sampled every `step` radians (both ends included).
  static ScattererSupport band(double center, double halfwidth, double step);

  std::size_t size() const { return angles.size(); }
  /// Throws ConfigError when empty, mis-sized, or not a probability vector.
  void validate() const;
};

/// True propagation geometry at one node.
struct PropagationPath {
  double gamma = 0.0;  ///< scatterer orientation
  double theta = 0.0;  ///< angle of arrival
};

/// Complete synthetic world. Index 0 is the reference node.
struct Scenario {
  std::vector<Node> nodes;
  Vec2 target = Vec2::Zero();
  std::vector<PropagationPath> paths;
  /// Known scatterer orientation at the reference node.
  double gamma1 = 0.0;
  /// Half-width of the AOA error box assumed by the estimators.
  double eta0 = 0.0;
  /// One support per node; entry 0 is the singleton {gamma1}.
  std::vector<ScattererSupport> supports;

  std::size_t size() const { return nodes.size(); }
  /// Structural checks: exactly one reference at index 0, sigma > 0, sizes,
  /// non-singular true paths with wedge width strictly below pi.
  void validate() const;
};

struct ReferenceBroadcast {
  Vec2 position = Vec2::Zero();
  double gamma = 0.0;
  double aoa = 0.0;
};

struct MeasurementSet {
  /// d_i1 per node in meters; entry 0 (the reference) is always 0.
  std::vector<double> tdoa;
  /// Measured AOA per node, wrapped to [0, 2*pi).
  std::vector<double> aoa;
  ReferenceBroadcast reference;
};

enum class AoaNoise { Uniform, Gaussian };

/// Noise actually injected by synthesize_measurements. Kept apart from the
/// scenario so that data can be noiseless while the estimators still assume
/// sigma_i > 0.
struct NoiseModel {
  double tdoa_scale = 1.0;  ///< multiplies each node's sigma
  double tdoa_bias = 0.0;   ///< meters, added to every TDOA
  AoaNoise aoa_kind = AoaNoise::Uniform;
  double aoa_width = 0.0;  ///< half-width (uniform) or std deviation (gaussian)

  static NoiseModel from(const Scenario& scenario);
  static NoiseModel noiseless();
};

/// g(theta, gamma) = [cos gamma; sin gamma] / cos(theta - gamma).
/// Throws SingularGeometry when |cos(theta - gamma)| <= kSingularCos.
Vec2 steering_vector(double theta, double gamma);

/// Same as steering_vector but returns nullopt instead of throwing.
std::optional<Vec2> try_steering_vector(double theta, double gamma);

/// Single-bounce path length g(theta, gamma)^T (q - p).
/// Throws SingularGeometry, or NonPhysicalPath when the result is <= 0.
double path_length(const Vec2& q, const Vec2& p, double theta, double gamma);

/// Angular sector of possible target positions seen from one node: bearings
/// swept from `start` by the signed `width` (|width| < pi).
struct Wedge {
  Vec2 apex = Vec2::Zero();
  double start = 0.0;
  double width = 0.0;

  static Wedge from_path(const Vec2& p, double theta, double gamma);

  bool is_ray() const;
  bool contains(const Vec2& q) const;
  /// Euclidean projection onto the (closed, convex) sector.
  Vec2 project(const Vec2& x) const;
  /// Intersection of sectors sharing apex and start ray. Widths of mixed
  /// sign leave only the start ray.
  static Wedge intersect_common_start(const Vec2& apex, double start,
                                      const std::vector<double>& widths);
};

/// True iff the bearing of q - p lies between theta and 2*gamma - theta.
bool wedge_contains(const Vec2& q, const Vec2& p, double theta, double gamma);

/// Bearing of v in [0, 2*pi).
double bearing(const Vec2& v);

/// Builds a path that reaches q from p, arriving at bearing psi + arrival_offset
/// with the AOD-opposite ray at psi - departure_offset (both offsets signed
/// consistently, |arrival_offset| + |departure_offset| < pi).
PropagationPath path_from_offsets(const Vec2& q, const Vec2& p, double arrival_offset,
                                  double departure_offset);

/// Mirror-image construction: wall through `wall_point` with orientation
/// gamma. Returns nullopt if no valid single bounce exists (p and q on
/// opposite sides of the wall, or parallel geometry).
struct Reflection {
  PropagationPath path;
  Vec2 bounce_point;
  double length;
};
std::optional<Reflection> reflect_off_wall(const Vec2& q, const Vec2& p, const Vec2& wall_point,
                                           double gamma);

/// d~_i1 = d_i - d_1 + n_i and theta~_i = theta_i + eta_i, deterministic in
/// `seed` with one substream per node id. Throws InconsistentScenario when
/// the target violates a true wedge or a true path is non-physical.
MeasurementSet synthesize_measurements(const Scenario& scenario, std::uint64_t seed);
MeasurementSet synthesize_measurements(const Scenario& scenario, std::uint64_t seed,
                                       const NoiseModel& noise);

/// Noise-free path lengths d_i for the scenario's true geometry.
std::vector<double> true_path_lengths(const Scenario& scenario);

/// Largest pairwise node distance.
double network_diameter(const std::vector<Node>& nodes);
Vec2 node_centroid(const std::vector<Node>& nodes);

}  // namespace nlos
