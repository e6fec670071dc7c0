#include "nlosloc/likelihood.hpp"

#include <algorithm>
#include <cmath>

#include "nlosloc/angles.hpp"
#include "nlosloc/errors.hpp"

namespace nlos {

namespace {

double log_sum_exp(std::span<const double> values) {
  double m = kLogZero;
  for (double v : values) m = std::max(m, v);
  if (m == kLogZero) return kLogZero;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double inv_two_var(const NodeObservation& z) { return 1.0 / (2.0 * z.sigma * z.sigma); }

}  // namespace

NodeObservation Problem::observation(std::size_t i) const {
  NodeObservation z;
  z.position = nodes[i].position;
  z.sigma = nodes[i].sigma;
  z.tdoa = measurements.tdoa[i];
  z.aoa = measurements.aoa[i];
  z.reference = measurements.reference;
  return z;
}

bool Problem::in_box(std::size_t i, double theta) const {
  return std::abs(wrap_pi(theta - measurements.aoa[i])) <= eta0 + 1e-12;
}

Problem make_problem(const Scenario& scenario, const MeasurementSet& measurements) {
  Problem p;
  p.nodes = scenario.nodes;
  p.measurements = measurements;
  p.supports = scenario.supports;
  p.eta0 = scenario.eta0;
  return p;
}

double residual(const NodeObservation& z, const Vec2& q, double theta1, double theta_i,
                double gamma_i) {
  const Vec2 gi = steering_vector(theta_i, gamma_i);
  const Vec2 g1 = steering_vector(theta1, z.reference.gamma);
  return z.tdoa - gi.dot(q - z.position) + g1.dot(q - z.reference.position);
}

double local_loglik(const NodeObservation& z, const Vec2& q, double theta1, double theta_i,
                    double gamma_i) {
  const double r = residual(z, q, theta1, theta_i, gamma_i);
  return -inv_two_var(z) * r * r;
}

Vec6 basis_phi1(const Vec2& q) {
  Vec6 phi;
  phi << q.x() * q.x(), q.y() * q.x(), q.x() * q.y(), q.y() * q.y(), q.x(), q.y();
  return phi;
}

Vec2 basis_phi2(double theta1, double gamma1) {
  const double c = std::cos(theta1 - gamma1);
  if (std::abs(c) <= kSingularCos) throw SingularGeometry("phi2 undefined: theta1 - gamma1 = +/-pi/2");
  return {1.0 / (c * c), 1.0 / c};
}

Vec6 pack_quadratic(const Eigen::Matrix2d& U, const Vec2& V) {
  Vec6 s;
  s << U(0, 0), U(1, 0), U(0, 1), U(1, 1), -2.0 * V.x(), -2.0 * V.y();
  return s;
}

QuadraticForm unpack_quadratic(const Vec6& s) {
  QuadraticForm f;
  f.U << s(0), s(2), s(1), s(3);
  f.V = Vec2(-0.5 * s(4), -0.5 * s(5));
  return f;
}

Vec6 statistic_S(const NodeObservation& z, double theta1, double theta_i, double gamma_i) {
  const Vec2 gi = steering_vector(theta_i, gamma_i);
  const Vec2 g1 = steering_vector(theta1, z.reference.gamma);
  const Vec2 h = gi - g1;
  const double a = z.tdoa + gi.dot(z.position) - g1.dot(z.reference.position);
  const double k = inv_two_var(z);
  const Eigen::Matrix2d U = -k * h * h.transpose();
  const Vec2 V = -k * a * h;
  return pack_quadratic(U, V);
}

Vec2 statistic_T(const NodeObservation& z, const Vec2& q, double theta_i, double gamma_i) {
  const Vec2 gi = steering_vector(theta_i, gamma_i);
  const double gamma1 = z.reference.gamma;
  const double c = Vec2(std::cos(gamma1), std::sin(gamma1)).dot(q - z.reference.position);
  const double b = z.tdoa - gi.dot(q - z.position);
  const double k = inv_two_var(z);
  return {-k * c * c, -k * 2.0 * b * c};
}

Posterior scatterer_posterior(const NodeObservation& z, const ScattererSupport& support,
                              const Vec2& q, double theta1, double theta_i) {
  const std::size_t m = support.size();
  std::vector<double> logw(m, kLogZero);
  std::vector<bool> inside(m, false);
  bool any_inside = false;
  bool any_finite = false;
  const auto g1 = try_steering_vector(theta1, z.reference.gamma);
  for (std::size_t j = 0; j < m; ++j) {
    const double gamma = support.angles[j];
    const auto gi = try_steering_vector(theta_i, gamma);
    if (!gi || !g1 || support.prior[j] <= 0.0) continue;
    const double r = z.tdoa - gi->dot(q - z.position) + g1->dot(q - z.reference.position);
    logw[j] = -inv_two_var(z) * r * r + std::log(support.prior[j]);
    any_finite = true;
    inside[j] = wedge_contains(q, z.position, theta_i, gamma);
    any_inside = any_inside || inside[j];
  }

  Posterior post;
  post.weights.assign(m, 0.0);
  if (!any_finite) {
    post.fallback = PosteriorFallback::Prior;
    post.weights = support.prior;
    return post;
  }
  if (any_inside) {
    for (std::size_t j = 0; j < m; ++j)
      if (!inside[j]) logw[j] = kLogZero;
  } else {
    post.fallback = PosteriorFallback::NoIndicator;
  }
  const double norm = log_sum_exp(logw);
  for (std::size_t j = 0; j < m; ++j)
    post.weights[j] = logw[j] == kLogZero ? 0.0 : std::exp(logw[j] - norm);
  return post;
}

Vec6 expected_S(const NodeObservation& z, const ScattererSupport& support,
                std::span<const double> weights, double theta1, double theta_i) {
  Vec6 acc = Vec6::Zero();
  for (std::size_t j = 0; j < support.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    if (!try_steering_vector(theta_i, support.angles[j])) continue;
    acc += weights[j] * statistic_S(z, theta1, theta_i, support.angles[j]);
  }
  return acc;
}

Vec2 expected_T(const NodeObservation& z, const ScattererSupport& support,
                std::span<const double> weights, const Vec2& q, double theta_i) {
  Vec2 acc = Vec2::Zero();
  for (std::size_t j = 0; j < support.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    if (!try_steering_vector(theta_i, support.angles[j])) continue;
    acc += weights[j] * statistic_T(z, q, theta_i, support.angles[j]);
  }
  return acc;
}

double expected_local_loglik(const NodeObservation& z, const ScattererSupport& support,
                             std::span<const double> weights, const Vec2& q, double theta1,
                             double theta_i) {
  const auto g1 = try_steering_vector(theta1, z.reference.gamma);
  if (!g1) return kLogZero;
  const double base = z.tdoa + g1->dot(q - z.reference.position);
  const double k = inv_two_var(z);
  double acc = 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    const auto gi = try_steering_vector(theta_i, support.angles[j]);
    if (!gi) return kLogZero;
    const double r = base - gi->dot(q - z.position);
    acc -= weights[j] * k * r * r;
  }
  return acc;
}

double local_observed_loglik(const NodeObservation& z, const ScattererSupport& support, const Vec2& q,
                             double theta1, double theta_i) {
  const auto g1 = try_steering_vector(theta1, z.reference.gamma);
  if (!g1) return kLogZero;
  std::vector<double> terms(support.size(), kLogZero);
  for (std::size_t j = 0; j < support.size(); ++j) {
    const double gamma = support.angles[j];
    const auto gi = try_steering_vector(theta_i, gamma);
    if (!gi || support.prior[j] <= 0.0) continue;
    if (!wedge_contains(q, z.position, theta_i, gamma)) continue;
    const double r = z.tdoa - gi->dot(q - z.position) + g1->dot(q - z.reference.position);
    terms[j] = -inv_two_var(z) * r * r + std::log(support.prior[j]);
  }
  return log_sum_exp(terms);
}

double observed_loglik_K(const Problem& problem, const ParamEstimate& x) {
  const std::size_t n = problem.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!problem.in_box(i, x.theta[i])) return kLogZero;
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double node_term =
        local_observed_loglik(problem.observation(i), problem.supports[i], x.q, x.theta[0], x.theta[i]);
    if (node_term == kLogZero) return kLogZero;
    total += node_term;
  }
  return total;
}

double complete_loglik(const Problem& problem, const ParamEstimate& x,
                       std::span<const std::size_t> assignment) {
  const std::size_t n = problem.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!problem.in_box(i, x.theta[i])) return kLogZero;
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const ScattererSupport& support = problem.supports[i];
    const std::size_t j = assignment[i];
    const double gamma = support.angles[j];
    const NodeObservation z = problem.observation(i);
    if (support.prior[j] <= 0.0) return kLogZero;
    if (!try_steering_vector(x.theta[i], gamma) ||
        !try_steering_vector(x.theta[0], z.reference.gamma))
      return kLogZero;
    if (!wedge_contains(x.q, z.position, x.theta[i], gamma)) return kLogZero;
    total += local_loglik(z, x.q, x.theta[0], x.theta[i], gamma) + std::log(support.prior[j]);
  }
  return total;
}

}  // namespace nlos
