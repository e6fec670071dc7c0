#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nlosloc/model.hpp"

namespace nlos {

using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Sentinel returned by the log-likelihoods when an indicator is violated.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// Everything a single non-reference node knows: its own data plus the
/// reference broadcast (p1, gamma1, theta~1).
struct NodeObservation {
  Vec2 position = Vec2::Zero();
  double sigma = 1.0;
  double tdoa = 0.0;
  double aoa = 0.0;
  ReferenceBroadcast reference;
};

/// Estimation input: node geometry, measurements, supports and AOA box width.
struct Problem {
  std::vector<Node> nodes;
  MeasurementSet measurements;
  std::vector<ScattererSupport> supports;
  double eta0 = 0.0;

  std::size_t size() const { return nodes.size(); }
  NodeObservation observation(std::size_t i) const;
  /// Theta_i = [theta~_i - eta0, theta~_i + eta0] (unwrapped around theta~_i).
  double box_lo(std::size_t i) const { return measurements.aoa[i] - eta0; }
  double box_hi(std::size_t i) const { return measurements.aoa[i] + eta0; }
  bool in_box(std::size_t i, double theta) const;
};

Problem make_problem(const Scenario& scenario, const MeasurementSet& measurements);

/// x = [q; theta_1 ... theta_N]. theta[0] is the reference node's AOA.
struct ParamEstimate {
  Vec2 q = Vec2::Zero();
  std::vector<double> theta;
};

/// d~_i1 - g_i^T (q - p_i) + g_1^T (q - p_1). Throws SingularGeometry.
double residual(const NodeObservation& z, const Vec2& q, double theta1, double theta_i,
                double gamma_i);

/// -(residual)^2 / (2 sigma_i^2). The -log(2 pi sigma^2)/2 constant is omitted
/// everywhere in the library.
double local_loglik(const NodeObservation& z, const Vec2& q, double theta1, double theta_i,
                    double gamma_i);

/// [Vec(q q^T); q], Vec column-major.
Vec6 basis_phi1(const Vec2& q);
/// [1/cos^2(theta1 - gamma1), 1/cos(theta1 - gamma1)]. Throws SingularGeometry.
Vec2 basis_phi2(double theta1, double gamma1);

/// [Vec(U_i); -2 V_i] such that local_loglik = c1 + S^T phi1(q).
Vec6 statistic_S(const NodeObservation& z, double theta1, double theta_i, double gamma_i);
/// T_i such that local_loglik = c2 + T^T phi2(theta1).
Vec2 statistic_T(const NodeObservation& z, const Vec2& q, double theta_i, double gamma_i);

/// Quadratic form q^T U q - 2 V^T q packed in a statistic (or sum of them).
struct QuadraticForm {
  Eigen::Matrix2d U;
  Vec2 V;
};
QuadraticForm unpack_quadratic(const Vec6& s);
Vec6 pack_quadratic(const Eigen::Matrix2d& U, const Vec2& V);

enum class PosteriorFallback {
  None,         ///< indicator-weighted Gaussian posterior
  NoIndicator,  ///< every wedge excluded q; Gaussian weights alone
  Prior,        ///< Gaussian weights degenerate too; prior returned
};

struct Posterior {
  std::vector<double> weights;
  PosteriorFallback fallback = PosteriorFallback::None;
};

/// rho_i(gamma) proportional to exp(local_loglik) * 1{q in wedge(theta_i, gamma)} * prior,
/// evaluated at the previous estimate (q, theta1, theta_i). Support angles
/// with a singular steering vector receive zero weight.
Posterior scatterer_posterior(const NodeObservation& z, const ScattererSupport& support,
                              const Vec2& q, double theta1, double theta_i);

/// sum_gamma rho(gamma) S_i(gamma), skipping zero-weight or singular angles.
Vec6 expected_S(const NodeObservation& z, const ScattererSupport& support,
                std::span<const double> weights, double theta1, double theta_i);
Vec2 expected_T(const NodeObservation& z, const ScattererSupport& support,
                std::span<const double> weights, const Vec2& q, double theta_i);
/// psi-bar: sum_gamma rho(gamma) local_loglik(q, theta1, theta_i, gamma); kLogZero
/// if a weighted angle is singular at theta_i.
double expected_local_loglik(const NodeObservation& z, const ScattererSupport& support,
                             std::span<const double> weights, const Vec2& q, double theta1,
                             double theta_i);

/// Node i's term of K: log sum_gamma prior * 1{wedge} * exp(local_loglik).
double local_observed_loglik(const NodeObservation& z, const ScattererSupport& support, const Vec2& q,
                             double theta1, double theta_i);

/// K(x) = sum_{i>=2} log sum_gamma prior * 1{wedge} * exp(local_loglik), exact
/// over the finite supports. kLogZero if some node has no feasible angle or
/// any theta lies outside its box.
double observed_loglik_K(const Problem& problem, const ParamEstimate& x);

/// Complete-data log-likelihood for one scatterer assignment (support index
/// per node; entry 0 ignored): Gaussian terms + log prior + log indicators.
double complete_loglik(const Problem& problem, const ParamEstimate& x,
                       std::span<const std::size_t> assignment);

}  // namespace nlos
