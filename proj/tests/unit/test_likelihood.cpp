#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "nlosloc/errors.hpp"

using namespace nlos;

namespace {

// Direct evaluation of the local Gaussian term, written out from the model
// d~ = g_i^T (q - p_i) - g_1^T (q - p_1) without any library helper.
double direct_loglik(const NodeObservation& z, const Vec2& q, double th1, double thi, double gi) {
  const double ci = std::cos(thi - gi), c1 = std::cos(th1 - z.reference.gamma);
  const double di = (std::cos(gi) * (q.x() - z.position.x()) + std::sin(gi) * (q.y() - z.position.y())) / ci;
  const double d1 = (std::cos(z.reference.gamma) * (q.x() - z.reference.position.x()) +
                     std::sin(z.reference.gamma) * (q.y() - z.reference.position.y())) /
                    c1;
  const double r = z.tdoa - di + d1;
  return -r * r / (2 * z.sigma * z.sigma);
}

NodeObservation consistent_observation(const Scenario& s, std::size_t i) {
  const auto m = synthesize_measurements(s, 1, NoiseModel::noiseless());
  return make_problem(s, m).observation(i);
}

double lse(const std::vector<double>& v) {
  double m = -INFINITY;
  for (double x : v) m = std::max(m, x);
  if (m == -INFINITY) return m;
  double acc = 0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace

TEST(LocalLoglik, ZeroOnConsistentData) {
  const Scenario s = fixture::random_scenario(1);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const NodeObservation z = consistent_observation(s, i);
    EXPECT_NEAR(local_loglik(z, s.target, s.paths[0].theta, s.paths[i].theta, s.paths[i].gamma), 0.0, 1e-18);
  }
}

TEST(LocalLoglik, UnitStandardizedResidual) {
  const Scenario s = fixture::random_scenario(2);
  NodeObservation z = consistent_observation(s, 1);
  z.tdoa += z.sigma;
  EXPECT_NEAR(local_loglik(z, s.target, s.paths[0].theta, s.paths[1].theta, s.paths[1].gamma), -0.5, 1e-12);
  EXPECT_NEAR(residual(z, s.target, s.paths[0].theta, s.paths[1].theta, s.paths[1].gamma), z.sigma, 1e-9);
}

TEST(LocalLoglik, MatchesDirectEvaluation) {
  CounterRng r(3);
  for (int k = 0; k < 1000; ++k) {
    const NodeObservation z = fixture::random_observation(r);
    const Vec2 q(r.uniform(-300, 300), r.uniform(-300, 300));
    const double gi = r.uniform(0, kTwoPi);
    const double thi = fixture::safe_angle_near(r, gi);
    const double th1 = fixture::safe_angle_near(r, z.reference.gamma);
    EXPECT_TRUE(fixture::close_rel(local_loglik(z, q, th1, thi, gi), direct_loglik(z, q, th1, thi, gi), 1e-10));
  }
}

TEST(LocalLoglik, SingularGeometryThrows) {
  CounterRng r(4);
  const NodeObservation z = fixture::random_observation(r);
  EXPECT_THROW(local_loglik(z, {1, 1}, z.reference.gamma, 0.3, 0.3 + kPi / 2), SingularGeometry);
  EXPECT_THROW(local_loglik(z, {1, 1}, z.reference.gamma + kPi / 2, 0.3, 0.3), SingularGeometry);
}

TEST(Basis, PhiOne) {
  const Vec6 phi = basis_phi1({1, 2});
  const double expected[6] = {1, 2, 2, 4, 1, 2};
  for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(phi(k), expected[k]);
}

TEST(Basis, PhiTwo) {
  const Vec2 a = basis_phi2(0.7, 0.7);
  EXPECT_DOUBLE_EQ(a.x(), 1.0);
  EXPECT_DOUBLE_EQ(a.y(), 1.0);
  const Vec2 b = basis_phi2(0.2 + kPi / 3, 0.2);
  EXPECT_NEAR(b.x(), 4.0, 1e-12);
  EXPECT_NEAR(b.y(), 2.0, 1e-12);
  EXPECT_THROW(basis_phi2(kPi / 2, 0.0), SingularGeometry);
}

TEST(Statistics, PackUnpackRoundTrip) {
  Eigen::Matrix2d U;
  U << -3, 1, 1, -2;
  const Vec2 V(0.5, -4);
  const QuadraticForm f = unpack_quadratic(pack_quadratic(U, V));
  EXPECT_EQ(f.U, U);
  EXPECT_EQ(f.V, V);
  // s^T phi1(q) = q^T U q - 2 V^T q.
  const Vec2 q(1.5, -2.5);
  EXPECT_NEAR(pack_quadratic(U, V).dot(basis_phi1(q)), q.dot(U * q) - 2 * V.dot(q), 1e-12);
}

TEST(Statistics, SVanishesForParallelSteeringVectors) {
  CounterRng r(5);
  NodeObservation z = fixture::random_observation(r);
  const double th1 = fixture::safe_angle_near(r, z.reference.gamma);
  const Vec6 s = statistic_S(z, th1, th1, z.reference.gamma);
  EXPECT_LT(s.norm(), 1e-12);
}

TEST(Statistics, SDecompositionIdentity) {
  CounterRng r(6);
  for (int k = 0; k < 1000; ++k) {
    const NodeObservation z = fixture::random_observation(r);
    const double gi = r.uniform(0, kTwoPi);
    const double thi = fixture::safe_angle_near(r, gi);
    const double th1 = fixture::safe_angle_near(r, z.reference.gamma);
    const Vec2 qa(r.uniform(-300, 300), r.uniform(-300, 300)), qb(r.uniform(-300, 300), r.uniform(-300, 300));
    const Vec6 S = statistic_S(z, th1, thi, gi);
    const double la = local_loglik(z, qa, th1, thi, gi), lb = local_loglik(z, qb, th1, thi, gi);
    const double lhs = la - lb;
    const double rhs = S.dot(basis_phi1(qa) - basis_phi1(qb));
    EXPECT_LE(std::abs(lhs - rhs), 1e-8 * std::max({std::abs(la), std::abs(lb), 1e-12})) << k;
  }
}

TEST(Statistics, TDecompositionIdentity) {
  CounterRng r(7);
  for (int k = 0; k < 1000; ++k) {
    const NodeObservation z = fixture::random_observation(r);
    const double gi = r.uniform(0, kTwoPi);
    const double thi = fixture::safe_angle_near(r, gi);
    const double ta = fixture::safe_angle_near(r, z.reference.gamma);
    const double tb = fixture::safe_angle_near(r, z.reference.gamma);
    const Vec2 q(r.uniform(-300, 300), r.uniform(-300, 300));
    const Vec2 T = statistic_T(z, q, thi, gi);
    const double la = local_loglik(z, q, ta, thi, gi), lb = local_loglik(z, q, tb, thi, gi);
    const double rhs = T.dot(basis_phi2(ta, z.reference.gamma) - basis_phi2(tb, z.reference.gamma));
    EXPECT_LE(std::abs((la - lb) - rhs), 1e-8 * std::max({std::abs(la), std::abs(lb), 1e-12})) << k;
  }
}

TEST(Statistics, DoublingSigmaQuartersStatistics) {
  CounterRng r(8);
  for (int k = 0; k < 50; ++k) {
    NodeObservation z = fixture::random_observation(r);
    const double gi = r.uniform(0, kTwoPi);
    const double thi = fixture::safe_angle_near(r, gi);
    const double th1 = fixture::safe_angle_near(r, z.reference.gamma);
    const Vec2 q(r.uniform(-300, 300), r.uniform(-300, 300));
    const Vec6 s1 = statistic_S(z, th1, thi, gi);
    const Vec2 t1 = statistic_T(z, q, thi, gi);
    z.sigma *= 2;
    EXPECT_LT((statistic_S(z, th1, thi, gi) - s1 / 4).norm(), 1e-12 * s1.norm() + 1e-300);
    EXPECT_LT((statistic_T(z, q, thi, gi) - t1 / 4).norm(), 1e-12 * t1.norm() + 1e-300);
  }
}

TEST(Statistics, TVanishesAtReferencePosition) {
  CounterRng r(9);
  const NodeObservation z = fixture::random_observation(r);
  const Vec2 T = statistic_T(z, z.reference.position, 0.4, 0.1);
  EXPECT_EQ(T.x(), 0.0);
  EXPECT_EQ(T.y(), 0.0);
}

TEST(Statistics, UBlockNegativeSemidefiniteAndClosedUnderMixing) {
  CounterRng r(10);
  for (int k = 0; k < 1000; ++k) {
    const NodeObservation z = fixture::random_observation(r);
    Vec6 mix = Vec6::Zero();
    double wsum = 0;
    for (int j = 0; j < 3; ++j) {
      const double gi = r.uniform(0, kTwoPi);
      const Vec6 S = statistic_S(z, fixture::safe_angle_near(r, z.reference.gamma), fixture::safe_angle_near(r, gi), gi);
      const QuadraticForm f = unpack_quadratic(S);
      EXPECT_NEAR(f.U(0, 1), f.U(1, 0), 1e-10 * f.U.norm() + 1e-300);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(f.U);
      EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-8);
      const double w = r.uniform();
      mix += w * S;
      wsum += w;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(unpack_quadratic(mix / wsum).U);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-8);
  }
}

TEST(Posterior, SingleAngleIsCertain) {
  const Scenario s = fixture::random_scenario(11);
  const NodeObservation z = consistent_observation(s, 1);
  const auto p = scatterer_posterior(z, ScattererSupport::uniform({s.paths[1].gamma}), s.target, s.paths[0].theta,
                                     s.paths[1].theta);
  ASSERT_EQ(p.weights.size(), 1u);
  EXPECT_DOUBLE_EQ(p.weights[0], 1.0);
}

TEST(Posterior, WedgeIndicatorRemovesInfeasibleAngle) {
  const Scenario s = fixture::random_scenario(12);
  const NodeObservation z = consistent_observation(s, 2);
  const double th = s.paths[2].theta, g = s.paths[2].gamma;
  // Orientation mirrored about the arrival ray: the sector opens on the other
  // side and excludes the target.
  const double mirrored = 2 * th - g;
  ASSERT_FALSE(wedge_contains(s.target, s.nodes[2].position, th, mirrored));
  const auto p = scatterer_posterior(z, ScattererSupport::uniform({g, mirrored}), s.target, s.paths[0].theta, th);
  EXPECT_EQ(p.fallback, PosteriorFallback::None);
  EXPECT_DOUBLE_EQ(p.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(p.weights[1], 0.0);
}

TEST(Posterior, MatchesBruteForceNormalization) {
  CounterRng r(13);
  int tested = 0;
  for (int k = 0; k < 2000 && tested < 300; ++k) {
    NodeObservation z = fixture::random_observation(r);
    z.sigma = r.uniform(20, 80);
    const Vec2 q(r.uniform(-300, 300), r.uniform(-300, 300));
    const double theta_i = bearing(q - z.position) + r.uniform(-0.3, 0.3);
    const double th1 = fixture::safe_angle_near(r, z.reference.gamma);
    ScattererSupport sup;
    sup.angles = {theta_i + r.uniform(-1.2, 1.2), theta_i + r.uniform(-1.2, 1.2), theta_i + r.uniform(-1.2, 1.2)};
    sup.prior = {0.2, 0.5, 0.3};
    std::vector<double> raw(3);
    bool any = false;
    for (int j = 0; j < 3; ++j) {
      const bool in = wedge_contains(q, z.position, theta_i, sup.angles[j]);
      any = any || in;
      raw[j] = in ? sup.prior[j] * std::exp(direct_loglik(z, q, th1, theta_i, sup.angles[j])) : 0.0;
    }
    const double total = raw[0] + raw[1] + raw[2];
    if (!any || !(total > 1e-200)) continue;
    const auto p = scatterer_posterior(z, sup, q, th1, theta_i);
    double sum = 0;
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(p.weights[j], raw[j] / total, 1e-10);
      EXPECT_GE(p.weights[j], 0.0);
      EXPECT_LE(p.weights[j], 1.0);
      sum += p.weights[j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    ++tested;
  }
  EXPECT_EQ(tested, 300);
}

TEST(Posterior, FallsBackWhenEveryWedgeExcludesTarget) {
  const Scenario s = fixture::random_scenario(14);
  const NodeObservation z = consistent_observation(s, 1);
  const double th = s.paths[1].theta;
  // q behind the node: no sector contains it.
  const Vec2 behind = s.nodes[1].position - 50.0 * Vec2(std::cos(th), std::sin(th));
  const auto sup = ScattererSupport::uniform({th + 0.2, th - 0.3});
  const auto p = scatterer_posterior(z, sup, behind, s.paths[0].theta, th);
  EXPECT_EQ(p.fallback, PosteriorFallback::NoIndicator);
  EXPECT_NEAR(p.weights[0] + p.weights[1], 1.0, 1e-12);
}

TEST(Posterior, ExpectedStatisticsAreWeightedSums) {
  CounterRng r(15);
  const NodeObservation z = fixture::random_observation(r);
  const double th1 = fixture::safe_angle_near(r, z.reference.gamma), thi = 0.4;
  const auto sup = ScattererSupport::uniform({0.1, 0.5, 0.9});
  const std::vector<double> w{0.2, 0.3, 0.5};
  const Vec2 q(40, -30);
  Vec6 s = Vec6::Zero();
  Vec2 t = Vec2::Zero();
  double psi = 0;
  for (int j = 0; j < 3; ++j) {
    s += w[j] * statistic_S(z, th1, thi, sup.angles[j]);
    t += w[j] * statistic_T(z, q, thi, sup.angles[j]);
    psi += w[j] * local_loglik(z, q, th1, thi, sup.angles[j]);
  }
  EXPECT_LT((expected_S(z, sup, w, th1, thi) - s).norm(), 1e-12 * s.norm());
  EXPECT_LT((expected_T(z, sup, w, q, thi) - t).norm(), 1e-12 * t.norm());
  EXPECT_NEAR(expected_local_loglik(z, sup, w, q, th1, thi), psi, 1e-12 * std::abs(psi));
}

TEST(ObservedK, LocalMaximumAtNoiselessTruth) {
  Scenario s = fixture::random_scenario(16, 5, 1.0, 5.0);
  const auto m = synthesize_measurements(s, 1, NoiseModel::noiseless());
  const Problem p = make_problem(s, m);
  ParamEstimate x;
  x.q = s.target;
  for (const auto& path : s.paths) x.theta.push_back(path.theta);
  const double k0 = observed_loglik_K(p, x);
  ASSERT_TRUE(std::isfinite(k0));
  for (int a = -20; a <= 20; ++a)
    for (int b = -20; b <= 20; ++b) {
      if (a == 0 && b == 0) continue;
      ParamEstimate y = x;
      y.q = s.target + Vec2(0.1 * a, 0.1 * b);
      EXPECT_LE(observed_loglik_K(p, y), k0);
    }
}

TEST(ObservedK, SharperNoiseFavorsTruthWithNormalization) {
  // Constants are dropped by the library; add -sum log sigma back to compare
  // likelihoods across sigma.
  Scenario s = fixture::random_scenario(17, 4, 1.0, 5.0);
  for (std::size_t i = 1; i < s.size(); ++i) s.supports[i] = ScattererSupport::uniform({s.paths[i].gamma});
  const auto m = synthesize_measurements(s, 1, NoiseModel::noiseless());
  ParamEstimate truth;
  truth.q = s.target;
  for (const auto& path : s.paths) truth.theta.push_back(path.theta);
  auto full_k = [&](double sigma, const ParamEstimate& x) {
    Scenario t = s;
    for (Node& n : t.nodes) n.sigma = sigma;
    const Problem p = make_problem(t, m);
    return observed_loglik_K(p, x) - (t.size() - 1) * std::log(sigma);
  };
  EXPECT_GT(full_k(1.0, truth), full_k(2.0, truth));
  CounterRng r(18);
  int off_checked = 0;
  for (int k = 0; k < 200 && off_checked < 20; ++k) {
    ParamEstimate y = truth;
    y.q = s.target + Vec2(r.uniform(-15, 15), r.uniform(-15, 15));
    const Problem p = make_problem(s, m);
    bool large = std::isfinite(observed_loglik_K(p, y));
    for (std::size_t i = 1; large && i < s.size(); ++i)
      large = std::abs(residual(p.observation(i), y.q, y.theta[0], y.theta[i], s.paths[i].gamma)) > 4.0;
    if (!large) continue;
    EXPECT_LT(full_k(1.0, y), full_k(2.0, y));
    ++off_checked;
  }
  EXPECT_GT(off_checked, 0);
}

TEST(ObservedK, InvariantToSupportOrder) {
  Scenario s = fixture::random_scenario(19, 5, 5.0, 5.0, deg_to_rad(5));
  const auto m = synthesize_measurements(s, 3);
  const Problem p = make_problem(s, m);
  Problem q = p;
  for (std::size_t i = 1; i < q.size(); ++i) {
    std::reverse(q.supports[i].angles.begin(), q.supports[i].angles.end());
    std::reverse(q.supports[i].prior.begin(), q.supports[i].prior.end());
  }
  CounterRng r(20);
  for (int k = 0; k < 100; ++k) {
    ParamEstimate x;
    x.q = s.target + Vec2(r.uniform(-20, 20), r.uniform(-20, 20));
    for (std::size_t i = 0; i < s.size(); ++i) x.theta.push_back(m.aoa[i] + r.uniform(-0.08, 0.08));
    const double a = observed_loglik_K(p, x), b = observed_loglik_K(q, x);
    if (std::isfinite(a))
      EXPECT_NEAR(a, b, 1e-12 * std::abs(a) + 1e-12);
    else
      EXPECT_EQ(a, b);
  }
}

TEST(ObservedK, OutsideBoxIsLogZero) {
  Scenario s = fixture::random_scenario(21, 4, 5.0, 5.0, deg_to_rad(3));
  const auto m = synthesize_measurements(s, 3);
  const Problem p = make_problem(s, m);
  ParamEstimate x;
  x.q = s.target;
  x.theta = m.aoa;
  x.theta[2] += deg_to_rad(4);
  EXPECT_EQ(observed_loglik_K(p, x), kLogZero);
}

TEST(ObservedK, EqualsLogSumExpOverCompleteData) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Scenario s = fixture::random_scenario(100 + seed, 3, 30.0, 10.0, deg_to_rad(5));
    const auto m = synthesize_measurements(s, seed);
    const Problem p = make_problem(s, m);
    CounterRng r(seed, 5);
    ParamEstimate x;
    x.q = s.target + Vec2(r.uniform(-10, 10), r.uniform(-10, 10));
    for (std::size_t i = 0; i < s.size(); ++i) x.theta.push_back(m.aoa[i] + r.uniform(-0.05, 0.05));
    std::vector<double> all;
    for (std::size_t a = 0; a < p.supports[1].size(); ++a)
      for (std::size_t b = 0; b < p.supports[2].size(); ++b) {
        const std::size_t asg[3] = {0, a, b};
        all.push_back(complete_loglik(p, x, asg));
      }
    const double k = observed_loglik_K(p, x), brute = lse(all);
    if (std::isfinite(brute))
      EXPECT_NEAR(k, brute, 1e-8);
    else
      EXPECT_EQ(k, kLogZero);
  }
}

TEST(CompleteLoglik, ZeroResidualViolatedWedgeAndDirectOracle) {
  Scenario s = fixture::random_scenario(22, 4, 2.0, 5.0);
  const auto m = synthesize_measurements(s, 1, NoiseModel::noiseless());
  const Problem p = make_problem(s, m);
  ParamEstimate x;
  x.q = s.target;
  for (const auto& path : s.paths) x.theta.push_back(path.theta);
  std::vector<std::size_t> truth(s.size(), 2);  // band center is the true angle
  double log_prior = 0;
  for (std::size_t i = 1; i < s.size(); ++i) log_prior += std::log(p.supports[i].prior[2]);
  EXPECT_NEAR(complete_loglik(p, x, truth), log_prior, 1e-12);

  ParamEstimate behind = x;
  const double th = s.paths[1].theta;
  behind.q = s.nodes[1].position - 30.0 * Vec2(std::cos(th), std::sin(th));
  EXPECT_EQ(complete_loglik(p, behind, truth), kLogZero);

  CounterRng r(23);
  for (int k = 0; k < 200; ++k) {
    ParamEstimate y = x;
    y.q = s.target + Vec2(r.uniform(-5, 5), r.uniform(-5, 5));
    std::vector<std::size_t> asg(s.size());
    for (auto& a : asg) a = static_cast<std::size_t>(r.uniform() * 5);
    double expected = 0;
    bool feasible = true;
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double g = p.supports[i].angles[asg[i]];
      feasible = feasible && wedge_contains(y.q, s.nodes[i].position, y.theta[i], g);
      expected += direct_loglik(p.observation(i), y.q, y.theta[0], y.theta[i], g) + std::log(p.supports[i].prior[asg[i]]);
    }
    const double got = complete_loglik(p, y, asg);
    if (feasible)
      EXPECT_NEAR(got, expected, 1e-9 * std::abs(expected) + 1e-12);
    else
      EXPECT_EQ(got, kLogZero);
  }
}
