#include "nlosloc/em_centralized.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "nlosloc/angles.hpp"
#include "nlosloc/errors.hpp"
#include "nlosloc/optim.hpp"
#include "nlosloc/rng.hpp"

namespace nlos {

namespace {

bool constrained(const Posterior& post) { return post.fallback == PosteriorFallback::None; }

/// Intersection of the wedges of all angles carrying posterior mass.
Wedge active_cone(const Problem& problem, const PosteriorWeights& w, std::size_t i, double theta_i) {
  std::vector<double> widths;
  const ScattererSupport& support = problem.supports[i];
  for (std::size_t j = 0; j < support.size(); ++j)
    if (w.nodes[i].weights[j] > 0.0) widths.push_back(wrap_pi(2.0 * (support.angles[j] - theta_i)));
  return Wedge::intersect_common_start(problem.nodes[i].position, wrap_2pi(theta_i), widths);
}

bool wedge_terms_ok(const Problem& problem, const PosteriorWeights& w, std::size_t i,
                    const Vec2& q, double theta_i) {
  if (!constrained(w.nodes[i])) return true;
  const ScattererSupport& support = problem.supports[i];
  const Vec2& p = problem.nodes[i].position;
  for (std::size_t j = 0; j < support.size(); ++j)
    if (w.nodes[i].weights[j] > 0.0 && !wedge_contains(q, p, theta_i, support.angles[j])) return false;
  return true;
}

double node_term(const Problem& problem, const PosteriorWeights& w, std::size_t i,
                 const Vec2& q, double theta1, double theta_i,
                 const std::vector<NodeObservation>& obs) {
  if (!problem.in_box(i, theta_i)) return kLogZero;
  if (!wedge_terms_ok(problem, w, i, q, theta_i)) return kLogZero;
  return expected_local_loglik(obs[i], problem.supports[i], w.nodes[i].weights, q, theta1, theta_i);
}

std::vector<NodeObservation> observations(const Problem& problem) {
  std::vector<NodeObservation> obs(problem.size());
  for (std::size_t i = 0; i < problem.size(); ++i) obs[i] = problem.observation(i);
  return obs;
}

double q_objective(const Problem& problem, const PosteriorWeights& w, const ParamEstimate& x,
                   const std::vector<NodeObservation>& obs) {
  if (!problem.in_box(0, x.theta[0])) return kLogZero;
  double total = 0.0;
  for (std::size_t i = 1; i < problem.size(); ++i) {
    const double t = node_term(problem, w, i, x.q, x.theta[0], x.theta[i], obs);
    if (t == kLogZero) return kLogZero;
    total += t;
  }
  return total;
}

}  // namespace

PosteriorWeights e_step(const Problem& problem, const ParamEstimate& x_prev) {
  PosteriorWeights w;
  w.nodes.resize(problem.size());
  for (std::size_t i = 1; i < problem.size(); ++i) {
    w.nodes[i] = scatterer_posterior(problem.observation(i), problem.supports[i], x_prev.q,
                                     x_prev.theta[0], x_prev.theta[i]);
  }
  return w;
}

double expected_complete_loglik(const Problem& problem, const PosteriorWeights& weights,
                                const ParamEstimate& x) {
  return q_objective(problem, weights, x, observations(problem));
}

ParamEstimate clamp_to_boxes(const Problem& problem, ParamEstimate x) {
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const double aoa = problem.measurements.aoa[i];
    const double d = std::clamp(wrap_pi(x.theta[i] - aoa), -problem.eta0, problem.eta0);
    x.theta[i] = aoa + d;
  }
  return x;
}

MStepResult m_step(const PosteriorWeights& weights, const Problem& problem,
                   const ParamEstimate& x_prev, const EMOptions& opts) {
  const std::size_t n = problem.size();
  const auto obs = observations(problem);
  MStepResult out;
  out.x = x_prev;
  ParamEstimate& x = out.x;
  double current = q_objective(problem, weights, x, obs);

  for (int cycle = 0; cycle < opts.max_cycles; ++cycle) {
    out.cycles = cycle + 1;
    const double cycle_start = current;

    // q: aggregate quadratic over all nodes, constrained to the active wedges.
    Vec6 s = Vec6::Zero();
    for (std::size_t i = 1; i < n; ++i)
      s += expected_S(obs[i], problem.supports[i], weights.nodes[i].weights, x.theta[0], x.theta[i]);
    std::vector<Wedge> cones;
    for (std::size_t i = 1; i < n; ++i)
      if (constrained(weights.nodes[i])) cones.push_back(active_cone(problem, weights, i, x.theta[i]));
    auto feasible = [&](const Vec2& q) {
      for (const Wedge& c : cones)
        if (!c.contains(q)) return false;
      return true;
    };
    auto project = [&](const Vec2& q) { return project_onto_intersection(cones, q); };
    const QuadraticMax qm = maximize_quadratic(unpack_quadratic(s), feasible, project, x.q, opts.pga_steps);
    out.singular_quadratic = out.singular_quadratic || qm.singular;
    {
      ParamEstimate trial = x;
      trial.q = qm.q;
      const double v = q_objective(problem, weights, trial, obs);
      if (v >= current) {
        x = trial;
        current = v;
      }
    }

    // theta_1 enters every node's term.
    {
      auto f = [&](double t1) {
        ParamEstimate trial = x;
        trial.theta[0] = t1;
        return q_objective(problem, weights, trial, obs);
      };
      const ScalarMax best = maximize_on_interval(f, problem.box_lo(0), problem.box_hi(0), opts.grid,
                                                  opts.golden_steps);
      if (best.value >= current) {
        x.theta[0] = best.arg;
        current = best.value;
      }
    }

    // theta_i only enters node i's term.
    for (std::size_t i = 1; i < n; ++i) {
      const double others = current - node_term(problem, weights, i, x.q, x.theta[0], x.theta[i], obs);
      auto f = [&](double ti) { return node_term(problem, weights, i, x.q, x.theta[0], ti, obs); };
      const ScalarMax best = maximize_on_interval(f, problem.box_lo(i), problem.box_hi(i), opts.grid,
                                                  opts.golden_steps);
      if (current == kLogZero) {
        ParamEstimate trial = x;
        trial.theta[i] = best.arg;
        const double v = q_objective(problem, weights, trial, obs);
        if (v > current) {
          x = trial;
          current = v;
        }
      } else if (others + best.value >= current) {
        x.theta[i] = best.arg;
        current = q_objective(problem, weights, x, obs);
      }
    }

    if (!(current - cycle_start > opts.cycle_tol)) break;
  }
  out.q_value = current;
  return out;
}

EMResult run(const Problem& problem, const ParamEstimate& x0, const EMOptions& opts) {
  EMResult res;
  ParamEstimate x = clamp_to_boxes(problem, x0);
  double k_prev = observed_loglik_K(problem, x);
  res.loglik_trace.push_back(k_prev);

  for (int it = 1; it <= opts.max_iter; ++it) {
    const PosteriorWeights w = e_step(problem, x);
    const MStepResult ms = m_step(w, problem, x, opts);
    res.singular_quadratic_seen = res.singular_quadratic_seen || ms.singular_quadratic;
    const double k_new = observed_loglik_K(problem, ms.x);
    res.iterations = it;
    if (k_new < k_prev) {
      // Only reachable through a posterior fallback; the estimate cannot ascend.
      res.loglik_trace.push_back(k_prev);
      res.converged = true;
      break;
    }
    const double dq = (ms.x.q - x.q).norm();
    double dtheta = 0.0;
    for (std::size_t i = 0; i < x.theta.size(); ++i)
      dtheta = std::max(dtheta, std::abs(ms.x.theta[i] - x.theta[i]));
    x = ms.x;
    k_prev = k_new;
    res.loglik_trace.push_back(k_new);
    if (dq < opts.tol * (1.0 + x.q.norm()) && dtheta < opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.x_hat = x;
  return res;
}

ParamEstimate initial_estimate(const Problem& problem, std::uint64_t seed, std::uint64_t start) {
  CounterRng rng(seed, 0x5354415254ULL + start);
  const double radius = 0.5 * network_diameter(problem.nodes);
  const double r = radius * std::sqrt(rng.uniform());
  const double a = kTwoPi * rng.uniform();
  ParamEstimate x;
  x.q = node_centroid(problem.nodes) + r * Vec2(std::cos(a), std::sin(a));
  x.theta = problem.measurements.aoa;
  return x;
}

std::vector<ParamEstimate> assignment_starts(const Problem& problem, std::size_t keep,
                                             std::size_t max_assignments, std::uint64_t seed) {
  const std::size_t n = problem.size();
  std::vector<ParamEstimate> out;
  if (keep == 0 || n < 2) return out;
  const ParamEstimate base = clamp_to_boxes(problem, initial_estimate(problem, seed, 0));
  if (!try_steering_vector(base.theta[0], problem.measurements.reference.gamma)) return out;

  // Per node, the quadratic pieces of every usable support angle.
  std::vector<std::vector<QuadraticForm>> pieces(n);
  double combos = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const NodeObservation z = problem.observation(i);
    for (double gamma : problem.supports[i].angles)
      if (try_steering_vector(base.theta[i], gamma))
        pieces[i].push_back(unpack_quadratic(statistic_S(z, base.theta[0], base.theta[i], gamma)));
    if (pieces[i].empty()) return out;
    combos *= static_cast<double>(pieces[i].size());
  }

  struct Candidate {
    double k;
    Vec2 q;
  };
  std::vector<Candidate> found;
  auto consider = [&](const std::vector<std::size_t>& pick) {
    Eigen::Matrix2d U = Eigen::Matrix2d::Zero();
    Vec2 V = Vec2::Zero();
    for (std::size_t i = 1; i < n; ++i) {
      U += pieces[i][pick[i]].U;
      V += pieces[i][pick[i]].V;
    }
    const double det = U.determinant();
    if (!(std::abs(det) > 1e-12 * std::max(1.0, U.squaredNorm()))) return;
    ParamEstimate x = base;
    x.q = U.inverse() * V;
    const double k = observed_loglik_K(problem, x);
    if (k != kLogZero) found.push_back({k, x.q});
  };

  std::vector<std::size_t> pick(n, 0);
  if (combos <= static_cast<double>(max_assignments)) {
    while (true) {
      consider(pick);
      std::size_t i = 1;
      while (i < n && ++pick[i] == pieces[i].size()) pick[i++] = 0;
      if (i == n) break;
    }
  } else {
    CounterRng rng(seed, 0x41535349474eULL);
    for (std::size_t s = 0; s < max_assignments; ++s) {
      for (std::size_t i = 1; i < n; ++i)
        pick[i] = std::min(pieces[i].size() - 1,
                           static_cast<std::size_t>(rng.uniform() * static_cast<double>(pieces[i].size())));
      consider(pick);
    }
  }

  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) { return a.k > b.k; });
  const double sep = 1e-3 * std::max(1.0, network_diameter(problem.nodes));
  for (const Candidate& c : found) {
    bool dup = false;
    for (const ParamEstimate& x : out) dup = dup || (x.q - c.q).norm() < sep;
    if (dup) continue;
    ParamEstimate x = base;
    x.q = c.q;
    out.push_back(x);
    if (out.size() == keep) break;
  }
  return out;
}

std::vector<double> warmup_sigmas(const Problem& problem, double start, double factor) {
  std::vector<double> out;
  if (!(start > 0.0)) return out;
  if (!(factor > 1.0)) throw ConfigError("warm-up factor must be > 1");
  double sigma_max = 0.0;
  for (const Node& n : problem.nodes) sigma_max = std::max(sigma_max, n.sigma);
  for (double s = start * network_diameter(problem.nodes); s > factor * sigma_max; s /= factor) out.push_back(s);
  return out;
}

Problem with_min_sigma(const Problem& problem, double sigma) {
  Problem p = problem;
  for (Node& n : p.nodes) n.sigma = std::max(n.sigma, sigma);
  return p;
}

EMResult multi_start(const Problem& problem, int n_starts, std::uint64_t seed, const EMOptions& opts) {
  if (n_starts < 1) throw ConfigError("multi_start needs n_starts >= 1");
  std::vector<ParamEstimate> starts;
  for (int k = 0; k < n_starts; ++k) starts.push_back(initial_estimate(problem, seed, static_cast<std::uint64_t>(k)));
  if (opts.assignment_starts > 0) {
    auto extra = assignment_starts(problem, static_cast<std::size_t>(opts.assignment_starts), opts.max_assignments, seed);
    starts.insert(starts.end(), extra.begin(), extra.end());
  }
  const std::vector<double> stages = warmup_sigmas(problem, opts.warmup_start, opts.warmup_factor);
  EMOptions stage_opts = opts;
  stage_opts.max_iter = opts.warmup_iter;
  EMResult best;
  bool have = false;
  for (ParamEstimate x0 : starts) {
    for (double sigma : stages) x0 = run(with_min_sigma(problem, sigma), x0, stage_opts).x_hat;
    EMResult r = run(problem, x0, opts);
    if (!have || r.loglik_trace.back() > best.loglik_trace.back()) {
      best = std::move(r);
      have = true;
    }
  }
  best.restarts_used = static_cast<int>(starts.size());
  return best;
}

}  // namespace nlos
