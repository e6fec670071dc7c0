#include "nlosloc/em_distributed.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "nlosloc/angles.hpp"
#include "nlosloc/em_centralized.hpp"
#include "nlosloc/errors.hpp"
#include "nlosloc/optim.hpp"
#include "nlosloc/rng.hpp"

namespace nlos {

namespace {

constexpr double kStatClamp = 1e12;

std::vector<Wedge> node_wedges(const LocalProblem& local, double theta_i) {
  std::vector<Wedge> out;
  for (double gamma : local.support.angles)
    if (try_steering_vector(theta_i, gamma)) out.push_back(Wedge::from_path(local.z.position, theta_i, gamma));
  return out;
}

bool in_union(const std::vector<Wedge>& wedges, const Vec2& q) {
  for (const Wedge& w : wedges)
    if (w.contains(q)) return true;
  return false;
}

Vec2 project_union(const std::vector<Wedge>& wedges, const Vec2& x) {
  Vec2 best = x;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Wedge& w : wedges) {
    const Vec2 p = w.project(x);
    const double d = (p - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

double theta1_objective(const Vec2& t, double theta1, double gamma1) {
  const double c = std::cos(theta1 - gamma1);
  if (std::abs(c) <= kSingularCos) return kLogZero;
  const double u = 1.0 / c;
  return t.x() * u * u + t.y() * u;
}

// psi-bar as a function of theta_i alone, with the support trigonometry hoisted.
class PsiBar {
 public:
  PsiBar(const LocalProblem& local, const Posterior& rho, const Vec2& q, double theta1) {
    const NodeObservation& z = local.z;
    k_ = 1.0 / (2.0 * z.sigma * z.sigma);
    dq_ = q - z.position;
    const auto g1 = try_steering_vector(theta1, z.reference.gamma);
    valid_ = g1.has_value();
    if (valid_) base_ = z.tdoa + g1->dot(q - z.reference.position);
    for (std::size_t j = 0; j < local.support.size(); ++j) {
      if (rho.weights[j] <= 0.0) continue;
      w_.push_back(rho.weights[j]);
      cg_.push_back(std::cos(local.support.angles[j]));
      sg_.push_back(std::sin(local.support.angles[j]));
    }
  }

  double operator()(double theta) const {
    if (!valid_) return kLogZero;
    const double ct = std::cos(theta), st = std::sin(theta);
    double acc = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j) {
      const double c = ct * cg_[j] + st * sg_[j];
      if (std::abs(c) <= kSingularCos) return kLogZero;
      const double r = base_ - (cg_[j] * dq_.x() + sg_[j] * dq_.y()) / c;
      acc -= w_[j] * k_ * r * r;
    }
    return acc;
  }

 private:
  bool valid_ = false;
  double k_ = 0.0, base_ = 0.0;
  Vec2 dq_ = Vec2::Zero();
  std::vector<double> w_, cg_, sg_;
};

// Indices of grid local maxima whose value is within tol of the best but lie
// farther than one step away from the best index.
bool unique_on_grid(const std::vector<double>& v, double tol) {
  const std::size_t n = v.size();
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (v[k] > v[best]) best = k;
  if (!std::isfinite(v[best])) return true;
  for (std::size_t k = 0; k < n; ++k) {
    if (k + 1 >= best && k <= best + 1) continue;
    const double left = k > 0 ? v[k - 1] : kLogZero;
    const double right = k + 1 < n ? v[k + 1] : kLogZero;
    if (v[k] >= left && v[k] >= right && v[k] >= v[best] - tol) return false;
  }
  return true;
}

}  // namespace

StatisticPair project_statistics(const StatisticPair& stat) {
  StatisticPair out = stat;
  QuadraticForm f = unpack_quadratic(stat.s);
  Eigen::Matrix2d U = 0.5 * (f.U + f.U.transpose());
  if (U.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(U);
    const Vec2 lambda = eig.eigenvalues().cwiseMin(0.0);
    U = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
    U(0, 1) = U(1, 0) = 0.5 * (U(0, 1) + U(1, 0));
  }
  out.s = pack_quadratic(U, f.V);
  for (Eigen::Index k = 0; k < out.s.size(); ++k) out.s(k) = std::clamp(out.s(k), -kStatClamp, kStatClamp);
  out.t = out.t.cwiseMax(-kStatClamp).cwiseMin(kStatClamp);
  return out;
}

bool statistics_valid(const StatisticPair& stat, double tol) {
  const QuadraticForm f = unpack_quadratic(stat.s);
  const double scale = std::max(1.0, f.U.cwiseAbs().maxCoeff());
  if (!stat.s.allFinite() || !stat.t.allFinite()) return false;
  if (std::abs(f.U(0, 1) - f.U(1, 0)) > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(0.5 * (f.U + f.U.transpose()));
  return eig.eigenvalues().maxCoeff() <= tol * scale;
}

StepSchedule::StepSchedule(double scale, double exponent) : scale_(scale), exponent_(exponent) {
  if (!(scale > 0.0)) throw ConfigError("step schedule scale must be > 0");
  if (!(exponent > 0.5 && exponent <= 1.0)) throw ConfigError("step schedule exponent must lie in (0.5, 1]");
}

double StepSchedule::at(int n) const {
  return std::min(1.0, scale_ * std::pow(static_cast<double>(std::max(1, n)), -exponent_));
}

LocalProblem local_problem(const Problem& problem, std::size_t index) {
  LocalProblem lp;
  lp.z = problem.observation(index);
  lp.support = problem.supports[index];
  lp.theta1_lo = problem.box_lo(0);
  lp.theta1_hi = problem.box_hi(0);
  lp.theta_lo = problem.box_lo(index);
  lp.theta_hi = problem.box_hi(index);
  return lp;
}

LocalExpectation local_expectation(const NodeState& state, const LocalProblem& local) {
  LocalExpectation e;
  e.rho = scatterer_posterior(local.z, local.support, state.q, state.theta1, state.theta_i);
  if (try_steering_vector(state.theta1, local.z.reference.gamma)) {
    e.mean.s = expected_S(local.z, local.support, e.rho.weights, state.theta1, state.theta_i);
  } else {
    e.mean.s = state.stat.s;
  }
  e.mean.t = expected_T(local.z, local.support, e.rho.weights, state.q, state.theta_i);
  return e;
}

StatisticPair robbins_monro_update(const StatisticPair& current, const StatisticPair& mean,
                                   double lambda) {
  StatisticPair out;
  out.s = current.s + lambda * (mean.s - current.s);
  out.t = current.t + lambda * (mean.t - current.t);
  return project_statistics(out);
}

StatisticPair local_e_step(const NodeState& state, const LocalProblem& local, double lambda) {
  return robbins_monro_update(state.stat, local_expectation(state, local).mean, lambda);
}

void gossip_round(std::vector<NodeState>& states, const GossipMatrix& W) {
  const std::size_t m = states.size();
  if (W.size() != m) throw ConfigError("gossip matrix size does not match the node count");
  std::vector<StatisticPair> mixed(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double w = W.W(r, static_cast<Eigen::Index>(j));
      if (w == 0.0) continue;
      if (w == 1.0 && i == j) {
        mixed[i] = states[j].stat;
        continue;
      }
      mixed[i].s += w * states[j].stat.s;
      mixed[i].t += w * states[j].stat.t;
    }
  }
  for (std::size_t i = 0; i < m; ++i) states[i].stat = mixed[i];
}

LocalMStepResult local_m_step(const NodeState& state, const LocalProblem& local,
                              const Posterior& rho, const LocalMStepOptions& opts) {
  LocalMStepResult out;
  const std::vector<Wedge> wedges = node_wedges(local, state.theta_i);
  auto feasible = [&](const Vec2& q) { return in_union(wedges, q); };
  auto project = [&](const Vec2& q) { return project_union(wedges, q); };
  const QuadraticMax qm =
      maximize_quadratic(unpack_quadratic(state.stat.s), feasible, project, state.q, opts.pga_steps);
  out.q = qm.q;
  out.singular_quadratic = qm.singular;

  const double gamma1 = local.z.reference.gamma;
  auto f1 = [&](double th) { return theta1_objective(state.stat.t, th, gamma1); };
  const ScalarMax b1 = maximize_on_interval(f1, local.theta1_lo, local.theta1_hi, opts.grid, opts.golden_steps);
  out.theta1 = b1.value == kLogZero ? state.theta1 : b1.arg;

  const PsiBar fi(local, rho, out.q, out.theta1);
  const ScalarMax bi = maximize_on_interval(fi, local.theta_lo, local.theta_hi, opts.grid, opts.golden_steps);
  out.theta_i = bi.value == kLogZero ? state.theta_i : bi.arg;
  return out;
}

UniquenessReport check_mstep_uniqueness(const NodeState& state, const LocalProblem& local,
                                        const Posterior& rho, int grid, double value_tol) {
  UniquenessReport rep;
  const LocalMStepResult x = local_m_step(state, local, rho);

  auto sweep = [&](auto&& f, double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(grid));
    for (int k = 0; k < grid; ++k) v[static_cast<std::size_t>(k)] = f(lo + (hi - lo) * k / (grid - 1));
    return unique_on_grid(v, value_tol);
  };
  if (local.theta1_hi > local.theta1_lo)
    rep.theta1_unique = sweep([&](double th) { return theta1_objective(state.stat.t, th, local.z.reference.gamma); },
                              local.theta1_lo, local.theta1_hi);
  if (local.theta_hi > local.theta_lo)
    rep.theta_i_unique = sweep(
        [&](double th) { return expected_local_loglik(local.z, local.support, rho.weights, x.q, x.theta1, th); },
        local.theta_lo, local.theta_hi);

  // q: 2-D grid around the maximizer; compare grid local maxima.
  const std::vector<Wedge> wedges = node_wedges(local, state.theta_i);
  const QuadraticForm f = unpack_quadratic(state.stat.s);
  const int side = std::max(11, static_cast<int>(std::sqrt(static_cast<double>(grid))) | 1);
  const double radius = std::max(10.0, 2.0 * (x.q - local.z.position).norm());
  const double h = 2.0 * radius / (side - 1);
  std::vector<double> v(static_cast<std::size_t>(side * side), kLogZero);
  auto at = [&](int a, int b) -> double& { return v[static_cast<std::size_t>(a * side + b)]; };
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b) {
      const Vec2 q = x.q + Vec2(-radius + a * h, -radius + b * h);
      if (in_union(wedges, q)) at(a, b) = quadratic_value(f, q);
    }
  double best = kLogZero;
  int ba = 0, bb = 0;
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b)
      if (at(a, b) > best) {
        best = at(a, b);
        ba = a;
        bb = b;
      }
  if (best == kLogZero) return rep;
  const double tol = value_tol * std::max(1.0, std::abs(best));
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b) {
      if (std::abs(a - ba) <= 1 && std::abs(b - bb) <= 1) continue;
      const double c = at(a, b);
      if (c == kLogZero || c < best - tol) continue;
      bool local_max = true;
      for (int da = -1; da <= 1 && local_max; ++da)
        for (int db = -1; db <= 1; ++db) {
          const int aa = a + da, bb2 = b + db;
          if (aa < 0 || bb2 < 0 || aa >= side || bb2 >= side || (da == 0 && db == 0)) continue;
          if (at(aa, bb2) > c) {
            local_max = false;
            break;
          }
        }
      if (local_max) rep.q_unique = false;
    }
  return rep;
}

double disagreement(const std::vector<NodeState>& states, double meters_per_radian) {
  double best = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      const double dq2 = (states[i].q - states[j].q).squaredNorm();
      const double da = meters_per_radian * wrap_pi(states[i].theta1 - states[j].theta1);
      best = std::max(best, std::sqrt(dq2 + da * da));
    }
  return best;
}

DistEMResult run_distributed(const Problem& problem, const GossipScheme& scheme,
                             const StepSchedule& schedule, const DistEMOptions& opts) {
  const std::size_t n_nodes = problem.size();
  if (n_nodes < 2) throw ConfigError("distributed EM needs at least one non-reference node");
  const std::size_t m = n_nodes - 1;
  if (scheme.size() != m) throw ConfigError("gossip topology size must equal the number of non-reference nodes");

  const double diameter = network_diameter(problem.nodes);
  const double mpr = opts.meters_per_radian > 0.0 ? opts.meters_per_radian : diameter;
  const Vec2 centroid = node_centroid(problem.nodes);
  const double guard = opts.divergence_factor * std::max(diameter, 1.0);

  std::vector<LocalProblem> locals(m);
  std::vector<NodeState> states(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t idx = k + 1;
    locals[k] = local_problem(problem, idx);
    const ParamEstimate x0 = initial_estimate(problem, opts.seed, idx);
    NodeState& st = states[k];
    st.node_id = problem.nodes[idx].id;
    st.index = idx;
    st.q = x0.q;
    st.theta1 = x0.theta[0];
    st.theta_i = x0.theta[idx];
    if (!opts.warm_start.empty()) {
      if (opts.warm_start.size() != m) throw ConfigError("warm start needs one entry per non-reference node");
      st.q = opts.warm_start[k].q;
      st.theta1 = opts.warm_start[k].theta1;
      st.theta_i = opts.warm_start[k].theta_i;
    }
    st.stat = project_statistics(local_expectation(st, locals[k]).mean);
  }

  DistEMResult res;
  for (const NodeState& st : states) res.node_ids.push_back(st.node_id);
  auto snapshot = [&]() {
    if (!opts.record_trajectories) return;
    std::vector<NodeSnapshot> snap;
    snap.reserve(m);
    for (const NodeState& st : states) snap.push_back({st.q, st.theta1, st.theta_i});
    res.trajectories.push_back(std::move(snap));
  };
  snapshot();
  res.disagreement_trace.push_back(disagreement(states, mpr));

  CounterRng rng(opts.seed, 0x57474f5353ULL);
  std::vector<Posterior> rho(m);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double lambda = schedule.at(it);
    for (std::size_t k = 0; k < m; ++k) {
      const LocalExpectation e = local_expectation(states[k], locals[k]);
      rho[k] = e.rho;
      states[k].stat = robbins_monro_update(states[k].stat, e.mean, lambda);
    }
    gossip_round(states, scheme.sample(rng));

    double max_move = 0.0;
    bool diverged = false;
    for (std::size_t k = 0; k < m; ++k) {
      NodeState& st = states[k];
      const LocalMStepResult r = local_m_step(st, locals[k], rho[k], opts.mstep);
      res.singular_quadratic_seen = res.singular_quadratic_seen || r.singular_quadratic;
      max_move = std::max(max_move, (r.q - st.q).norm());
      st.q = r.q;
      st.theta1 = r.theta1;
      st.theta_i = r.theta_i;
      st.n = it;
      if (!st.q.allFinite() || (st.q - centroid).norm() > guard) diverged = true;
    }
    snapshot();
    const double dis = disagreement(states, mpr);
    res.disagreement_trace.push_back(dis);
    res.iterations = it;
    if (diverged) {
      res.diverged = true;
      break;
    }
    if (it >= 2 && dis < opts.consensus_tol && max_move < opts.move_tol) {
      res.converged = true;
      break;
    }
  }

  Vec2 qsum = Vec2::Zero();
  double dth = 0.0;
  for (const NodeState& st : states) {
    qsum += st.q;
    dth += wrap_pi(st.theta1 - states[0].theta1);
  }
  res.q_consensus = qsum / static_cast<double>(m);
  res.theta1_consensus = states[0].theta1 + dth / static_cast<double>(m);
  res.final_states = std::move(states);
  return res;
}

std::vector<double> gossip_average(std::vector<double> values, const GossipScheme& scheme, CounterRng& rng,
                                   double tol, int max_rounds) {
  if (values.size() != scheme.size()) throw ConfigError("one value per gossip node required");
  auto spread = [&]() {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return 0.0;  // also covers every value being -inf
    return *hi - *lo;
  };
  for (int r = 0; r < max_rounds && !(spread() <= tol); ++r) {
    const Eigen::MatrixXd W = scheme.sample(rng).W;
    std::vector<double> next(values.size(), 0.0);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j)
        if (W(i, j) != 0.0) next[static_cast<std::size_t>(i)] += W(i, j) * values[static_cast<std::size_t>(j)];
    values = std::move(next);
  }
  return values;
}

DistSolveResult solve_distributed(const Problem& problem, const GossipScheme& scheme,
                                  const StepSchedule& schedule, const DistSolveOptions& opts) {
  if (opts.restarts < 1) throw ConfigError("restarts must be >= 1");
  if (opts.warmup_start > 0.0 && !(opts.warmup_factor > 1.0)) throw ConfigError("warm-up factor must be > 1");
  const std::vector<double> stages = warmup_sigmas(problem, opts.warmup_start, opts.warmup_factor);

  DistSolveResult out;
  double best_score = kLogZero;
  CounterRng score_rng(opts.em.seed, 0x53434f5245ULL);
  for (int r = 0; r < opts.restarts; ++r) {
    DistEMOptions em = opts.em;
    if (r > 0) em.seed = substream_seed(opts.em.seed, static_cast<std::uint64_t>(r));
    const bool record = em.record_trajectories;
    em.record_trajectories = false;
    for (double sigma : stages) {
      const Problem inflated = with_min_sigma(problem, sigma);
      em.max_iter = opts.warmup_iter;
      const DistEMResult stage = run_distributed(inflated, scheme, schedule, em);
      out.total_iterations += stage.iterations;
      em.warm_start.clear();
      for (const NodeState& st : stage.final_states) em.warm_start.push_back({st.q, st.theta1, st.theta_i});
    }
    em.max_iter = opts.em.max_iter;
    em.record_trajectories = record;
    DistEMResult res = run_distributed(problem, scheme, schedule, em);
    out.total_iterations += res.iterations;

    std::vector<double> local(res.final_states.size());
    for (std::size_t k = 0; k < local.size(); ++k) {
      const NodeState& st = res.final_states[k];
      const NodeObservation z = problem.observation(st.index);
      local[k] = local_observed_loglik(z, problem.supports[st.index], res.q_consensus, res.theta1_consensus,
                                       st.theta_i);
    }
    // Local fits at each node's own estimate are nearly perfect when the
    // network disagrees, so restarts are scored at the consensus point.
    const double score = res.diverged ? kLogZero : gossip_average(local, scheme, score_rng)[0];
    out.scores.push_back(score);
    const bool better = res.converged != out.best.converged ? res.converged : score > best_score;
    if (r == 0 || better) {
      best_score = score;
      out.best = std::move(res);
      out.best_restart = r;
    }
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const DistEMResult& result) {
  out << "schema=1\n";
  out << "iteration,node_id,q_x,q_y,theta1,theta_i,disagreement\n";
  for (std::size_t it = 0; it < result.trajectories.size(); ++it) {
    const auto& snap = result.trajectories[it];
    for (std::size_t k = 0; k < snap.size(); ++k) {
      out << it << ',' << result.node_ids[k] << ',' << snap[k].q.x() << ',' << snap[k].q.y() << ','
          << snap[k].theta1 << ',' << snap[k].theta_i << ',' << result.disagreement_trace[it] << '\n';
    }
  }
}

}  // namespace nlos
