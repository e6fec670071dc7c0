#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nlosloc/gossip.hpp"
#include "nlosloc/likelihood.hpp"

namespace nlos {

/// Per-node sufficient statistics: s = [Vec(U); -2V], t.
struct StatisticPair {
  Vec6 s = Vec6::Zero();
  Vec2 t = Vec2::Zero();
};

/// Symmetrizes the U block and clamps its positive eigenvalues to 0; t is
/// clamped to +/-1e12.
StatisticPair project_statistics(const StatisticPair& stat);

/// U block symmetric and negative semidefinite within `tol` (relative).
bool statistics_valid(const StatisticPair& stat, double tol = 1e-9);

/// lambda_n = min(1, c * n^-alpha), alpha in (0.5, 1], c > 0.
class StepSchedule {
 public:
  StepSchedule() = default;
  /// Throws ConfigError outside the admissible range.
  StepSchedule(double scale, double exponent);
  double scale() const { return scale_; }
  double exponent() const { return exponent_; }
  double at(int n) const;

 private:
  double scale_ = 1.0;
  double exponent_ = 0.7;
};

struct NodeState {
  int node_id = 0;
  std::size_t index = 0;  ///< position in Problem::nodes
  StatisticPair stat;
  Vec2 q = Vec2::Zero();
  double theta1 = 0.0;
  double theta_i = 0.0;
  int n = 0;
};

/// Everything node i may use: its own data, support, the reference broadcast
/// and both AOA boxes.
struct LocalProblem {
  NodeObservation z;
  ScattererSupport support;
  double theta1_lo = 0.0, theta1_hi = 0.0;
  double theta_lo = 0.0, theta_hi = 0.0;
};

LocalProblem local_problem(const Problem& problem, std::size_t index);

/// Posterior at x_i^{n-1} together with the fresh statistics it implies.
struct LocalExpectation {
  Posterior rho;
  StatisticPair mean;  ///< s-bar, t-bar
};

LocalExpectation local_expectation(const NodeState& state, const LocalProblem& local);

/// s~ = s + lambda (s-bar - s), t~ likewise, then projected. lambda in [0, 1].
StatisticPair robbins_monro_update(const StatisticPair& current, const StatisticPair& mean,
                                   double lambda);

/// Convenience: local_expectation followed by robbins_monro_update.
StatisticPair local_e_step(const NodeState& state, const LocalProblem& local, double lambda);

/// s_i <- sum_j W(i, j) s~_j for every node (and t likewise).
void gossip_round(std::vector<NodeState>& states, const GossipMatrix& W);

struct LocalMStepOptions {
  int grid = 256;
  int golden_steps = 40;
  int pga_steps = 200;
};

struct LocalMStepResult {
  Vec2 q = Vec2::Zero();
  double theta1 = 0.0;
  double theta_i = 0.0;
  bool singular_quadratic = false;
};

/// q over the union of node i's wedges at theta_i^{n-1}; theta_1 from t;
/// theta_i from psi-bar weighted by `rho` (the posterior at x_i^{n-1}).
LocalMStepResult local_m_step(const NodeState& state, const LocalProblem& local,
                              const Posterior& rho, const LocalMStepOptions& opts = {});

/// Brute-force check that each of the three local maximizations has a single
/// global maximizer: no second grid local maximum within `value_tol` of the
/// best at distance beyond one grid step.
struct UniquenessReport {
  bool q_unique = true;
  bool theta1_unique = true;
  bool theta_i_unique = true;
};
UniquenessReport check_mstep_uniqueness(const NodeState& state, const LocalProblem& local,
                                        const Posterior& rho, int grid = 2001,
                                        double value_tol = 1e-6);

/// max over pairs of sqrt(|q_i - q_j|^2 + (m * (theta1_i - theta1_j))^2).
double disagreement(const std::vector<NodeState>& states, double meters_per_radian);

struct NodeSnapshot {
  Vec2 q;
  double theta1;
  double theta_i;
};

struct DistEMOptions {
  int max_iter = 2000;
  double consensus_tol = 1e-2;
  double move_tol = 1e-2;          ///< per-node |q^n - q^{n-1}| in meters
  double meters_per_radian = 0.0;  ///< 0 selects the network diameter
  double divergence_factor = 10.0;
  std::uint64_t seed = 1;
  LocalMStepOptions mstep;
  bool record_trajectories = true;
  /// Per-node starting point (one per non-reference node) replacing the
  /// jittered initialization; statistics are still rebuilt from it.
  std::vector<NodeSnapshot> warm_start;
};

struct DistEMResult {
  std::vector<std::vector<NodeSnapshot>> trajectories;  ///< [iteration][node], iteration 0 = init
  std::vector<double> disagreement_trace;                ///< one entry per iteration, 0 = init
  bool converged = false;
  bool diverged = false;
  bool singular_quadratic_seen = false;
  int iterations = 0;
  Vec2 q_consensus = Vec2::Zero();
  double theta1_consensus = 0.0;
  std::vector<NodeState> final_states;
  std::vector<int> node_ids;
};

/// Local E-step, one gossip round and local M-steps per iteration, all nodes
/// synchronous. Deterministic in (problem, scheme, schedule, opts.seed).
DistEMResult run_distributed(const Problem& problem, const GossipScheme& scheme,
                             const StepSchedule& schedule, const DistEMOptions& opts = {});

/// Average consensus of one scalar per node: gossip rounds until the spread
/// drops below `tol` (or max_rounds).
std::vector<double> gossip_average(std::vector<double> values, const GossipScheme& scheme, CounterRng& rng,
                                   double tol = 1e-9, int max_rounds = 100000);

struct DistSolveOptions {
  DistEMOptions em;
  int restarts = 4;
  /// First warm-up stage assumes sigma = warmup_start * network diameter, then
  /// divides by warmup_factor until the nominal sigma is reached. 0 disables.
  double warmup_start = 0.25;
  double warmup_factor = 2.0;
  int warmup_iter = 200;
};

struct DistSolveResult {
  DistEMResult best;
  std::vector<double> scores;  ///< network-average local K per restart (kLogZero if diverged)
  int best_restart = 0;
  int total_iterations = 0;
};

/// Restarted distributed EM. Each restart runs warm-up stages with inflated
/// sigma, every node resuming from its own previous estimate, then a final
/// stage at the nominal sigma. Converged restarts win over unconverged
/// ones, then the highest gossip-averaged local K at the consensus point.
DistSolveResult solve_distributed(const Problem& problem, const GossipScheme& scheme,
                                  const StepSchedule& schedule, const DistSolveOptions& opts = {});

/// iteration,node_id,q_x,q_y,theta1,theta_i,disagreement (after a schema=1 row).
void write_trajectory_csv(std::ostream& out, const DistEMResult& result);

}  // namespace nlos
