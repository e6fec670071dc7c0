#pragma once

#include <cstdint>
#include <vector>

#include "nlosloc/likelihood.hpp"

namespace nlos {

struct EMOptions {
  int max_iter = 200;
  double tol = 1e-6;
  int max_cycles = 20;       ///< coordinate-ascent cycles per M-step
  double cycle_tol = 1e-8;   ///< stop cycling once Q improves by less
  int grid = 256;            ///< 1-D grid points before golden-section refinement
  int golden_steps = 40;
  int pga_steps = 200;       ///< projected gradient steps for a constrained q update
  int assignment_starts = 4; ///< extra multi-start points from hard scatterer assignments
  std::size_t max_assignments = 100000;
  /// sigma continuation for multi_start: stages at warmup_start * diameter,
  /// divided by warmup_factor until the nominal sigma. 0 disables.
  double warmup_start = 0.0;
  double warmup_factor = 2.0;
  int warmup_iter = 50;
};

/// Posterior over scatterer angles for every node; entry 0 (reference) is empty.
struct PosteriorWeights {
  std::vector<Posterior> nodes;
};

struct MStepResult {
  ParamEstimate x;
  bool singular_quadratic = false;
  int cycles = 0;
  double q_value = 0.0;  ///< Q(x_new | x_prev), constants dropped
};

struct EMResult {
  ParamEstimate x_hat;
  std::vector<double> loglik_trace;  ///< K(x^0), K(x^1), ...
  int iterations = 0;
  bool converged = false;
  int restarts_used = 1;
  bool singular_quadratic_seen = false;
};

PosteriorWeights e_step(const Problem& problem, const ParamEstimate& x_prev);

/// Q(x | x_prev) up to x-independent constants. Wedge terms of nodes whose
/// posterior is in a fallback mode are dropped (their indicator was not used).
double expected_complete_loglik(const Problem& problem, const PosteriorWeights& weights,
                                const ParamEstimate& x);

/// One generalized M-step: cyclic coordinate ascent over q, theta_1, theta_i.
/// Never decreases Q(. | x_prev).
MStepResult m_step(const PosteriorWeights& weights, const Problem& problem,
                   const ParamEstimate& x_prev, const EMOptions& opts = {});

EMResult run(const Problem& problem, const ParamEstimate& x0, const EMOptions& opts = {});

/// Centroid of the nodes jittered uniformly within half the network diameter;
/// theta_i = theta~_i. Deterministic in (seed, start).
ParamEstimate initial_estimate(const Problem& problem, std::uint64_t seed, std::uint64_t start);

/// Least-squares target positions for hard scatterer assignments (one support
/// angle per node, theta = theta~), ranked by K; the best `keep` distinct ones.
/// Assignments are enumerated when there are at most `max_assignments`,
/// otherwise sampled.
std::vector<ParamEstimate> assignment_starts(const Problem& problem, std::size_t keep,
                                             std::size_t max_assignments, std::uint64_t seed);

/// Runs `run` from n_starts jittered initial estimates plus
/// opts.assignment_starts assignment starts and keeps the highest final K.
/// With opts.warmup_start > 0 each start first passes through the inflated
/// sigma stages.
EMResult multi_start(const Problem& problem, int n_starts, std::uint64_t seed,
                     const EMOptions& opts = {});

/// Inflated sigma values for a continuation schedule, largest first; empty
/// when start <= 0.
std::vector<double> warmup_sigmas(const Problem& problem, double start, double factor);

/// Copy of the problem with every sigma raised to at least `sigma`.
Problem with_min_sigma(const Problem& problem, double sigma);

/// Clamps each theta into its measurement box.
ParamEstimate clamp_to_boxes(const Problem& problem, ParamEstimate x);

}  // namespace nlos
