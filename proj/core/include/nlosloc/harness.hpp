#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "nlosloc/scenario_io.hpp"

namespace nlos {

/// One estimator run on one noisy realization.
struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;  ///< measurement seed of the trial
  Estimator estimator = Estimator::Centralized;
  double param_value = 0.0;  ///< swept value (radians for eta0), 0 when nothing is varied
  Vec2 q_hat = Vec2::Zero();
  double error_m = 0.0;
  bool converged = false;
  bool failed = false;  ///< estimator threw; status holds the message
  int iterations = 0;
  double wall_time_s = 0.0;
  std::string status = "ok";
};

struct EstimateResult {
  Vec2 q = Vec2::Zero();
  bool converged = false;
  int iterations = 0;
};

/// Runs one estimator with the settings stored in the scenario config.
/// Throws nlos::Error subclasses on estimator failure.
EstimateResult run_estimator(Estimator estimator, const ScenarioConfig& config, const Problem& problem,
                             std::uint64_t seed);

/// Runs fn(0..n-1) on up to `workers` threads. Each index runs exactly once.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

/// Trial t draws measurements with substream t of `seed`; estimator seeds are
/// substreams of the trial seed, so results do not depend on `parallel`.
/// Records are ordered by (trial, estimator order).
std::vector<TrialRecord> run_trials(const ScenarioConfig& config, const std::vector<Estimator>& estimators,
                                    int trials, std::uint64_t seed, int parallel = 1, double param_value = 0.0);

struct SweepRow {
  double value = 0.0;  ///< in the swept unit (degrees for eta0, meters for sigma)
  Estimator estimator = Estimator::Centralized;
  int trials = 0;
  int converged = 0;
  double convergence_rate = 0.0;
  double rmse_m = 0.0;  ///< over converged trials; NaN when none converged
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<TrialRecord> trials;
};

/// Applies one swept value to a scenario config (eta0 also resets the AOA
/// noise width; sigma applies to every node).
ScenarioConfig apply_sweep_value(const ScenarioConfig& config, SweepParameter parameter, double value);

SweepResult run_sweep(const SweepSpec& spec, const ScenarioConfig& config, std::uint64_t seed, int parallel = 1);

/// Aggregates records that share an estimator.
SweepRow summarize(const std::vector<TrialRecord>& records, Estimator estimator, double value);

/// Documented default 5-node layout (hundreds of meters, reference nearly
/// LOS, uneven NLOS excess across the other nodes) at the given noise levels.
ScenarioConfig default_layout(double sigma_m = 10.0, double eta0_deg = 7.0);

enum class SupportMode { Band, List };
std::string to_string(SupportMode mode);

/// Number of target locations in the experiment-scale replica.
inline constexpr int kReplicaLocations = 13;

/// Experiment-scale 4-node layout: a reference node behind a corner (virtual
/// scatterer at 135 deg), a LOS node across the street, two nodes reached off
/// the facade of the building across the street. TDOA noise mean 1 m / std
/// 4 m, Gaussian AOA noise with 3 deg std, AOA box +/-6 deg.
ScenarioConfig replica_scenario(int location, SupportMode mode);

struct ReplicaRecord {
  int location = 0;
  SupportMode mode = SupportMode::Band;
  TrialRecord record;
};

std::vector<ReplicaRecord> replicate_experiment_synthetic(std::uint64_t seed, int trials_per_location = 10,
                                                          int parallel = 1,
                                                          std::vector<Estimator> estimators = {
                                                              Estimator::Centralized, Estimator::Distributed});

/// Empirical CDF of the error of converged trials per (estimator, mode).
struct CdfPoint {
  Estimator estimator;
  SupportMode mode;
  double error_m;
  double fraction;
};
std::vector<CdfPoint> error_cdf(const std::vector<ReplicaRecord>& records);

/// Fraction of converged trials of (estimator, mode) with error below threshold.
double fraction_below(const std::vector<ReplicaRecord>& records, Estimator estimator, SupportMode mode,
                      double threshold_m);

struct RelayTrialRow {
  int trial = 0;
  int node = 0;
  double start_offset_s = 0.0;
  double true_tdoa_m = 0.0;
  double recovered_tdoa_m = 0.0;
  double error_m = 0.0;
  std::string status = "ok";
};

struct RelayResult {
  std::vector<RelayTrialRow> rows;
  double max_abs_error_m = 0.0;
  double max_variation_m = 0.0;  ///< largest per-node range of recovered TDOA over trials
  int failures = 0;  ///< trials whose recovery threw
};

/// Redraws every node's T_0i (and T_0R) uniformly per trial; the source
/// waveform is fixed by spec.seed.
RelayResult run_relay_trials(const RelaySpec& spec, int parallel = 1);

/// CSV writers. Every file starts with a `schema=1` line.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, SweepParameter parameter);
void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_replica_csv(std::ostream& out, const std::vector<ReplicaRecord>& records);
void write_cdf_csv(std::ostream& out, const std::vector<CdfPoint>& points);
void write_relay_csv(std::ostream& out, const std::vector<RelayTrialRow>& rows);

}  // namespace nlos
