#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nlosloc/em_centralized.hpp"
#include "nlosloc/em_distributed.hpp"
#include "nlosloc/gossip.hpp"
#include "nlosloc/model.hpp"
#include "nlosloc/relay_sim.hpp"

namespace nlos {

/// Estimator settings that can ride along with a scenario file.
/// The centralized M-step defaults to a coarser search here (64-point grids,
/// 3 cycles): on the shipped layouts it lands on the same estimates and is
/// several times faster, which matters for trial sweeps.
struct EstimatorSettings {
  int centralized_starts = 1;
  EMOptions em{.max_cycles = 3, .grid = 64};
  DistSolveOptions dist;
  StepSchedule schedule{1.0, 0.7};
};

/// Everything a scenario JSON describes. Node order follows the file except
/// that the reference node is moved to index 0.
struct ScenarioConfig {
  Scenario scenario;
  NoiseModel noise;
  Topology topology;
  GossipScheme gossip;
  EstimatorSettings estimators;
  std::uint64_t seed = 1;
};

/// Parses a scenario document. Paths inside it (gossip matrix files) are
/// resolved against `base_dir`. Throws ConfigError.
ScenarioConfig parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Round-trippable JSON for a scenario (true paths as gamma/aoa pairs,
/// supports as explicit lists).
std::string scenario_to_json(const Scenario& scenario);

enum class Estimator { Centralized, Distributed, TdoaOnly };
std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

enum class SweepParameter { None, Eta0, Sigma };

struct SweepSpec {
  SweepParameter parameter = SweepParameter::None;
  std::vector<double> values;  ///< radians for eta0, meters for sigma
  int trials = 1;
  std::vector<Estimator> estimators{Estimator::Centralized, Estimator::Distributed, Estimator::TdoaOnly};
  std::string out;

  /// Throws ConfigError.
  void validate() const;
};

struct SweepConfig {
  SweepSpec spec;
  ScenarioConfig scenario;
};

/// {"scenario": {...} | "scenario_file": "...", "vary": "eta0"|"sigma"|"none",
///  "values": [...], "trials": n, "estimators": [...], "out": "..."}.
/// eta0 values are in degrees, sigma values in meters.
SweepConfig parse_sweep(const std::string& json_text, const std::filesystem::path& base_dir = {});
SweepConfig load_sweep(const std::filesystem::path& path);

/// Relay trial template: geometry is fixed, start offsets are redrawn per trial.
struct RelaySpec {
  RelayConfig base;
  double offset_lo = 0.0;  ///< T_0i drawn uniformly in [offset_lo, offset_hi]
  double offset_hi = 100e-9;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string out;
};

RelaySpec parse_relay(const std::string& json_text);
RelaySpec load_relay(const std::filesystem::path& path);

/// Gossip matrices from a JSON file {"matrices": [[[...]]], "probabilities": [...]}.
GossipScheme load_matrix_set(const std::filesystem::path& path, const Topology& topology);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace nlos
