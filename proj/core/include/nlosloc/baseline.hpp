#pragma once

#include <vector>

#include "nlosloc/model.hpp"

namespace nlos {

struct TdoaOnlyConfig {
  double delta = 1e-4;     ///< weight of the d1^2 regularizer
  int grid_xy = 128;       ///< spatial grid per axis
  int grid_d1 = 64;        ///< reference-path slack values per cell
  double inflate = 0.5;    ///< bounding box of the nodes grown by this fraction
  int refine_steps = 100;  ///< Nelder-Mead iterations

  /// Throws ConfigError.
  void validate() const;
};

struct TdoaOnlyResult {
  Vec2 q = Vec2::Zero();
  double d1 = 0.0;
  std::vector<double> d;  ///< d_i per node, d[0] = d1
  double objective = 0.0;
};

/// Inner optimum for fixed (q, d1): d_i = max(|q - p_i|, d1 + d~_i1).
std::vector<double> inner_path_lengths(const std::vector<Node>& nodes, const std::vector<double>& tdoa,
                                       const Vec2& q, double d1);

/// sum_{i>=2} ((d_i - d1 - d~_i1) / sigma_i)^2 + delta d1^2 with the inner optimum
/// plugged in. +inf when d1 < |q - p_1|.
double tdoa_only_objective(const std::vector<Node>& nodes, const std::vector<double>& tdoa,
                           const Vec2& q, double d1, double delta);

/// Grid over (q, d1 - |q - p_1|) followed by Nelder-Mead. Throws Underdetermined
/// with fewer than three nodes.
TdoaOnlyResult solve_tdoa_only(const std::vector<Node>& nodes, const std::vector<double>& tdoa,
                               const TdoaOnlyConfig& config = {});

}  // namespace nlos
