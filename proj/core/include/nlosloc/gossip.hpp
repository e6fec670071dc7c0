#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nlosloc/rng.hpp"

namespace nlos {

/// Undirected communication graph over the non-reference nodes, indexed 0..m-1.
class Topology {
 public:
  Topology() = default;
  explicit Topology(std::size_t m) : adjacency_(m) {}

  static Topology complete(std::size_t m);
  /// Hub at index 0.
  static Topology star(std::size_t m);
  static Topology ring(std::size_t m);

  void add_edge(std::size_t a, std::size_t b);
  bool has_edge(std::size_t a, std::size_t b) const;
  std::size_t size() const { return adjacency_.size(); }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  bool connected() const;

 private:
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Mixing weights for one gossip round (rows: receivers).
struct GossipMatrix {
  Eigen::MatrixXd W;
  std::size_t size() const { return static_cast<std::size_t>(W.rows()); }
};

/// Identity except rows i and j, which average the pair.
GossipMatrix pairwise_matrix(std::size_t m, std::size_t i, std::size_t j);

/// Draws an edge uniformly. Throws DisconnectedTopology.
GossipMatrix sample_pairwise_matrix(const Topology& topology, CounterRng& rng);

/// Law of W_n: pairwise gossip over a topology, or a finite set of matrices
/// drawn i.i.d. with given probabilities (loaded from a matrix file).
class GossipScheme {
 public:
  enum class Kind { Pairwise, MatrixSet };

  static GossipScheme pairwise(Topology topology);
  static GossipScheme matrix_set(Topology topology, std::vector<Eigen::MatrixXd> matrices,
                                 std::vector<double> probabilities = {});

  Kind kind() const { return kind_; }
  const Topology& topology() const { return topology_; }
  std::size_t size() const { return topology_.size(); }

  GossipMatrix sample(CounterRng& rng) const;
  /// Every outcome of W_n with its probability.
  std::vector<std::pair<double, Eigen::MatrixXd>> outcomes() const;

 private:
  Kind kind_ = Kind::Pairwise;
  Topology topology_;
  std::vector<Eigen::MatrixXd> matrices_;
  std::vector<double> probabilities_;
};

struct GossipAssumptionReport {
  bool nonnegative_ok = false;
  bool adjacency_ok = false;        ///< zero weight outside the graph
  bool row_ok = false;              ///< W 1 = 1 for every outcome
  bool col_expect_ok = false;       ///< E[W]^T 1 = 1 (sampled, within 3 standard errors)
  double rho = 0.0;                 ///< exact spectral norm of E[W^T (I - 11^T/m) W]
  double rho_sampled = 0.0;         ///< Monte-Carlo estimate of the same quantity
  bool rho_ok = false;
  Eigen::VectorXd col_sum_mean;     ///< sampled mean column sums of W
  Eigen::VectorXd col_sum_stderr;
  int n_samples = 0;
};

/// Checks the mixing-matrix assumptions: exact enumeration for rho and
/// row sums, Monte-Carlo sampling for the expected column sums.
GossipAssumptionReport validate_weight_assumptions(const GossipScheme& scheme, int n_samples,
                                                   std::uint64_t seed);

}  // namespace nlos
