#include "nlosloc/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "nlosloc/errors.hpp"

namespace nlos {

Topology Topology::complete(std::size_t m) {
  Topology t(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) t.add_edge(i, j);
  return t;
}

Topology Topology::star(std::size_t m) {
  Topology t(m);
  for (std::size_t i = 1; i < m; ++i) t.add_edge(0, i);
  return t;
}

Topology Topology::ring(std::size_t m) {
  Topology t(m);
  if (m == 2) t.add_edge(0, 1);
  if (m > 2)
    for (std::size_t i = 0; i < m; ++i) t.add_edge(i, (i + 1) % m);
  return t;
}

void Topology::add_edge(std::size_t a, std::size_t b) {
  if (a >= size() || b >= size() || a == b) throw ConfigError("invalid topology edge");
  if (has_edge(a, b)) return;
  adjacency_[a].push_back(b);
  adjacency_[b].push_back(a);
  std::sort(adjacency_[a].begin(), adjacency_[a].end());
  std::sort(adjacency_[b].begin(), adjacency_[b].end());
}

bool Topology::has_edge(std::size_t a, std::size_t b) const {
  const auto& nb = adjacency_[a];
  return std::binary_search(nb.begin(), nb.end(), b);
}

std::vector<std::pair<std::size_t, std::size_t>> Topology::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j : adjacency_[i])
      if (i < j) out.emplace_back(i, j);
  return out;
}

bool Topology::connected() const {
  if (size() <= 1) return true;
  std::vector<bool> seen(size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w : adjacency_[v])
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
  }
  return count == size();
}

GossipMatrix pairwise_matrix(std::size_t m, std::size_t i, std::size_t j) {
  GossipMatrix g{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))};
  const auto a = static_cast<Eigen::Index>(i);
  const auto b = static_cast<Eigen::Index>(j);
  g.W(a, a) = 0.5;
  g.W(a, b) = 0.5;
  g.W(b, a) = 0.5;
  g.W(b, b) = 0.5;
  return g;
}

GossipMatrix sample_pairwise_matrix(const Topology& topology, CounterRng& rng) {
  if (!topology.connected()) throw DisconnectedTopology("gossip topology is not connected");
  const auto edges = topology.edges();
  if (edges.empty()) {
    const auto m = static_cast<Eigen::Index>(topology.size());
    return GossipMatrix{Eigen::MatrixXd::Identity(m, m)};
  }
  const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(edges.size()));
  const auto& e = edges[std::min(k, edges.size() - 1)];
  return pairwise_matrix(topology.size(), e.first, e.second);
}

GossipScheme GossipScheme::pairwise(Topology topology) {
  if (!topology.connected()) throw DisconnectedTopology("gossip topology is not connected");
  GossipScheme s;
  s.kind_ = Kind::Pairwise;
  s.topology_ = std::move(topology);
  return s;
}

GossipScheme GossipScheme::matrix_set(Topology topology, std::vector<Eigen::MatrixXd> matrices,
                                      std::vector<double> probabilities) {
  if (matrices.empty()) throw ConfigError("matrix gossip scheme needs at least one matrix");
  const auto m = static_cast<Eigen::Index>(topology.size());
  for (const auto& w : matrices)
    if (w.rows() != m || w.cols() != m) throw ConfigError("gossip matrix has the wrong dimension");
  if (probabilities.empty()) probabilities.assign(matrices.size(), 1.0 / static_cast<double>(matrices.size()));
  if (probabilities.size() != matrices.size()) throw ConfigError("gossip probabilities mis-sized");
  const double total = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("gossip probabilities do not sum to 1");
  GossipScheme s;
  s.kind_ = Kind::MatrixSet;
  s.topology_ = std::move(topology);
  s.matrices_ = std::move(matrices);
  s.probabilities_ = std::move(probabilities);
  return s;
}

GossipMatrix GossipScheme::sample(CounterRng& rng) const {
  if (kind_ == Kind::Pairwise) return sample_pairwise_matrix(topology_, rng);
  double u = rng.uniform();
  for (std::size_t k = 0; k < matrices_.size(); ++k) {
    if (u < probabilities_[k] || k + 1 == matrices_.size()) return GossipMatrix{matrices_[k]};
    u -= probabilities_[k];
  }
  return GossipMatrix{matrices_.back()};
}

std::vector<std::pair<double, Eigen::MatrixXd>> GossipScheme::outcomes() const {
  std::vector<std::pair<double, Eigen::MatrixXd>> out;
  if (kind_ == Kind::Pairwise) {
    const auto edges = topology_.edges();
    for (const auto& e : edges)
      out.emplace_back(1.0 / static_cast<double>(edges.size()),
                       pairwise_matrix(size(), e.first, e.second).W);
    return out;
  }
  for (std::size_t k = 0; k < matrices_.size(); ++k) out.emplace_back(probabilities_[k], matrices_[k]);
  return out;
}

GossipAssumptionReport validate_weight_assumptions(const GossipScheme& scheme, int n_samples,
                                                   std::uint64_t seed) {
  const auto m = static_cast<Eigen::Index>(scheme.size());
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  auto spectral_norm = [](const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
  };

  GossipAssumptionReport rep;
  rep.n_samples = n_samples;
  rep.nonnegative_ok = true;
  rep.adjacency_ok = true;
  rep.row_ok = true;
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(m, m);
  const Topology& topo = scheme.topology();
  for (const auto& [p, w] : scheme.outcomes()) {
    if ((w.array() < 0.0).any()) rep.nonnegative_ok = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::abs(w.row(i).sum() - 1.0) > 1e-12) rep.row_ok = false;
      for (Eigen::Index j = 0; j < m; ++j)
        if (i != j && w(i, j) != 0.0 &&
            !topo.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
          rep.adjacency_ok = false;
    }
    expected += p * (w.transpose() * centering * w);
  }
  rep.rho = spectral_norm(expected);
  rep.rho_ok = rep.rho < 1.0;

  CounterRng rng(seed, 0x474f53534950ULL);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd sampled = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < n_samples; ++k) {
    const Eigen::MatrixXd w = scheme.sample(rng).W;
    const Eigen::VectorXd cols = w.colwise().sum().transpose();
    sum += cols;
    sum_sq += cols.cwiseProduct(cols);
    sampled += w.transpose() * centering * w;
  }
  const double n = std::max(1, n_samples);
  rep.col_sum_mean = sum / n;
  const Eigen::VectorXd var =
      (sum_sq / n - rep.col_sum_mean.cwiseProduct(rep.col_sum_mean)).cwiseMax(0.0) * (n / std::max(1.0, n - 1.0));
  rep.col_sum_stderr = (var / n).cwiseSqrt();
  rep.col_expect_ok = n_samples > 0;
  for (Eigen::Index j = 0; j < m; ++j)
    if (std::abs(rep.col_sum_mean(j) - 1.0) > std::max(3.0 * rep.col_sum_stderr(j), 1e-12))
      rep.col_expect_ok = false;
  rep.rho_sampled = n_samples > 0 ? spectral_norm(sampled / n) : 0.0;
  return rep;
}

}  // namespace nlos
