#include "nlosloc/baseline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "nlosloc/errors.hpp"

namespace nlos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// d1 written as |q - p1| + e with e >= 0, so every point is feasible.
double slack_objective(const std::vector<Node>& nodes, const std::vector<double>& tdoa,
                       const Vec2& q, double e, double delta) {
  if (e < 0.0) return kInf;
  const double d1 = (q - nodes[0].position).norm() + e;
  double f = delta * d1 * d1;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double r = (q - nodes[i].position).norm() - d1 - tdoa[i];
    if (r > 0.0) f += (r / nodes[i].sigma) * (r / nodes[i].sigma);
  }
  return f;
}

}  // namespace

void TdoaOnlyConfig::validate() const {
  if (!(delta > 0.0)) throw ConfigError("tdoa-only delta must be > 0");
  if (grid_xy < 2 || grid_d1 < 1 || refine_steps < 0 || !(inflate >= 0.0))
    throw ConfigError("invalid tdoa-only grid configuration");
}

std::vector<double> inner_path_lengths(const std::vector<Node>& nodes, const std::vector<double>& tdoa,
                                       const Vec2& q, double d1) {
  std::vector<double> d(nodes.size());
  d[0] = d1;
  for (std::size_t i = 1; i < nodes.size(); ++i)
    d[i] = std::max((q - nodes[i].position).norm(), d1 + tdoa[i]);
  return d;
}

double tdoa_only_objective(const std::vector<Node>& nodes, const std::vector<double>& tdoa,
                           const Vec2& q, double d1, double delta) {
  if (d1 < (q - nodes[0].position).norm()) return kInf;
  const std::vector<double> d = inner_path_lengths(nodes, tdoa, q, d1);
  double f = delta * d1 * d1;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double r = (d[i] - d1 - tdoa[i]) / nodes[i].sigma;
    f += r * r;
  }
  return f;
}

TdoaOnlyResult solve_tdoa_only(const std::vector<Node>& nodes, const std::vector<double>& tdoa,
                               const TdoaOnlyConfig& config) {
  config.validate();
  if (nodes.size() < 3) throw Underdetermined("tdoa-only localization needs at least three nodes");
  if (tdoa.size() != nodes.size()) throw ConfigError("tdoa vector size mismatch");

  Vec2 lo = nodes[0].position, hi = nodes[0].position;
  for (const Node& n : nodes) {
    lo = lo.cwiseMin(n.position);
    hi = hi.cwiseMax(n.position);
  }
  const Vec2 span = (hi - lo).cwiseMax(1.0);
  lo -= 0.5 * config.inflate * span;
  hi += 0.5 * config.inflate * span;
  const Vec2 ext = hi - lo;
  const double e_max = ext.norm();

  std::array<double, 3> best{lo.x(), lo.y(), 0.0};
  double best_f = kInf;
  for (int a = 0; a < config.grid_xy; ++a) {
    for (int b = 0; b < config.grid_xy; ++b) {
      const Vec2 q(lo.x() + ext.x() * a / (config.grid_xy - 1), lo.y() + ext.y() * b / (config.grid_xy - 1));
      for (int k = 0; k < config.grid_d1; ++k) {
        const double e = config.grid_d1 == 1 ? 0.0 : e_max * k / (config.grid_d1 - 1);
        const double f = slack_objective(nodes, tdoa, q, e, config.delta);
        if (f < best_f) {
          best_f = f;
          best = {q.x(), q.y(), e};
        }
      }
    }
  }

  // Nelder-Mead on (x, y, e).
  auto eval = [&](const std::array<double, 3>& v) {
    return slack_objective(nodes, tdoa, Vec2(v[0], v[1]), v[2], config.delta);
  };
  const double hx = ext.x() / (config.grid_xy - 1), hy = ext.y() / (config.grid_xy - 1);
  const double he = config.grid_d1 > 1 ? e_max / (config.grid_d1 - 1) : 1.0;
  std::array<std::array<double, 3>, 4> simplex{best, best, best, best};
  simplex[1][0] += hx;
  simplex[2][1] += hy;
  simplex[3][2] += he;
  std::array<double, 4> fs{};
  for (int i = 0; i < 4; ++i) fs[i] = eval(simplex[i]);

  for (int it = 0; it < config.refine_steps; ++it) {
    std::array<int, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::array<std::array<double, 3>, 4> s2;
    std::array<double, 4> f2;
    for (int i = 0; i < 4; ++i) {
      s2[i] = simplex[order[i]];
      f2[i] = fs[order[i]];
    }
    simplex = s2;
    fs = f2;
    std::array<double, 3> c{0, 0, 0};
    for (int i = 0; i < 3; ++i)
      for (int d = 0; d < 3; ++d) c[d] += simplex[i][d] / 3.0;
    auto along = [&](double t) {
      std::array<double, 3> v;
      for (int d = 0; d < 3; ++d) v[d] = c[d] + t * (simplex[3][d] - c[d]);
      return v;
    };
    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[3] = xe;
        fs[3] = fe;
      } else {
        simplex[3] = xr;
        fs[3] = fr;
      }
    } else if (fr < fs[2]) {
      simplex[3] = xr;
      fs[3] = fr;
    } else {
      const auto xc = fr < fs[3] ? along(-0.5) : along(0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[3])) {
        simplex[3] = xc;
        fs[3] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          for (int d = 0; d < 3; ++d) simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
          fs[i] = eval(simplex[i]);
        }
      }
    }
  }
  int arg = 0;
  for (int i = 1; i < 4; ++i)
    if (fs[i] < fs[arg]) arg = i;
  if (fs[arg] < best_f) {
    best = simplex[arg];
    best_f = fs[arg];
  }

  TdoaOnlyResult out;
  out.q = Vec2(best[0], best[1]);
  out.d1 = (out.q - nodes[0].position).norm() + best[2];
  out.d = inner_path_lengths(nodes, tdoa, out.q, out.d1);
  out.objective = tdoa_only_objective(nodes, tdoa, out.q, out.d1, config.delta);
  return out;
}

}  // namespace nlos
