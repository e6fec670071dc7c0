#include "nlosloc/optim.hpp"

#include <Eigen/Eigenvalues>

namespace nlos {

double quadratic_value(const QuadraticForm& f, const Vec2& q) {
  return q.dot(f.U * q) - 2.0 * f.V.dot(q);
}

QuadraticMax maximize_quadratic(const QuadraticForm& f,
                                const std::function<bool(const Vec2&)>& feasible,
                                const std::function<Vec2(const Vec2&)>& project,
                                const Vec2& fallback, int pga_steps) {
  QuadraticMax out;
  out.q = fallback;
  const Eigen::Matrix2d U = 0.5 * (f.U + f.U.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(U);
  const Vec2 lambda = eig.eigenvalues();
  if (!(lambda.maxCoeff() < -1e-10) || !U.allFinite() || !f.V.allFinite()) {
    out.singular = true;
    return out;
  }
  const Vec2 q_star = U.ldlt().solve(f.V);
  if (feasible(q_star)) {
    out.q = q_star;
    return out;
  }
  out.constrained = true;

  const QuadraticForm g{U, f.V};
  Vec2 q = project(q_star);
  double value = feasible(q) ? quadratic_value(g, q) : -std::numeric_limits<double>::infinity();
  if (feasible(fallback) && quadratic_value(g, fallback) > value) {
    q = fallback;
    value = quadratic_value(g, fallback);
  }
  if (value == -std::numeric_limits<double>::infinity()) {
    out.q = q;
    return out;
  }

  const double lipschitz = 2.0 * std::abs(lambda.minCoeff());
  double step = 2.0 / lipschitz;
  for (int it = 0; it < pga_steps; ++it) {
    const Vec2 grad = 2.0 * (U * q - f.V);
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec2 y = project(q + step * grad);
      if (feasible(y)) {
        const double vy = quadratic_value(g, y);
        if (vy > value) {
          moved = (y - q).norm() > 1e-12 * (1.0 + q.norm());
          q = y;
          value = vy;
          step *= 1.5;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  out.q = q;
  return out;
}

Vec2 project_onto_intersection(const std::vector<Wedge>& wedges, const Vec2& x, int iterations) {
  if (wedges.empty()) return x;
  if (wedges.size() == 1) return wedges.front().project(x);
  std::vector<Vec2> corrections(wedges.size(), Vec2::Zero());
  Vec2 y = x;
  for (int it = 0; it < iterations; ++it) {
    const Vec2 before = y;
    for (std::size_t k = 0; k < wedges.size(); ++k) {
      const Vec2 z = y + corrections[k];
      const Vec2 p = wedges[k].project(z);
      corrections[k] = z - p;
      y = p;
    }
    if ((y - before).norm() < 1e-12 * (1.0 + y.norm())) break;
  }
  return y;
}

}  // namespace nlos
