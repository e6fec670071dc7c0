#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "nlosloc/likelihood.hpp"

namespace nlos {

struct ScalarMax {
  double arg = 0.0;
  double value = -std::numeric_limits<double>::infinity();
};

/// Uniform grid over [lo, hi] followed by golden-section refinement around the
/// best grid point. `f` may return -inf for infeasible arguments.
template <class F>
ScalarMax maximize_on_interval(F&& f, double lo, double hi, int grid = 256, int golden_steps = 40) {
  ScalarMax best;
  if (!(hi > lo) || grid < 2) {
    best.arg = lo;
    best.value = f(lo);
    return best;
  }
  const double h = (hi - lo) / (grid - 1);
  for (int k = 0; k < grid; ++k) {
    const double t = k == grid - 1 ? hi : lo + k * h;
    const double v = f(t);
    if (v > best.value) best = {t, v};
  }
  if (best.value == -std::numeric_limits<double>::infinity()) {
    best.arg = lo;
    return best;
  }

  constexpr double kInvPhi = 0.6180339887498949;
  double a = std::max(lo, best.arg - h);
  double b = std::min(hi, best.arg + h);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < golden_steps; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
    if (fc > best.value) best = {c, fc};
    if (fd > best.value) best = {d, fd};
  }
  return best;
}

/// q^T U q - 2 V^T q.
double quadratic_value(const QuadraticForm& f, const Vec2& q);

struct QuadraticMax {
  Vec2 q = Vec2::Zero();
  bool singular = false;        ///< U not negative definite; q is the fallback
  bool constrained = false;     ///< unconstrained maximizer was infeasible
};

/// Maximizes q^T U q - 2 V^T q over a feasible set. The closed form U q = V is
/// used when feasible; otherwise projected gradient ascent with backtracking
/// starts from the better of project(q*) and `fallback`. Singular U (largest
/// eigenvalue >= -1e-10) leaves `fallback` unchanged.
QuadraticMax maximize_quadratic(const QuadraticForm& f,
                                const std::function<bool(const Vec2&)>& feasible,
                                const std::function<Vec2(const Vec2&)>& project,
                                const Vec2& fallback, int pga_steps = 200);

/// Dykstra's alternating projections onto an intersection of sectors.
Vec2 project_onto_intersection(const std::vector<Wedge>& wedges, const Vec2& x,
                               int iterations = 200);

}  // namespace nlos
