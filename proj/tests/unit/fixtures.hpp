#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nlosloc/angles.hpp"
#include "nlosloc/likelihood.hpp"
#include "nlosloc/model.hpp"
#include "nlosloc/rng.hpp"

namespace nlos::fixture {

/// Nodes on a jittered ring around a random target, every path a single
/// bounce with 5..35 deg arrival/departure offsets of a random sense. Band
/// supports (+/-10 deg, `step_deg` apart) around the true orientation, or a
/// 4-angle list containing it when step_deg <= 0.
inline Scenario random_scenario(std::uint64_t seed, int n_nodes = 5, double sigma = 1.0, double step_deg = 5.0,
                                double eta0 = 0.0) {
  CounterRng r(seed, 77);
  Scenario s;
  s.target = {r.uniform(100, 300), r.uniform(100, 300)};
  for (int i = 0; i < n_nodes; ++i) {
    Node n;
    n.id = i + 1;
    n.sigma = sigma;
    n.is_reference = i == 0;
    const double ang = kTwoPi * i / n_nodes + r.uniform(-0.3, 0.3);
    const double rad = r.uniform(150, 250);
    n.position = s.target + rad * Vec2(std::cos(ang), std::sin(ang));
    s.nodes.push_back(n);
    const double sense = r.uniform() < 0.5 ? -1.0 : 1.0;
    s.paths.push_back(path_from_offsets(s.target, n.position, sense * deg_to_rad(r.uniform(5, 35)),
                                        sense * deg_to_rad(r.uniform(5, 35))));
  }
  s.gamma1 = s.paths[0].gamma;
  s.eta0 = eta0;
  s.supports.push_back(ScattererSupport::uniform({s.gamma1}));
  for (int i = 1; i < n_nodes; ++i) {
    const double g = s.paths[i].gamma;
    if (step_deg > 0)
      s.supports.push_back(ScattererSupport::band(g, deg_to_rad(10), deg_to_rad(step_deg)));
    else
      s.supports.push_back(
          ScattererSupport::uniform({g, wrap_2pi(g + deg_to_rad(45)), wrap_2pi(g + deg_to_rad(90)),
                                     wrap_2pi(g + deg_to_rad(135))}));
  }
  s.validate();
  return s;
}

/// Random node observation with a non-singular random geometry.
inline NodeObservation random_observation(CounterRng& r) {
  NodeObservation z;
  z.position = {r.uniform(-200, 200), r.uniform(-200, 200)};
  z.sigma = r.uniform(0.5, 20);
  z.tdoa = r.uniform(-100, 100);
  z.aoa = r.uniform(0, kTwoPi);
  z.reference.position = {r.uniform(-200, 200), r.uniform(-200, 200)};
  z.reference.gamma = r.uniform(0, kTwoPi);
  z.reference.aoa = r.uniform(0, kTwoPi);
  return z;
}

/// Angle whose cosine offset from `gamma` stays well away from +/-pi/2.
inline double safe_angle_near(CounterRng& r, double gamma, double max_offset = 1.2) {
  return gamma + r.uniform(-max_offset, max_offset);
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), abs_floor});
}

}  // namespace nlos::fixture
