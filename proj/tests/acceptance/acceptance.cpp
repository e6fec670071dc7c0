// Acceptance checks. One line per criterion: "<id> PASS|FAIL <details>".
// Usage: acceptance [AC1 AC2 ...]; no arguments runs everything. Exit code 1
// if any selected criterion fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <algorithm>
#include <vector>

#include "fixtures.hpp"
#include "nlosloc/em_centralized.hpp"
#include "nlosloc/em_distributed.hpp"
#include "nlosloc/harness.hpp"
#include "nlosloc/optim.hpp"

using namespace nlos;

namespace {

struct Outcome {
  bool pass = false;
  std::string details;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Noiseless data, true orientations in every support set, no AOA box.
// sigma is small but positive: the likelihood needs sigma > 0.
Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_c = 0, worst_d = 0, worst_dis = 0, worst_spread = 0;
  int dist_converged = 0;
  const int n = 20;
  for (int g = 0; g < n; ++g) {
    const Scenario s = fixture::random_scenario(10000 + g, 5, 0.1, 5.0, 0.0);
    const Problem p = make_problem(s, synthesize_measurements(s, 1, NoiseModel::noiseless()));
    const EMResult c = multi_start(p, 1, g);
    worst_c = std::max(worst_c, (c.x_hat.q - s.target).norm());
    DistSolveOptions opts;
    opts.em.seed = g;
    opts.em.record_trajectories = false;
    const DistSolveResult d =
        solve_distributed(p, GossipScheme::pairwise(Topology::complete(p.size() - 1)), StepSchedule(1.0, 0.7), opts);
    dist_converged += d.best.converged;
    for (const NodeState& st : d.best.final_states) {
      worst_d = std::max(worst_d, (st.q - s.target).norm());
      for (const NodeState& o : d.best.final_states) worst_spread = std::max(worst_spread, (st.q - o.q).norm());
    }
    worst_dis = std::max(worst_dis, d.best.disagreement_trace.back());
  }
  const double t = seconds_since(t0);
  const bool pass = worst_c < 1e-3 && worst_d < 0.1 && worst_spread < 0.1 && worst_dis < 1e-2 && t < 10.0;
  return {pass, fmt("geometries=%d centralized_max_err_m=%.3g distributed_max_err_m=%.3g node_spread_m=%.3g "
                    "max_disagreement=%.3g distributed_converged=%d/%d time_s=%.1f (limits 1e-3, 0.1, 0.1, 1e-2, 10 s)",
                    n, worst_c, worst_d, worst_spread, worst_dis, dist_converged, n, t)};
}

// Jittered starts outside every feasible wedge have K = -inf, where ascent
// means nothing; they are redrawn and counted.
Outcome ac2() {
  int runs = 0, violations = 0, rejected = 0;
  double worst_drop = 0;
  for (int k = 0; k < 100; ++k) {
    const Scenario s = fixture::random_scenario(20000 + k, 5, 10.0, 5.0, deg_to_rad(7));
    const Problem p = make_problem(s, synthesize_measurements(s, k));
    ParamEstimate x0;
    for (std::uint64_t start = 0;; ++start) {
      x0 = clamp_to_boxes(p, initial_estimate(p, k, start));
      if (std::isfinite(observed_loglik_K(p, x0))) break;
      ++rejected;
    }
    const EMResult r = run(p, x0);
    ++runs;
    bool ok = true;
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i) {
      const double drop = r.loglik_trace[i - 1] - r.loglik_trace[i];
      worst_drop = std::max(worst_drop, drop);
      ok = ok && drop <= 1e-9;
    }
    violations += !ok;
  }
  return {violations == 0, fmt("runs=%d violating_runs=%d largest_decrease=%.3g (slack 1e-9) infeasible_starts_redrawn=%d",
                               runs, violations, worst_drop, rejected)};
}

// Relative to the larger log-likelihood magnitude, as differences can cancel.
Outcome ac3() {
  CounterRng r(3, 30000);
  double worst_s = 0, worst_t = 0;
  const int n = 1000;
  for (int k = 0; k < n; ++k) {
    const NodeObservation z = fixture::random_observation(r);
    const double gi = r.uniform(0, kTwoPi);
    const double thi = fixture::safe_angle_near(r, gi);
    const double th1 = fixture::safe_angle_near(r, z.reference.gamma);
    const Vec2 qa(r.uniform(-300, 300), r.uniform(-300, 300)), qb(r.uniform(-300, 300), r.uniform(-300, 300));
    const double la = local_loglik(z, qa, th1, thi, gi), lb = local_loglik(z, qb, th1, thi, gi);
    const double rs = statistic_S(z, th1, thi, gi).dot(basis_phi1(qa) - basis_phi1(qb));
    worst_s = std::max(worst_s, std::abs((la - lb) - rs) / std::max({std::abs(la), std::abs(lb), 1e-12}));
  }
  for (int k = 0; k < n; ++k) {
    const NodeObservation z = fixture::random_observation(r);
    const double gi = r.uniform(0, kTwoPi);
    const double thi = fixture::safe_angle_near(r, gi);
    const double ta = fixture::safe_angle_near(r, z.reference.gamma);
    const double tb = fixture::safe_angle_near(r, z.reference.gamma);
    const Vec2 q(r.uniform(-300, 300), r.uniform(-300, 300));
    const double la = local_loglik(z, q, ta, thi, gi), lb = local_loglik(z, q, tb, thi, gi);
    const double rt = statistic_T(z, q, thi, gi).dot(basis_phi2(ta, z.reference.gamma) - basis_phi2(tb, z.reference.gamma));
    worst_t = std::max(worst_t, std::abs((la - lb) - rt) / std::max({std::abs(la), std::abs(lb), 1e-12}));
  }
  return {worst_s <= 1e-8 && worst_t <= 1e-8,
          fmt("instances=%d+%d max_rel_err_S=%.3g max_rel_err_T=%.3g (limit 1e-8)", n, n, worst_s, worst_t)};
}

Outcome ac4() {
  bool all = true;
  double worst_rho = 0, worst_cons = 0, worst_col_se = 0;
  int configs = 0;
  std::ostringstream bad;
  for (const char* kind : {"complete", "star", "ring"})
    for (std::size_t m = 3; m <= 8; ++m) {
      const std::string k = kind;
      const Topology t = k == "complete" ? Topology::complete(m) : k == "star" ? Topology::star(m) : Topology::ring(m);
      const GossipScheme scheme = GossipScheme::pairwise(t);
      const GossipAssumptionReport rep = validate_weight_assumptions(scheme, 10000, 40000 + m);
      // Exact row sums on the sampled matrices themselves.
      CounterRng rng(41, m);
      bool rows_exact = true;
      double cons = 0;
      std::vector<NodeState> st(m);
      for (auto& s : st) {
        for (int j = 0; j < 6; ++j) s.stat.s[j] = rng.uniform(-100, 100);
        s.stat.t = Vec2(rng.uniform(-100, 100), rng.uniform(-100, 100));
      }
      for (int round = 0; round < 1000; ++round) {
        const GossipMatrix W = scheme.sample(rng);
        for (Eigen::Index i = 0; i < W.W.rows(); ++i) rows_exact = rows_exact && W.W.row(i).sum() == 1.0;
        Vec6 before = Vec6::Zero();
        for (const auto& s : st) before += s.stat.s;
        gossip_round(st, W);
        Vec6 after = Vec6::Zero();
        for (const auto& s : st) after += s.stat.s;
        cons = std::max(cons, (after - before).cwiseAbs().maxCoeff() / std::max(1.0, before.cwiseAbs().maxCoeff()));
      }
      double col_se = 0;
      for (Eigen::Index j = 0; j < rep.col_sum_mean.size(); ++j)
        if (rep.col_sum_stderr(j) > 0) col_se = std::max(col_se, std::abs(rep.col_sum_mean(j) - 1) / rep.col_sum_stderr(j));
      const bool ok = rows_exact && rep.row_ok && rep.col_expect_ok && rep.rho_ok && rep.rho < 1 && cons <= 1e-12;
      if (!ok) bad << ' ' << kind << m;
      all = all && ok;
      worst_rho = std::max(worst_rho, rep.rho);
      worst_cons = std::max(worst_cons, cons);
      worst_col_se = std::max(worst_col_se, col_se);
      ++configs;
    }
  return {all, fmt("topologies=%d max_rho=%.4f max_colsum_dev_in_se=%.2f max_rel_conservation_err=%.3g failing=[%s]",
                   configs, worst_rho, worst_col_se, worst_cons, bad.str().c_str())};
}

Outcome ac5() {
  const ScenarioConfig cfg = default_layout(10.0, 7.0);
  const int trials = 100;
  std::atomic<int> reached{0}, converged{0}, diverged{0};
  parallel_for(trials, workers(), [&](int t) {
    const std::uint64_t seed = substream_seed(50000, static_cast<std::uint64_t>(t));
    const Problem p = make_problem(cfg.scenario, synthesize_measurements(cfg.scenario, seed, cfg.noise));
    DistSolveOptions opts = cfg.estimators.dist;
    opts.em.seed = seed;
    opts.em.record_trajectories = false;
    const DistSolveResult r = solve_distributed(p, cfg.gossip, cfg.estimators.schedule, opts);
    reached += r.best.disagreement_trace.back() < 1e-2 && r.best.iterations <= 2000;
    converged += r.best.converged;
    diverged += r.best.diverged;
  });
  const double frac = static_cast<double>(reached) / trials;
  return {frac >= 0.9, fmt("trials=%d below_1e-2=%d (%.0f%%, need 90%%) converged=%d non_convergent_fraction=%.2f "
                           "diverged=%d",
                           trials, reached.load(), 100 * frac, converged.load(),
                           1.0 - static_cast<double>(converged) / trials, diverged.load())};
}

Outcome ac6() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = default_layout(10.0, 7.0);
  const std::vector<Estimator> ests = {Estimator::Centralized, Estimator::Distributed, Estimator::TdoaOnly};
  const int trials = 200;
  const auto recs = run_trials(cfg, ests, trials, 60000, workers());
  const SweepRow c = summarize(recs, Estimator::Centralized, 0), d = summarize(recs, Estimator::Distributed, 0),
                 b = summarize(recs, Estimator::TdoaOnly, 0);
  const double t = seconds_since(t0);
  const bool pass = c.rmse_m < b.rmse_m && d.rmse_m <= 1.5 * c.rmse_m && t < 300.0;
  return {pass, fmt("trials=%d rmse_centralized=%.2f rmse_distributed=%.2f rmse_tdoa_only=%.2f distributed/centralized="
                    "%.2f converged c/d/t=%d/%d/%d time_s=%.0f (limit 300)",
                    trials, c.rmse_m, d.rmse_m, b.rmse_m, d.rmse_m / c.rmse_m, c.converged, d.converged, b.converged,
                    t)};
}

Outcome ac7() {
  const auto recs = replicate_experiment_synthetic(70000, 10, workers(), {Estimator::Distributed});
  const double band = fraction_below(recs, Estimator::Distributed, SupportMode::Band, 15.0);
  const double list = fraction_below(recs, Estimator::Distributed, SupportMode::List, 15.0);
  int conv_band = 0, conv_list = 0, total = 0;
  for (const ReplicaRecord& r : recs) {
    ++total;
    if (r.record.converged && !r.record.failed) (r.mode == SupportMode::Band ? conv_band : conv_list)++;
  }
  // 90% is the target; the criterion tolerates down to 85%.
  const bool pass = band >= 0.85 && list >= 0.85;
  return {pass, fmt("below_15m band=%.3f (converged %d/%d) list=%.3f (converged %d/%d) target=0.90 pass_at=0.85", band,
                    conv_band, total / 2, list, conv_list, total / 2)};
}

Outcome ac8() {
  const auto t0 = std::chrono::steady_clock::now();
  RelaySpec spec = load_relay(std::string(NLOSLOC_CONFIG_DIR) + "/table2.json");
  spec.trials = 100;
  const RelayResult r = run_relay_trials(spec, workers());
  const double t = seconds_since(t0);
  const double quantum = spec.base.c0 * spec.base.sample_period / spec.base.oversample;
  const bool pass = r.failures == 0 && r.max_variation_m <= quantum && r.max_abs_error_m <= 3.0 && t < 30.0;
  return {pass, fmt("draws=%d failures=%d max_variation_m=%.3f (limit %.3f) max_error_m=%.3f (limit 3) time_s=%.1f "
                    "(limit 30)",
                    spec.trials, r.failures, r.max_variation_m, quantum, r.max_abs_error_m, t)};
}

// Random valid statistics on random local geometries; each of the three
// maximizations is compared with a brute-force grid over its own domain.
// Locations are compared only where the argmax is unambiguous: q away from
// wedge corners (finer than the grid), theta_i when its maximum is unique.
Outcome ac9() {
  CounterRng r(9, 90000);
  int q_ok = 0, q_loc = 0, t1_ok = 0, ti_ok = 0, ti_checked = 0;
  const int instances = 200;
  for (int k = 0; k < instances; ++k) {
    const Scenario s = fixture::random_scenario(90000 + k, 3, 10.0, 5.0, deg_to_rad(7));
    const Problem p = make_problem(s, synthesize_measurements(s, k));
    const LocalProblem lp = local_problem(p, 1);
    NodeState st;
    st.node_id = p.nodes[1].id;
    st.index = 1;
    st.theta1 = p.measurements.aoa[0];
    st.theta_i = p.measurements.aoa[1];
    st.q = s.target;
    // Negative definite U with its peak near the target, t with a negative
    // quadratic coefficient.
    Eigen::Matrix2d A;
    A << r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1);
    const Eigen::Matrix2d U = -(A * A.transpose() + 0.05 * Eigen::Matrix2d::Identity());
    const Vec2 centre = s.target + Vec2(r.uniform(-30, 30), r.uniform(-30, 30));
    st.stat.s = pack_quadratic(U, U * centre);
    st.stat.t = Vec2(-r.uniform(0.5, 2), r.uniform(-4, 4));
    const Posterior rho = local_expectation(st, lp).rho;
    const LocalMStepResult m = local_m_step(st, lp, rho);

    {
      const QuadraticForm f = unpack_quadratic(st.stat.s);
      std::vector<Wedge> wedges;
      for (double g : lp.support.angles)
        if (try_steering_vector(st.theta_i, g)) wedges.push_back(Wedge::from_path(lp.z.position, st.theta_i, g));
      auto feasible = [&](const Vec2& q) {
        for (const Wedge& w : wedges)
          if (w.contains(q)) return true;
        return false;
      };
      const double half = 80, h = 2 * half / 500;
      double best = kLogZero;
      Vec2 arg = Vec2::Zero();
      for (int a = 0; a <= 500; ++a)
        for (int b = 0; b <= 500; ++b) {
          const Vec2 q = s.target + Vec2(-half + a * h, -half + b * h);
          if (!feasible(q)) continue;
          const double v = quadratic_value(f, q);
          if (v > best) best = v, arg = q;
        }
      bool ok = feasible(m.q) && quadratic_value(f, m.q) >= best - 1e-9 * (1 + std::abs(best));
      bool interior = true;
      for (const Vec2& d : {Vec2(h, 0), Vec2(-h, 0), Vec2(0, h), Vec2(0, -h)}) interior = interior && feasible(m.q + d);
      if (interior && (m.q - s.target).cwiseAbs().maxCoeff() < half - h) {
        ++q_loc;
        ok = ok && (m.q - arg).norm() <= 2 * h;
      }
      q_ok += ok;
    }
    const int n = 10000;
    {
      const double h = (lp.theta1_hi - lp.theta1_lo) / (n - 1);
      double best = kLogZero, arg = lp.theta1_lo;
      for (int j = 0; j < n; ++j) {
        const double th = lp.theta1_lo + j * h;
        const double u = 1 / std::cos(th - lp.z.reference.gamma);
        const double v = st.stat.t.x() * u * u + st.stat.t.y() * u;
        if (v > best) best = v, arg = th;
      }
      // The peak at u = 1 is quartic-flat, so doubles resolve it to ~1e-4 rad.
      t1_ok += std::abs(m.theta1 - arg) <= std::max(2 * h, 1e-3);
    }
    {
      const double h = (lp.theta_hi - lp.theta_lo) / (n - 1);
      double best = kLogZero, arg = 0;
      for (int j = 0; j < n; ++j) {
        const double th = lp.theta_lo + j * h;
        const double v = expected_local_loglik(lp.z, lp.support, rho.weights, m.q, m.theta1, th);
        if (v > best) best = v, arg = th;
      }
      if (best > kLogZero && check_mstep_uniqueness(st, lp, rho).theta_i_unique) {
        ++ti_checked;
        ti_ok += std::abs(m.theta_i - arg) <= 2 * h;
      }
    }
  }
  const bool pass = q_ok == instances && t1_ok == instances && ti_ok == ti_checked && ti_checked > 0;
  return {pass, fmt("instances=%d q_match=%d/%d (location checked %d) theta1_match=%d/%d theta_i_match=%d/%d "
                    "(unique maxima)",
                    instances, q_ok, instances, q_loc, t1_ok, instances, ti_ok, ti_checked)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}};
  std::vector<std::string> selected(argv + 1, argv + argc);
  bool ok = true;
  int ran = 0;
  for (const auto& [id, fn] : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s %s [%.1f s]\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.details.c_str(), seconds_since(t0));
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion; expected AC1..AC9\n");
    return 2;
  }
  return ok ? 0 : 1;
}
