#include "nlosloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "nlosloc/angles.hpp"
#include "nlosloc/baseline.hpp"
#include "nlosloc/errors.hpp"
#include "nlosloc/rng.hpp"

namespace nlos {

namespace {

constexpr std::uint64_t kTrialStream = 0x545249414cULL;
constexpr std::uint64_t kRelayStream = 0x52454c4159ULL;

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

double deg_or_m(SweepParameter p, double v) { return p == SweepParameter::Eta0 ? rad_to_deg(v) : v; }

std::string parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::Eta0: return "eta0_deg";
    case SweepParameter::Sigma: return "sigma_m";
    case SweepParameter::None: return "none";
  }
  return "none";
}

// Status strings end up in CSV cells.
std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '"') c = ';';
  return s;
}

}  // namespace

EstimateResult run_estimator(Estimator estimator, const ScenarioConfig& config, const Problem& problem,
                             std::uint64_t seed) {
  EstimateResult out;
  const EstimatorSettings& s = config.estimators;
  switch (estimator) {
    case Estimator::Centralized: {
      const EMResult r = multi_start(problem, s.centralized_starts, seed, s.em);
      out.q = r.x_hat.q;
      out.converged = r.converged;
      out.iterations = r.iterations;
      break;
    }
    case Estimator::Distributed: {
      DistSolveOptions opts = s.dist;
      opts.em.seed = seed;
      opts.em.record_trajectories = false;
      const DistSolveResult r = solve_distributed(problem, config.gossip, s.schedule, opts);
      out.q = r.best.q_consensus;
      out.converged = r.best.converged;
      out.iterations = r.best.iterations;
      break;
    }
    case Estimator::TdoaOnly: {
      const TdoaOnlyResult r = solve_tdoa_only(problem.nodes, problem.measurements.tdoa);
      out.q = r.q;
      out.converged = std::isfinite(r.objective);
      break;
    }
  }
  return out;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<TrialRecord> run_trials(const ScenarioConfig& config, const std::vector<Estimator>& estimators,
                                    int trials, std::uint64_t seed, int parallel, double param_value) {
  const std::size_t ne = estimators.size();
  std::vector<TrialRecord> records(static_cast<std::size_t>(trials) * ne);
  parallel_for(trials, parallel, [&](int t) {
    const std::uint64_t tseed = substream_seed(seed ^ kTrialStream, static_cast<std::uint64_t>(t));
    const MeasurementSet z = synthesize_measurements(config.scenario, tseed, config.noise);
    const Problem problem = make_problem(config.scenario, z);
    for (std::size_t e = 0; e < ne; ++e) {
      TrialRecord& rec = records[static_cast<std::size_t>(t) * ne + e];
      rec.trial = t;
      rec.seed = tseed;
      rec.estimator = estimators[e];
      rec.param_value = param_value;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const EstimateResult r =
            run_estimator(estimators[e], config, problem, substream_seed(tseed, 1 + static_cast<std::uint64_t>(e)));
        rec.q_hat = r.q;
        rec.error_m = (r.q - config.scenario.target).norm();
        rec.converged = r.converged;
        rec.iterations = r.iterations;
        if (!r.converged) rec.status = "not_converged";
      } catch (const Error& ex) {
        rec.failed = true;
        rec.converged = false;
        rec.error_m = std::numeric_limits<double>::quiet_NaN();
        rec.status = csv_safe(ex.what());
      }
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });
  return records;
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& config, SweepParameter parameter, double value) {
  ScenarioConfig c = config;
  if (parameter == SweepParameter::Eta0) {
    c.scenario.eta0 = value;
    c.noise.aoa_width = value;
  } else if (parameter == SweepParameter::Sigma) {
    for (Node& n : c.scenario.nodes) n.sigma = value;
  }
  return c;
}

SweepRow summarize(const std::vector<TrialRecord>& records, Estimator estimator, double value) {
  SweepRow row;
  row.value = value;
  row.estimator = estimator;
  double se = 0.0;
  for (const TrialRecord& r : records) {
    if (r.estimator != estimator) continue;
    ++row.trials;
    if (!r.converged || r.failed) continue;
    ++row.converged;
    se += r.error_m * r.error_m;
  }
  row.convergence_rate = row.trials ? static_cast<double>(row.converged) / row.trials : 0.0;
  row.rmse_m = row.converged ? std::sqrt(se / row.converged) : std::numeric_limits<double>::quiet_NaN();
  return row;
}

SweepResult run_sweep(const SweepSpec& spec, const ScenarioConfig& config, std::uint64_t seed, int parallel) {
  spec.validate();
  SweepResult out;
  std::vector<double> values = spec.values;
  if (spec.parameter == SweepParameter::None) values = {0.0};
  for (double v : values) {
    const ScenarioConfig c = apply_sweep_value(config, spec.parameter, v);
    std::vector<TrialRecord> recs = run_trials(c, spec.estimators, spec.trials, seed, parallel, v);
    for (Estimator e : spec.estimators) out.rows.push_back(summarize(recs, e, deg_or_m(spec.parameter, v)));
    out.trials.insert(out.trials.end(), recs.begin(), recs.end());
  }
  return out;
}

ScenarioConfig default_layout(double sigma_m, double eta0_deg) {
  const Vec2 pos[5] = {{0, 0}, {400, 0}, {400, 300}, {0, 300}, {200, -100}};
  // Signed arrival / departure offsets from the LOS bearing. The reference
  // is nearly LOS; the two northern nodes have large excess path, the rest
  // small, so a TDOA-only fit is pulled south.
  const double offset_deg[5] = {3, -5, 35, -35, 5};
  ScenarioConfig cfg;
  Scenario& s = cfg.scenario;
  s.target = {220, 160};
  for (int i = 0; i < 5; ++i) {
    Node n;
    n.id = i + 1;
    n.position = pos[i];
    n.sigma = sigma_m;
    n.is_reference = i == 0;
    s.nodes.push_back(n);
    s.paths.push_back(path_from_offsets(s.target, pos[i], deg_to_rad(offset_deg[i]), deg_to_rad(offset_deg[i])));
  }
  s.gamma1 = s.paths[0].gamma;
  s.eta0 = deg_to_rad(eta0_deg);
  s.supports.push_back(ScattererSupport::uniform({s.gamma1}));
  for (int i = 1; i < 5; ++i)
    s.supports.push_back(ScattererSupport::band(s.paths[i].gamma, deg_to_rad(10.0), deg_to_rad(5.0)));
  s.validate();
  cfg.noise = NoiseModel::from(s);
  cfg.topology = Topology::complete(4);
  cfg.gossip = GossipScheme::pairwise(cfg.topology);
  cfg.estimators.schedule = StepSchedule(1.0, 1.0);
  return cfg;
}

std::string to_string(SupportMode mode) { return mode == SupportMode::Band ? "band" : "list"; }

ScenarioConfig replica_scenario(int location, SupportMode mode) {
  if (location < 0 || location >= kReplicaLocations) throw ConfigError("replica location out of range");
  // Plan view: measurement building south of y = 0, the facade across the
  // street at y = 40, the corridor along y = -10 running east to the corner
  // at x = 100 where it turns south. Targets walk from x = 20 to 80.
  const double facade_y = 40.0;
  const Vec2 corner(100.0, -10.0);
  ScenarioConfig cfg;
  Scenario& s = cfg.scenario;
  s.target = {20.0 + 5.0 * location, -10.0};

  auto node = [&](int id, Vec2 p, bool ref) {
    Node n;
    n.id = id;
    n.position = p;
    n.sigma = 4.0;
    n.is_reference = ref;
    return n;
  };
  // S3 (reference, behind the corner: its reflector orientation is the one a
  // node can know in advance), S1 (LOS, across the street looking back at
  // the corridor), S2 and S4 (facade bounce). S2 and S4 sit west of every
  // target location so their reflections are oblique (normal incidence is
  // singular). A LOS node along the corridor would leave every non-reference
  // steering vector nearly parallel to the street and the cross-street
  // coordinate poorly determined.
  s.nodes = {node(3, {108.0, -40.0}, true), node(1, {120.0, 20.0}, false), node(2, {-50.0, -2.0}, false),
             node(4, {0.0, -2.0}, false)};
  const auto bounce = [&](const Vec2& p, const Vec2& wall, double gamma) {
    const auto r = reflect_off_wall(s.target, p, wall, gamma);
    if (!r) throw InconsistentScenario("replica geometry has no single bounce");
    return r->path;
  };
  // A LOS path is the single-bounce model with the scatterer parallel to the ray.
  const double los = bearing(s.target - s.nodes[1].position);
  s.paths = {bounce(s.nodes[0].position, corner, deg_to_rad(135.0)), PropagationPath{los, los},
             bounce(s.nodes[2].position, {0.0, facade_y}, 0.0), bounce(s.nodes[3].position, {0.0, facade_y}, 0.0)};
  s.gamma1 = s.paths[0].gamma;
  // Box of two standard deviations of the Gaussian AOA noise.
  s.eta0 = deg_to_rad(6.0);
  s.supports.push_back(ScattererSupport::uniform({s.gamma1}));
  for (std::size_t i = 1; i < s.nodes.size(); ++i) {
    if (mode == SupportMode::Band) {
      s.supports.push_back(ScattererSupport::band(s.paths[i].gamma, deg_to_rad(10.0), deg_to_rad(5.0)));
    } else {
      std::vector<double> angles;
      for (double a : {0.0, 90.0, 135.0, 180.0, 270.0}) angles.push_back(deg_to_rad(a));
      s.supports.push_back(ScattererSupport::uniform(angles));
    }
  }
  s.validate();
  cfg.noise.tdoa_scale = 1.0;
  cfg.noise.tdoa_bias = 1.0;
  cfg.noise.aoa_kind = AoaNoise::Gaussian;
  cfg.noise.aoa_width = deg_to_rad(3.0);
  cfg.topology = Topology::complete(3);
  cfg.gossip = GossipScheme::pairwise(cfg.topology);
  cfg.estimators.schedule = StepSchedule(1.0, 1.0);
  // The likelihood is nearly flat along a ridge here; inflated-sigma stages
  // drift along it, so the distributed solver starts at the nominal sigma.
  cfg.estimators.dist.warmup_start = 0.0;
  return cfg;
}

std::vector<ReplicaRecord> replicate_experiment_synthetic(std::uint64_t seed, int trials_per_location, int parallel,
                                                          std::vector<Estimator> estimators) {
  if (trials_per_location < 1) throw ConfigError("trials per location must be >= 1");
  std::vector<ReplicaRecord> out;
  for (SupportMode mode : {SupportMode::Band, SupportMode::List}) {
    for (int loc = 0; loc < kReplicaLocations; ++loc) {
      const ScenarioConfig cfg = replica_scenario(loc, mode);
      // Same noise draws for both support modes at a location.
      const std::uint64_t lseed = substream_seed(seed, static_cast<std::uint64_t>(loc));
      for (TrialRecord& r : run_trials(cfg, estimators, trials_per_location, lseed, parallel))
        out.push_back(ReplicaRecord{loc, mode, std::move(r)});
    }
  }
  return out;
}

std::vector<CdfPoint> error_cdf(const std::vector<ReplicaRecord>& records) {
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (const ReplicaRecord& r : records)
    if (r.record.converged && !r.record.failed)
      groups[{static_cast<int>(r.record.estimator), static_cast<int>(r.mode)}].push_back(r.record.error_m);
  std::vector<CdfPoint> out;
  for (auto& [key, errors] : groups) {
    std::sort(errors.begin(), errors.end());
    for (std::size_t k = 0; k < errors.size(); ++k)
      out.push_back(CdfPoint{static_cast<Estimator>(key.first), static_cast<SupportMode>(key.second), errors[k],
                             static_cast<double>(k + 1) / static_cast<double>(errors.size())});
  }
  return out;
}

double fraction_below(const std::vector<ReplicaRecord>& records, Estimator estimator, SupportMode mode,
                      double threshold_m) {
  int total = 0, below = 0;
  for (const ReplicaRecord& r : records) {
    if (r.record.estimator != estimator || r.mode != mode || !r.record.converged || r.record.failed) continue;
    ++total;
    below += r.record.error_m < threshold_m;
  }
  return total ? static_cast<double>(below) / total : 0.0;
}

RelayResult run_relay_trials(const RelaySpec& spec, int parallel) {
  spec.base.validate();
  const RelayConfig& base = spec.base;
  const SourceSignal source = generate_source(base.packet_length, base.sample_period, base.chip_rate, spec.seed);
  const std::vector<double> truth = true_tdoa(base);
  const std::size_t n = base.size();
  std::vector<RelayTrialRow> rows(static_cast<std::size_t>(spec.trials) * (n - 1));

  parallel_for(spec.trials, parallel, [&](int t) {
    CounterRng rng(spec.seed ^ kRelayStream, static_cast<std::uint64_t>(t));
    RelayConfig c = base;
    for (double& off : c.start_offsets) off = rng.uniform(spec.offset_lo, spec.offset_hi);
    c.receiver_start = base.receiver_start + rng.uniform(spec.offset_lo, spec.offset_hi);
    std::vector<double> rec(n, std::numeric_limits<double>::quiet_NaN());
    std::string status = "ok";
    try {
      const auto received = simulate_relay_chain(c, source, substream_seed(spec.seed, static_cast<std::uint64_t>(t)));
      rec = recover_tdoa(received, c.tau_receiver, c.oversample, c.c0);
    } catch (const Error& e) {
      status = csv_safe(e.what());
    }
    for (std::size_t i = 1; i < n; ++i) {
      RelayTrialRow& row = rows[static_cast<std::size_t>(t) * (n - 1) + (i - 1)];
      row.trial = t;
      row.node = static_cast<int>(i);
      row.start_offset_s = c.start_offsets[i];
      row.true_tdoa_m = truth[i];
      row.recovered_tdoa_m = rec[i];
      row.error_m = rec[i] - truth[i];
      row.status = status;
    }
  });

  RelayResult out;
  std::vector<double> lo(n, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
  for (const RelayTrialRow& r : rows) {
    if (r.status != "ok") {
      ++out.failures;
      continue;
    }
    out.max_abs_error_m = std::max(out.max_abs_error_m, std::abs(r.error_m));
    lo[static_cast<std::size_t>(r.node)] = std::min(lo[static_cast<std::size_t>(r.node)], r.recovered_tdoa_m);
    hi[static_cast<std::size_t>(r.node)] = std::max(hi[static_cast<std::size_t>(r.node)], r.recovered_tdoa_m);
  }
  for (std::size_t i = 1; i < n; ++i)
    if (hi[i] >= lo[i]) out.max_variation_m = std::max(out.max_variation_m, hi[i] - lo[i]);
  out.failures /= static_cast<int>(n - 1);  // counted once per node row
  out.rows = std::move(rows);
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, SweepParameter parameter) {
  out << "schema=1\n";
  out << "parameter,value,estimator,trials,converged,convergence_rate,rmse_m\n";
  for (const SweepRow& r : rows)
    out << parameter_name(parameter) << ',' << num(r.value) << ',' << to_string(r.estimator) << ',' << r.trials << ','
        << r.converged << ',' << num(r.convergence_rate) << ',' << num(r.rmse_m) << '\n';
}

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "schema=1\n";
  out << "trial,seed,param_value,estimator,q_x,q_y,error_m,converged,iterations,status\n";
  for (const TrialRecord& r : records)
    out << r.trial << ',' << r.seed << ',' << num(r.param_value) << ',' << to_string(r.estimator) << ','
        << num(r.q_hat.x()) << ',' << num(r.q_hat.y()) << ',' << num(r.error_m) << ',' << (r.converged ? 1 : 0) << ','
        << r.iterations << ',' << r.status << '\n';
}

void write_replica_csv(std::ostream& out, const std::vector<ReplicaRecord>& records) {
  out << "schema=1\n";
  out << "location,support_mode,trial,estimator,q_x,q_y,error_m,converged,iterations,status\n";
  for (const ReplicaRecord& rr : records) {
    const TrialRecord& r = rr.record;
    out << rr.location << ',' << to_string(rr.mode) << ',' << r.trial << ',' << to_string(r.estimator) << ','
        << num(r.q_hat.x()) << ',' << num(r.q_hat.y()) << ',' << num(r.error_m) << ',' << (r.converged ? 1 : 0) << ','
        << r.iterations << ',' << r.status << '\n';
  }
}

void write_cdf_csv(std::ostream& out, const std::vector<CdfPoint>& points) {
  out << "schema=1\n";
  out << "estimator,support_mode,error_m,fraction\n";
  for (const CdfPoint& p : points)
    out << to_string(p.estimator) << ',' << to_string(p.mode) << ',' << num(p.error_m) << ',' << num(p.fraction)
        << '\n';
}

void write_relay_csv(std::ostream& out, const std::vector<RelayTrialRow>& rows) {
  out << "schema=1\n";
  out << "trial,node,start_offset_ns,true_tdoa_m,recovered_tdoa_m,error_m,status\n";
  for (const RelayTrialRow& r : rows)
    out << r.trial << ',' << r.node << ',' << num(r.start_offset_s * 1e9) << ',' << num(r.true_tdoa_m) << ','
        << num(r.recovered_tdoa_m) << ',' << num(r.error_m) << ',' << r.status << '\n';
}

}  // namespace nlos
