#include "cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "nlosloc/errors.hpp"
#include "nlosloc/harness.hpp"

namespace nlos {

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> trials;
  int parallel = 1;
};

void add_common(CLI::App& cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd.add_option("--config", f.config, "JSON configuration file");
  if (config_required) c->required();
  cmd.add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd.add_option("--out", f.out, "output CSV path (overrides the config)");
  cmd.add_option("--trials", f.trials, "trial count (overrides the config)")->check(CLI::PositiveNumber);
  cmd.add_option("--parallel", f.parallel, "worker threads")->check(CLI::PositiveNumber);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

/// Writes a CSV produced by `emit` to `path`, or to `fallback` when the path is empty.
void emit_csv(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& emit) {
  if (path.empty()) {
    emit(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open output file " + path);
  emit(f);
  if (!f) throw Error("failed writing " + path);
}

void print_summary(std::ostream& out, const std::vector<TrialRecord>& records, const std::vector<Estimator>& ests) {
  for (Estimator e : ests) {
    const SweepRow row = summarize(records, e, 0.0);
    double worst = 0.0;
    int failed = 0;
    for (const TrialRecord& r : records) {
      if (r.estimator != e) continue;
      failed += r.failed;
      if (r.converged && !r.failed) worst = std::max(worst, r.error_m);
    }
    out << to_string(e) << ": trials=" << row.trials << " converged=" << row.converged << " failed=" << failed
        << " rmse_m=" << fmt(row.rmse_m) << " max_error_m=" << fmt(worst) << "\n";
  }
}

int cmd_simulate(const CommonFlags& f, std::ostream& out) {
  const ScenarioConfig cfg = load_scenario(f.config);
  const std::vector<Estimator> ests{Estimator::Centralized, Estimator::Distributed, Estimator::TdoaOnly};
  const std::uint64_t seed = f.seed.value_or(cfg.seed);
  const auto records = run_trials(cfg, ests, f.trials.value_or(1), seed, f.parallel);
  print_summary(out, records, ests);
  if (!f.out.empty()) emit_csv(f.out, out, [&](std::ostream& o) { write_trials_csv(o, records); });
  return kExitOk;
}

int cmd_sweep(const CommonFlags& f, std::ostream& out) {
  SweepConfig sc = load_sweep(f.config);
  if (f.trials) sc.spec.trials = *f.trials;
  sc.spec.validate();
  const std::uint64_t seed = f.seed.value_or(sc.scenario.seed);
  const SweepResult res = run_sweep(sc.spec, sc.scenario, seed, f.parallel);
  const std::string path = f.out.empty() ? sc.spec.out : f.out;
  emit_csv(path, out, [&](std::ostream& o) { write_sweep_csv(o, res.rows, sc.spec.parameter); });
  if (!path.empty()) {
    for (const SweepRow& r : res.rows)
      out << "value=" << fmt(r.value) << " " << to_string(r.estimator) << ": converged=" << r.converged << "/"
          << r.trials << " rmse_m=" << fmt(r.rmse_m) << "\n";
  }
  return kExitOk;
}

int cmd_relay(const CommonFlags& f, std::ostream& out) {
  RelaySpec spec = load_relay(f.config);
  if (f.trials) spec.trials = *f.trials;
  if (f.seed) spec.seed = *f.seed;
  const RelayResult res = run_relay_trials(spec, f.parallel);
  const std::string path = f.out.empty() ? spec.out : f.out;
  emit_csv(path, out, [&](std::ostream& o) { write_relay_csv(o, res.rows); });
  if (!path.empty())
    out << "trials=" << spec.trials << " failures=" << res.failures << " max_abs_error_m=" << fmt(res.max_abs_error_m)
        << " max_variation_m=" << fmt(res.max_variation_m) << "\n";
  return kExitOk;
}

int cmd_validate_gossip(const CommonFlags& f, std::ostream& out) {
  const ScenarioConfig cfg = load_scenario(f.config);
  const int samples = f.trials.value_or(10000);
  if (samples < 1000) throw ConfigError("validate-gossip needs --trials >= 1000 samples");
  const GossipAssumptionReport r = validate_weight_assumptions(cfg.gossip, samples, f.seed.value_or(cfg.seed));
  const bool ok = r.nonnegative_ok && r.adjacency_ok && r.row_ok && r.col_expect_ok && r.rho_ok;
  out << "nodes=" << cfg.gossip.size() << " samples=" << r.n_samples << "\n"
      << "nonnegative " << (r.nonnegative_ok ? "ok" : "FAIL") << "\n"
      << "adjacency " << (r.adjacency_ok ? "ok" : "FAIL") << "\n"
      << "row_sums " << (r.row_ok ? "ok" : "FAIL") << "\n"
      << "expected_column_sums " << (r.col_expect_ok ? "ok" : "FAIL") << "\n"
      << "rho=" << fmt(r.rho) << " rho_sampled=" << fmt(r.rho_sampled) << " " << (r.rho_ok ? "ok" : "FAIL") << "\n";
  if (!f.out.empty()) {
    emit_csv(f.out, out, [&](std::ostream& o) {
      o << "schema=1\ncheck,value,ok\n";
      o << "nonnegative,," << r.nonnegative_ok << "\n";
      o << "adjacency,," << r.adjacency_ok << "\n";
      o << "row_sums,," << r.row_ok << "\n";
      for (Eigen::Index j = 0; j < r.col_sum_mean.size(); ++j)
        o << "column_sum_" << j << "," << fmt(r.col_sum_mean(j)) << "," << r.col_expect_ok << "\n";
      o << "rho," << fmt(r.rho) << "," << r.rho_ok << "\n";
      o << "rho_sampled," << fmt(r.rho_sampled) << ",\n";
    });
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_replicate(const CommonFlags& f, std::ostream& out) {
  if (!f.config.empty()) throw ConfigError("replicate uses the built-in layout and takes no --config");
  const int per_location = f.trials.value_or(10);
  const auto records = replicate_experiment_synthetic(f.seed.value_or(1), per_location, f.parallel);
  for (SupportMode m : {SupportMode::Band, SupportMode::List}) {
    for (Estimator e : {Estimator::Centralized, Estimator::Distributed}) {
      int total = 0, conv = 0;
      for (const ReplicaRecord& r : records)
        if (r.mode == m && r.record.estimator == e) {
          ++total;
          conv += r.record.converged && !r.record.failed;
        }
      out << to_string(m) << " " << to_string(e) << ": converged=" << conv << "/" << total
          << " below_15m=" << fmt(fraction_below(records, e, m, 15.0)) << "\n";
    }
  }
  if (!f.out.empty()) {
    emit_csv(f.out, out, [&](std::ostream& o) { write_replica_csv(o, records); });
    std::filesystem::path cdf(f.out);
    cdf.replace_filename(cdf.stem().string() + "_cdf" + cdf.extension().string());
    emit_csv(cdf.string(), out, [&](std::ostream& o) { write_cdf_csv(o, error_cdf(records)); });
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Target localization under single-bounce NLOS propagation"};
  app.require_subcommand(1);
  CommonFlags flags;
  struct Entry {
    const char* name;
    const char* help;
    bool config_required;
    int (*run)(const CommonFlags&, std::ostream&);
  };
  const Entry entries[] = {
      {"simulate", "run every estimator on a scenario", true, cmd_simulate},
      {"sweep", "Monte-Carlo sweep over eta0 or sigma", true, cmd_sweep},
      {"relay", "relay timing simulation with random start offsets", true, cmd_relay},
      {"validate-gossip", "check the mixing-matrix assumptions of a scenario", true, cmd_validate_gossip},
      {"replicate", "experiment-scale synthetic replica, error CDF", false, cmd_replicate},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const Entry& e : entries) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_common(*cmd, flags, e.config_required);
    subs.emplace_back(cmd, &e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, x;
    const int code = app.exit(e, o, x);
    out << o.str();
    err << x.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (auto& [cmd, entry] : subs)
      if (cmd->parsed()) return entry->run(flags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}

}  // namespace nlos
