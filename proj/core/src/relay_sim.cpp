#include "nlosloc/relay_sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>

#include <fftw3.h>

#include "nlosloc/errors.hpp"
#include "nlosloc/rng.hpp"

namespace nlos {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPiR = 6.283185307179586;

// FFTW planning is not thread-safe; execution is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

std::vector<cplx> forward(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x);
  std::vector<cplx> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Unnormalized inverse of length n from n/2+1 bins.
std::vector<double> inverse(std::vector<cplx> spec, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spec.data()), out.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Reads a periodic band-limited sequence (given by its spectrum) at times
// offset + k T for k = 0..n-1: spectrum bins times exp(i 2 pi f offset).
std::vector<double> resample_with_offset(const std::vector<cplx>& spec, int n, double period, double offset) {
  std::vector<cplx> shifted(spec.size());
  const double df = 1.0 / (n * period);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double ph = kTwoPiR * static_cast<double>(k) * df * offset;
    shifted[k] = spec[k] * cplx(std::cos(ph), std::sin(ph));
  }
  // The Nyquist bin of an even-length real signal must stay real.
  if (n % 2 == 0) shifted.back() = cplx(shifted.back().real(), 0.0);
  std::vector<double> out = inverse(std::move(shifted), n);
  for (double& v : out) v /= n;
  return out;
}

}  // namespace

std::size_t RelayConfig::base_samples() const {
  return static_cast<std::size_t>(std::llround(packet_length / sample_period));
}

void RelayConfig::validate() const {
  if (!(sample_period > 0.0) || !(packet_length > 0.0)) throw ConfigError("relay timing must be positive");
  if (oversample < 1) throw ConfigError("oversample factor must be >= 1");
  if (!(chip_rate > 0.0) || chip_rate > 1.0 / (2.0 * sample_period))
    throw ConfigError("chip rate must lie in (0, 1/(2 T_s)]");
  const std::size_t n = start_offsets.size();
  if (n < 2) throw ConfigError("relay chain needs the reference and at least one node");
  if (relay_delays.size() != n || tau_target.size() != n || tau_receiver.size() != n)
    throw ConfigError("relay per-node vectors must have equal length");
  if (base_samples() < 16) throw ConfigError("packet too short for the sample period");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(start_offsets[i] >= 0.0) || !(relay_delays[i] >= 0.0) || !(tau_target[i] >= 0.0) ||
        !(tau_receiver[i] >= 0.0))
      throw ConfigError("relay delays and offsets must be >= 0");
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(relay_delays[i] - relay_delays[j]) < packet_length)
        throw SlotCollision("relay windows of nodes " + std::to_string(i) + " and " + std::to_string(j) +
                            " overlap");
}

SourceSignal generate_source(double length_s, double sample_period, double chip_rate, std::uint64_t seed) {
  if (!(length_s > 0.0) || !(sample_period > 0.0) || !(chip_rate > 0.0))
    throw ConfigError("source length, sample period and chip rate must be positive");
  const int n = static_cast<int>(std::llround(length_s / sample_period));
  if (n < 16) throw ConfigError("source too short");
  const double nyquist = 1.0 / (2.0 * sample_period);
  const double bandwidth = std::min(chip_rate, nyquist);

  CounterRng rng(seed, 0x534f55524345ULL);
  std::vector<double> chips(static_cast<std::size_t>(n));
  const double chip_len = 1.0 / chip_rate;
  double chip_value = 0.0;
  long current = -1;
  for (int k = 0; k < n; ++k) {
    const long c = static_cast<long>(std::floor(k * sample_period / chip_len));
    if (c != current) {
      current = c;
      chip_value = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    chips[static_cast<std::size_t>(k)] = chip_value;
  }

  std::vector<cplx> spec = forward(chips);
  const double df = 1.0 / (n * sample_period);
  const double edge = 0.75 * bandwidth;  // raised-cosine taper from edge to bandwidth
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    double h = 1.0;
    if (f >= bandwidth) h = 0.0;
    else if (f > edge) h = 0.5 * (1.0 + std::cos(M_PI * (f - edge) / (bandwidth - edge)));
    spec[k] *= h;
  }
  spec[0] = 0.0;

  std::vector<double> x = inverse(spec, n);
  double power = 0.0;
  for (double& v : x) {
    v /= n;
    power += v * v;
  }
  power /= n;
  const double scale = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
  for (double& v : x) v *= scale;
  for (cplx& c : spec) c *= scale;

  SourceSignal s;
  s.base.samples = std::move(x);
  s.base.rate = 1.0 / sample_period;
  s.spectrum = std::move(spec);
  s.bandwidth = bandwidth;
  return s;
}

std::vector<SampledSignal> simulate_relay_chain(const RelayConfig& config, const SourceSignal& source,
                                                std::uint64_t noise_seed) {
  config.validate();
  const int n = static_cast<int>(config.base_samples());
  if (static_cast<int>(source.base.samples.size()) != n)
    throw ConfigError("source length does not match the packet length");
  const double ts = config.sample_period;
  std::vector<SampledSignal> out(config.size());
  for (std::size_t i = 0; i < config.size(); ++i) {
    // Node samples on its own clock: r_i[k] = x(T_0i + k T_s - tau_i1).
    const std::vector<double> r_node =
        resample_with_offset(source.spectrum, n, ts, config.start_offsets[i] - config.tau_target[i]);
    // Retransmitted at T_0i + T_Di + k T_s, band-limited reconstruction,
    // propagated by tau_i2 and sampled by the receiver at T_0R + T_Di + n T_s.
    const double rx_offset = (config.receiver_start + config.relay_delays[i] - config.tau_receiver[i]) -
                             (config.start_offsets[i] + config.relay_delays[i]);
    std::vector<double> r_rx = resample_with_offset(forward(r_node), n, ts, rx_offset);
    if (std::isfinite(config.snr_db)) {
      CounterRng rng(noise_seed, 0x4e4f495345ULL + i);
      std::normal_distribution<double> gauss(0.0, std::pow(10.0, -config.snr_db / 20.0));
      for (double& v : r_rx) v += gauss(rng);
    }
    out[i].samples = std::move(r_rx);
    out[i].start = config.receiver_start + config.relay_delays[i];
    out[i].rate = 1.0 / ts;
  }
  return out;
}

double ambiguity_peak(const SampledSignal& a, const SampledSignal& b, int oversample) {
  if (a.samples.size() != b.samples.size() || a.samples.empty()) throw ConfigError("ambiguity inputs differ in length");
  if (std::abs(a.rate - b.rate) > 1e-9 * a.rate) throw ConfigError("ambiguity inputs differ in rate");
  if (oversample < 1) throw ConfigError("oversample factor must be >= 1");
  const int n = static_cast<int>(a.samples.size());
  const int big = n * oversample;
  const std::vector<cplx> fa = forward(a.samples);
  const std::vector<cplx> fb = forward(b.samples);
  std::vector<cplx> cross(static_cast<std::size_t>(big / 2 + 1), cplx(0.0, 0.0));
  for (std::size_t k = 0; k < fa.size(); ++k) cross[k] = fb[k] * std::conj(fa[k]);
  if (n % 2 == 0 && oversample > 1) cross[fa.size() - 1] *= 0.5;
  const std::vector<double> corr = inverse(std::move(cross), big);

  std::size_t arg = 0;
  double peak = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < corr.size(); ++k) {
    const double m = std::abs(corr[k]);
    mean += m;
    if (m > peak) {
      peak = m;
      arg = k;
    }
  }
  mean /= static_cast<double>(corr.size());
  if (!(mean > 0.0) || peak / mean < 3.0) throw FlatCorrelation("no distinct cross-correlation peak");
  long lag = static_cast<long>(arg);
  if (lag > big / 2) lag -= big;
  return static_cast<double>(lag) / (a.rate * oversample);
}

std::vector<double> recover_tdoa(const std::vector<SampledSignal>& received,
                                 const std::vector<double>& tau_receiver, int oversample, double c0) {
  if (received.empty() || tau_receiver.size() != received.size())
    throw ConfigError("recover_tdoa needs one receiver delay per signal");
  std::vector<double> d(received.size(), 0.0);
  for (std::size_t i = 1; i < received.size(); ++i) {
    const double delay = ambiguity_peak(received[0], received[i], oversample);
    d[i] = c0 * (delay - (tau_receiver[i] - tau_receiver[0]));
  }
  return d;
}

std::vector<double> true_tdoa(const RelayConfig& config) {
  std::vector<double> d(config.size(), 0.0);
  for (std::size_t i = 1; i < config.size(); ++i) d[i] = config.c0 * (config.tau_target[i] - config.tau_target[0]);
  return d;
}

}  // namespace nlos
