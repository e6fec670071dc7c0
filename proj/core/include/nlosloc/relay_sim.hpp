#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

namespace nlos {

inline constexpr double kSpeedOfLight = 299792458.0;

struct SampledSignal {
  std::vector<double> samples;
  double start = 0.0;  ///< seconds
  double rate = 0.0;   ///< Hz
};

/// Band-limited periodic source. Stored by its spectrum so it can be
/// evaluated at any fractional time shift exactly.
struct SourceSignal {
  SampledSignal base;                           ///< one period at 1 / T_s
  std::vector<std::complex<double>> spectrum;   ///< r2c DFT of base.samples
  double bandwidth = 0.0;                       ///< Hz, one-sided
};

struct RelayConfig {
  double sample_period = 100e-9;          ///< T_s (base rate)
  int oversample = 10;
  double packet_length = 10e-3;           ///< seconds
  double chip_rate = 1e6;                 ///< BPSK symbol rate of the source
  std::vector<double> start_offsets;      ///< T_0i per node, node 0 is the reference
  std::vector<double> relay_delays;       ///< T_Di per node (0 = captured directly)
  std::vector<double> tau_target;         ///< tau_i1: target -> node i
  std::vector<double> tau_receiver;       ///< tau_i2: node i -> central receiver
  double receiver_start = 0.0;            ///< T_0R
  double snr_db = std::numeric_limits<double>::infinity();
  double c0 = kSpeedOfLight;

  std::size_t size() const { return start_offsets.size(); }
  std::size_t base_samples() const;
  /// Throws ConfigError on malformed values, SlotCollision on overlapping windows.
  void validate() const;
};

/// Random +/-1 chips at `chip_rate`, low-pass shaped (raised-cosine roll-off)
/// to at most 1 / (2 T_s), unit power. Deterministic in seed.
SourceSignal generate_source(double length_s, double sample_period, double chip_rate, std::uint64_t seed);

/// Receiver-side samples r_R^(i)[n] for every node, obtained by running the
/// sampling / retransmission / receiver chain on each node's own clock.
std::vector<SampledSignal> simulate_relay_chain(const RelayConfig& config, const SourceSignal& source,
                                                std::uint64_t noise_seed = 0);

/// Delay of b relative to a (positive when b lags), from the peak of the
/// oversampled circular cross-correlation. Throws FlatCorrelation.
double ambiguity_peak(const SampledSignal& a, const SampledSignal& b, int oversample);

/// d~_i1 = c0 (D_i - (tau_i2 - tau_12)) for every node (entry 0 = 0).
std::vector<double> recover_tdoa(const std::vector<SampledSignal>& received,
                                 const std::vector<double>& tau_receiver, int oversample,
                                 double c0 = kSpeedOfLight);

/// Ground truth c0 (tau_i1 - tau_11).
std::vector<double> true_tdoa(const RelayConfig& config);

}  // namespace nlos
