#ifndef DPFP_RELIABILITY_HPP
#define DPFP_RELIABILITY_HPP

#include <cstdint>

namespace dpfp {

// Stochastic offloading channel between the device and the primary ES.
// Offloading time is Gaussian with mean mu = task_bits/mean_rate and
// standard deviation delta.
struct ChannelModel {
  double mean_rate_bps = 0;
  double delta_s = 0;
  double task_bits = 0;
  double deadline_s = 0;
  double fps = 0;  // target frame rate; only min_offload_rate uses it

  double mu() const { return task_bits / mean_rate_bps; }
};

// P(T_off + T_inf <= deadline) under the Gaussian channel; a step function
// when delta == 0.
double reliability_analytic(const ChannelModel& channel, double t_inf_s);

// Seeded Monte Carlo estimate of the same probability; negative offloading
// draws are clamped to zero. Samples can be sharded with derived per-shard
// seeds; the result is identical for identical (seed, samples, shards).
double reliability_monte_carlo(const ChannelModel& channel, double t_inf_s,
                               std::uint64_t samples, std::uint64_t seed, int shards = 1);

// Lowest device-to-primary rate sustaining `fps` inferences per second.
double min_offload_rate(double task_bits, double fps);

// Rate deficit at the three-sigma-slow offloading time:
// phi = mean_rate - task_bits/(mu + 3*delta).
double rate_fluctuation(const ChannelModel& channel);

enum class ReliabilityMethod { Analytic, MonteCarlo };

struct ReliabilityReport {
  double reliability = 0;
  ReliabilityMethod method = ReliabilityMethod::Analytic;
  std::uint64_t samples = 0;  // 0 for the analytic method
  double phi_bps = 0;
};

ReliabilityReport evaluate_reliability(const ChannelModel& channel, double t_inf_s,
                                       ReliabilityMethod method, std::uint64_t samples = 0,
                                       std::uint64_t seed = 0, int shards = 1);

}  // namespace dpfp

#endif
