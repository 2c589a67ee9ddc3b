#include "dpfp/reliability.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dpfp {

namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double reliability_analytic(const ChannelModel& channel, double t_inf_s) {
  if (!(channel.mean_rate_bps > 0)) throw std::invalid_argument("mean rate must be positive");
  if (channel.delta_s < 0) throw std::invalid_argument("delta must be non-negative");
  double margin = channel.deadline_s - t_inf_s - channel.mu();
  if (channel.delta_s == 0) return margin >= 0 ? 1.0 : 0.0;
  return std_normal_cdf(margin / channel.delta_s);
}

double reliability_monte_carlo(const ChannelModel& channel, double t_inf_s,
                               std::uint64_t samples, std::uint64_t seed, int shards) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (shards < 1) throw std::invalid_argument("shards must be >= 1");
  if (!(channel.mean_rate_bps > 0)) throw std::invalid_argument("mean rate must be positive");
  const double mu = channel.mu();
  const double two_pi = 2.0 * 3.14159265358979323846;

  std::uint64_t hits = 0;
  std::uint64_t base = samples / shards;
  std::uint64_t extra = samples % shards;
  for (int shard = 0; shard < shards; ++shard) {
    std::uint64_t count = base + (std::uint64_t(shard) < extra ? 1 : 0);
    // Box-Muller on raw engine output keeps draws implementation-independent.
    std::mt19937_64 engine(splitmix64(seed + 0x51ed5eedULL * std::uint64_t(shard)));
    for (std::uint64_t s = 0; s < count; ++s) {
      double u1 = double((engine() >> 11) + 1) * 0x1.0p-53;  // (0,1]
      double u2 = double(engine() >> 11) * 0x1.0p-53;        // [0,1)
      double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
      double t_off = mu + channel.delta_s * z;
      if (t_off < 0) t_off = 0;
      if (t_off + t_inf_s <= channel.deadline_s) ++hits;
    }
  }
  return double(hits) / double(samples);
}

double min_offload_rate(double task_bits, double fps) {
  if (!(fps > 0)) throw std::invalid_argument("fps must be positive");
  if (task_bits < 0) throw std::invalid_argument("task bits must be non-negative");
  return task_bits * fps;
}

double rate_fluctuation(const ChannelModel& channel) {
  if (!(channel.mean_rate_bps > 0)) throw std::invalid_argument("mean rate must be positive");
  double slow = channel.mu() + 3.0 * channel.delta_s;
  if (!(slow > 0)) throw std::invalid_argument("mu + 3*delta must be positive");
  return channel.mean_rate_bps - channel.task_bits / slow;
}

ReliabilityReport evaluate_reliability(const ChannelModel& channel, double t_inf_s,
                                       ReliabilityMethod method, std::uint64_t samples,
                                       std::uint64_t seed, int shards) {
  ReliabilityReport report;
  report.method = method;
  report.phi_bps = rate_fluctuation(channel);
  if (method == ReliabilityMethod::Analytic) {
    report.reliability = reliability_analytic(channel, t_inf_s);
  } else {
    report.samples = samples;
    report.reliability = reliability_monte_carlo(channel, t_inf_s, samples, seed, shards);
  }
  return report;
}

}  // namespace dpfp
