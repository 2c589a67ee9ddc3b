#ifndef DPFP_COST_HPP
#define DPFP_COST_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpfp/partition.hpp"

namespace dpfp {

// Edge-server compute profile. Synthetic time is flops/(peak*efficiency);
// measured entries, keyed by (layer index, computed rows), override it.
// Dense layers are looked up with rows == 1.
struct EsProfile {
  std::string name;
  double peak_ops_per_s = 0;
  double efficiency = 0.35;
  std::map<std::pair<int, std::int64_t>, double> measured_times;

  double effective_throughput() const { return peak_ops_per_s * efficiency; }
  double layer_time(const LayerSpec& layer, int layer_index, std::int64_t rows,
                    std::int64_t width) const;
};

struct ClusterSpec {
  std::vector<EsProfile> es;  // index 0 is the primary
  double link_rate_bps = 0;

  int size() const { return static_cast<int>(es.size()); }
  ClusterSpec prefix(int num_es) const;
  std::vector<double> effective_throughputs() const;
};

struct CostOptions {
  PartitionOptions partition;
  // T_com = max over directed pair transfers instead of the volume sum.
  bool comm_max_over_pairs = false;
  // Count MoDNN's primary->secondary redistribution in its T_com.
  bool modnn_count_redistribution = false;
};

struct BlockTiming {
  LayerRange range;
  bool dense = false;
  double t_cmp = 0;
  double t_com = 0;
  double t_inf = 0;  // t_com + t_cmp
  std::uint64_t exchange_bytes = 0;
  std::vector<double> per_es_cmp;
};

struct TimingReport {
  std::vector<BlockTiming> blocks;
  double total_cmp = 0;
  double total_com = 0;
  double total_inf = 0;
  std::uint64_t total_bytes = 0;
};

// Compute time of one ES for one fused block: sum of layer flops over the
// halo-expanded rows it computes, divided by effective throughput (or the
// measured overrides). Empty slices cost zero.
double block_compute_time(const NetworkModel& model, LayerRange block, const EsSlice& slice,
                          const EsProfile& es);

// bytes -> seconds over a full-duplex link of link_rate_bps bits/s.
double block_comm_time(std::uint64_t bytes, double link_rate_bps);

// One spatial block: T_cmp = max over ESs, T_com from the exchange needed to
// start the block (initial distribution when prev_out is null, neighbor
// exchange otherwise).
BlockTiming evaluate_block(const NetworkModel& model, const BlockSlices& block,
                           const std::vector<RowSpan>* prev_out, const ClusterSpec& cluster,
                           const CostOptions& options, int block_index);

// Full plan evaluation. The trailing dense block (when present) runs on the
// primary and its T_com is the gather of the last spatial block's outputs.
// Totals accumulate last block first, matching the DP's summation order.
TimingReport plan_time(const NetworkModel& model, const FusedPlan& plan,
                       const SliceAssignment& slices, const ClusterSpec& cluster,
                       const CostOptions& options = {});

// Per-layer baseline: each convolution is split across ESs and its
// sub-outputs are gathered at the primary afterwards; pooling then runs on
// the primary over the merged tensor. Redistribution of the next layer's
// sub-inputs is modeled but only counted when the option says so.
TimingReport modnn_baseline_time(const NetworkModel& model, const ClusterSpec& cluster,
                                 const SplitRatios& ratios, const CostOptions& options = {});

}  // namespace dpfp

#endif
