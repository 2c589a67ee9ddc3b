#ifndef DPFP_PARTITION_HPP
#define DPFP_PARTITION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dpfp/model.hpp"
#include "dpfp/rational.hpp"

namespace dpfp {

// Contiguous run of spatial layers [first,last], 1-based inclusive.
struct LayerRange {
  int first = 0;
  int last = 0;

  int depth() const { return last - first + 1; }
  bool operator==(const LayerRange& o) const { return first == o.first && last == o.last; }
};

// Ordered fused blocks covering all spatial layers. The trailing dense block
// is implicit and always runs on the primary ES.
struct FusedPlan {
  std::vector<LayerRange> blocks;

  static FusedPlan single_block(const NetworkModel& model);
  static FusedPlan per_layer(const NetworkModel& model);
};

// Throws ValidationError unless blocks are contiguous, non-overlapping and
// cover [1, spatial_count] exactly.
void validate_plan(const NetworkModel& model, const FusedPlan& plan);

// Per-ES output shares of every fused block; exact rationals summing to 1.
struct SplitRatios {
  std::vector<Rational> shares;

  int count() const { return static_cast<int>(shares.size()); }
  static SplitRatios uniform(int num_es);
};

// Shares proportional to effective throughput. Throughputs are rationalized
// at 1e-6 relative precision so downstream row math stays exact.
SplitRatios allocate_ratios(const std::vector<double>& throughputs);

// Per-ES slice of one fused block.
struct EsSlice {
  RowSpan out;                      // assigned rows of the block output
  RowSpan in;                       // clamped rows of the block input
  std::vector<RowSpan> layer_rows;  // rows computed per layer of the block
};

struct BlockSlices {
  LayerRange range;
  std::vector<EsSlice> per_es;
};

struct SliceAssignment {
  std::vector<BlockSlices> blocks;
  std::vector<std::string> warnings;  // e.g. ESs that received zero rows
};

// Quantized cumulative split of [1, output_size]: OE_k = round(sum eta*OF),
// OS_k = OE_{k-1}+1. Always a partition; a share too small for one row yields
// an empty span.
std::vector<RowSpan> output_rows(int output_size, const SplitRatios& ratios);

// Input rows required for out_rows under the block trace, clamped to
// [1, input_size]. The fractional center is floored for the start and ceiled
// for the end, which reproduces the oracle interval exactly.
RowSpan input_rows(const RfTrace& trace, RowSpan out_rows, int input_size);

// Rows each layer of `block` computes so the final layer can emit out_rows,
// walking the per-layer window backwards with per-layer clamping. Result is
// indexed by layer offset within the block.
std::vector<RowSpan> backprop_rows_within_block(const NetworkModel& model, LayerRange block,
                                                RowSpan out_rows);

// output_rows + input_rows + backprop for every block of the plan.
SliceAssignment assign_slices(const NetworkModel& model, const FusedPlan& plan,
                              const SplitRatios& ratios);

struct PartitionOptions {
  // Literal reading of the neighbor-exchange formula: count max(diff,0)+1
  // rows per pair, so even zero-overlap neighbors ship one row.
  bool strict_paper_exchange = false;
};

struct PairTransfer {
  int from_es = 0;  // 1-based
  int to_es = 0;
  std::uint64_t bytes = 0;
};

struct BlockExchange {
  std::uint64_t total_bytes = 0;
  std::vector<PairTransfer> transfers;
};

struct ExchangeReport {
  std::vector<BlockExchange> blocks;      // one per spatial block
  BlockExchange gather;                   // final sub-outputs to primary (dense input)
  std::uint64_t total_bytes = 0;
};

// Bytes moved between ESs per block: initial sub-input distribution for the
// first block, missing neighbor rows for interior blocks, and the gather of
// the last block's sub-outputs when a dense stage follows. Throws
// InfeasibleError if a slice needs rows beyond its immediate neighbor.
ExchangeReport exchange_sizes(const NetworkModel& model, const FusedPlan& plan,
                              const SliceAssignment& slices,
                              const PartitionOptions& options = {});

// Building blocks of exchange_sizes, reusable for single-block costing.
// Primary sends each secondary its sub-input of the block starting at
// `first_layer`.
BlockExchange distribution_exchange(const NetworkModel& model, int first_layer,
                                    const std::vector<RowSpan>& in_rows);
// Each ES fetches its missing input rows from the neighbors that hold them
// (prev_out = output partition of the preceding block).
BlockExchange neighbor_exchange(const NetworkModel& model, int first_layer,
                                const std::vector<RowSpan>& prev_out,
                                const std::vector<RowSpan>& in_rows,
                                const PartitionOptions& options, int block_index);
// Secondaries send their sub-outputs of the last spatial layer to the primary.
BlockExchange gather_exchange(const NetworkModel& model, int last_layer,
                              const std::vector<RowSpan>& out_rows);

struct CoverageResult {
  bool ok = true;
  int block = 0;   // 1-based block index of first violation
  int es = 0;      // 1-based ES index
  std::int64_t pixel = 0;
  std::string message;
};

// Structural correctness of an assignment: block outputs partition the tensor,
// every assigned output pixel's receptive field (per rf_oracle, clamped) is
// contained in the ES's fetched input rows, and each layer's computed rows
// cover the next layer's windows. Failure is a result, not an error.
CoverageResult verify_coverage(const NetworkModel& model, const FusedPlan& plan,
                               const SliceAssignment& slices);

}  // namespace dpfp

#endif
