#include "dpfp/cost.hpp"

#include <algorithm>
#include <stdexcept>

namespace dpfp {

double EsProfile::layer_time(const LayerSpec& layer, int layer_index, std::int64_t rows,
                             std::int64_t width) const {
  if (rows <= 0) return 0;
  if (!measured_times.empty()) {
    auto it = measured_times.find({layer_index, rows});
    if (it != measured_times.end()) return it->second;
  }
  return double(layer_flops(layer, rows, width)) / effective_throughput();
}

ClusterSpec ClusterSpec::prefix(int num_es) const {
  if (num_es < 1 || num_es > size())
    throw std::invalid_argument("cluster has only " + std::to_string(size()) + " ESs");
  ClusterSpec out;
  out.link_rate_bps = link_rate_bps;
  out.es.assign(es.begin(), es.begin() + num_es);
  return out;
}

std::vector<double> ClusterSpec::effective_throughputs() const {
  std::vector<double> out;
  out.reserve(es.size());
  for (const auto& e : es) out.push_back(e.effective_throughput());
  return out;
}

double block_compute_time(const NetworkModel& model, LayerRange block, const EsSlice& slice,
                          const EsProfile& es) {
  if (slice.out.empty()) return 0;
  double total = 0;
  for (int d = 0; d < block.depth(); ++d) {
    int index = block.first + d;
    total += es.layer_time(model.layer(index), index, slice.layer_rows[d].count(),
                           model.output_size_of(index));
  }
  return total;
}

double block_comm_time(std::uint64_t bytes, double link_rate_bps) {
  if (!(link_rate_bps > 0)) throw std::invalid_argument("link rate must be positive");
  return 8.0 * double(bytes) / link_rate_bps;
}

namespace {

double comm_time(const BlockExchange& ex, const ClusterSpec& cluster,
                 const CostOptions& options) {
  if (!options.comm_max_over_pairs) return block_comm_time(ex.total_bytes, cluster.link_rate_bps);
  double worst = 0;
  for (const auto& t : ex.transfers)
    worst = std::max(worst, block_comm_time(t.bytes, cluster.link_rate_bps));
  return worst;
}

std::vector<RowSpan> spans_of(const BlockSlices& block, bool input) {
  std::vector<RowSpan> spans;
  spans.reserve(block.per_es.size());
  for (const auto& s : block.per_es) spans.push_back(input ? s.in : s.out);
  return spans;
}

BlockTiming dense_block_timing(const NetworkModel& model, const BlockExchange& gather,
                               const ClusterSpec& cluster, const CostOptions& options) {
  BlockTiming bt;
  bt.dense = true;
  bt.range = {model.spatial_count() + 1, model.layer_count()};
  double t = 0;
  for (int i = bt.range.first; i <= bt.range.last; ++i)
    t += cluster.es[0].layer_time(model.layer(i), i, 1, 1);
  bt.per_es_cmp.assign(cluster.size(), 0.0);
  bt.per_es_cmp[0] = t;
  bt.t_cmp = t;
  bt.exchange_bytes = gather.total_bytes;
  bt.t_com = comm_time(gather, cluster, options);
  bt.t_inf = bt.t_com + bt.t_cmp;
  return bt;
}

}  // namespace

BlockTiming evaluate_block(const NetworkModel& model, const BlockSlices& block,
                           const std::vector<RowSpan>* prev_out, const ClusterSpec& cluster,
                           const CostOptions& options, int block_index) {
  BlockTiming bt;
  bt.range = block.range;
  bt.per_es_cmp.reserve(block.per_es.size());
  for (std::size_t k = 0; k < block.per_es.size(); ++k) {
    bt.per_es_cmp.push_back(
        block_compute_time(model, block.range, block.per_es[k], cluster.es[k]));
    bt.t_cmp = std::max(bt.t_cmp, bt.per_es_cmp.back());
  }
  BlockExchange ex =
      prev_out == nullptr
          ? distribution_exchange(model, block.range.first, spans_of(block, true))
          : neighbor_exchange(model, block.range.first, *prev_out, spans_of(block, true),
                              options.partition, block_index);
  bt.exchange_bytes = ex.total_bytes;
  bt.t_com = comm_time(ex, cluster, options);
  bt.t_inf = bt.t_com + bt.t_cmp;
  return bt;
}

TimingReport plan_time(const NetworkModel& model, const FusedPlan& plan,
                       const SliceAssignment& slices, const ClusterSpec& cluster,
                       const CostOptions& options) {
  if (cluster.size() < 1) throw std::invalid_argument("cluster is empty");
  if (!slices.blocks.empty() && int(slices.blocks[0].per_es.size()) != cluster.size())
    throw std::invalid_argument("slice ES count does not match cluster size");
  TimingReport report;
  for (std::size_t m = 0; m < plan.blocks.size(); ++m) {
    std::vector<RowSpan> prev;
    if (m > 0) prev = spans_of(slices.blocks[m - 1], false);
    report.blocks.push_back(evaluate_block(model, slices.blocks[m],
                                           m == 0 ? nullptr : &prev, cluster, options,
                                           int(m + 1)));
  }
  // Spatial blocks accumulate back to front, reproducing the DP's nested
  // sums bit for bit; the dense block is added on top, like t* + T_inf(FL).
  for (auto it = report.blocks.rbegin(); it != report.blocks.rend(); ++it) {
    report.total_cmp = it->t_cmp + report.total_cmp;
    report.total_com = it->t_com + report.total_com;
    report.total_inf = it->t_inf + report.total_inf;
    report.total_bytes += it->exchange_bytes;
  }
  if (model.has_dense()) {
    BlockExchange gather;
    if (!plan.blocks.empty())
      gather = gather_exchange(model, plan.blocks.back().last,
                               spans_of(slices.blocks.back(), false));
    BlockTiming dense = dense_block_timing(model, gather, cluster, options);
    report.total_cmp += dense.t_cmp;
    report.total_com += dense.t_com;
    report.total_inf += dense.t_inf;
    report.total_bytes += dense.exchange_bytes;
    report.blocks.push_back(std::move(dense));
  }
  return report;
}

TimingReport modnn_baseline_time(const NetworkModel& model, const ClusterSpec& cluster,
                                 const SplitRatios& ratios, const CostOptions& options) {
  if (cluster.size() < 1) throw std::invalid_argument("cluster is empty");
  if (ratios.count() != cluster.size())
    throw std::invalid_argument("ratio count does not match cluster size");
  TimingReport report;
  const int num_es = cluster.size();

  for (int i = 1; i <= model.spatial_count(); ++i) {
    const LayerSpec& layer = model.layer(i);
    BlockTiming bt;
    bt.range = {i, i};
    bt.per_es_cmp.assign(num_es, 0.0);
    std::uint64_t counted = 0;

    if (layer.kind == LayerKind::Pool) {
      // Pooling runs on the primary over the merged tensor; its output stays
      // there until the next convolution's sub-inputs are redistributed.
      bt.per_es_cmp[0] = cluster.es[0].layer_time(layer, i, model.output_size_of(i),
                                                  model.output_size_of(i));
      bt.t_cmp = bt.per_es_cmp[0];
    } else {
      std::vector<RowSpan> outs = output_rows(model.output_size_of(i), ratios);
      RfTrace trace = rf_forward(model, i, i);
      std::vector<RowSpan> ins;
      ins.reserve(outs.size());
      for (const auto& o : outs) ins.push_back(input_rows(trace, o, model.input_size_of(i)));

      for (int k = 0; k < num_es; ++k) {
        bt.per_es_cmp[k] =
            cluster.es[k].layer_time(layer, i, outs[k].count(), model.output_size_of(i));
        bt.t_cmp = std::max(bt.t_cmp, bt.per_es_cmp[k]);
      }
      // Secondaries return their full sub-outputs to the primary.
      counted += gather_exchange(model, i, outs).total_bytes;
      if (options.modnn_count_redistribution)
        counted += distribution_exchange(model, i, ins).total_bytes;
    }

    bt.exchange_bytes = counted;
    bt.t_com = block_comm_time(counted, cluster.link_rate_bps);
    bt.t_inf = bt.t_com + bt.t_cmp;
    report.blocks.push_back(std::move(bt));
  }

  for (auto it = report.blocks.rbegin(); it != report.blocks.rend(); ++it) {
    report.total_cmp = it->t_cmp + report.total_cmp;
    report.total_com = it->t_com + report.total_com;
    report.total_inf = it->t_inf + report.total_inf;
    report.total_bytes += it->exchange_bytes;
  }
  if (model.has_dense()) {
    // The last layer's output is already merged at the primary.
    BlockTiming dense = dense_block_timing(model, BlockExchange{}, cluster, options);
    report.total_cmp += dense.t_cmp;
    report.total_com += dense.t_com;
    report.total_inf += dense.t_inf;
    report.blocks.push_back(std::move(dense));
  }
  return report;
}

}  // namespace dpfp
