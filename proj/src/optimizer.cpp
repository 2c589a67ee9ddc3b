#include "dpfp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dpfp {

DpTable::DpTable(int num_layers, CostFn block_cost)
    : n_(num_layers), cost_fn_(std::move(block_cost)) {
  if (n_ < 1) throw std::invalid_argument("DpTable needs at least one layer");
  costs_.resize(std::size_t(n_) * n_);
  memo_.resize(std::size_t(n_) * n_);
}

void DpTable::check(int i, int j) const {
  if (i < 1 || j > n_ || i > j)
    throw std::invalid_argument("invalid interval [" + std::to_string(i) + "," +
                                std::to_string(j) + "]");
}

double DpTable::block_cost(int i, int j) {
  check(i, j);
  auto& slot = costs_[index(i, j)];
  if (!slot) slot = cost_fn_(i, j);
  return *slot;
}

const DpTable::Choice& DpTable::optimal(int i, int j) {
  check(i, j);
  auto& slot = memo_[index(i, j)];
  if (slot) return *slot;
  Choice best{block_cost(i, j), 1, 0};
  for (int c = i; c < j; ++c) {
    double head = block_cost(i, c);
    const Choice& tail = optimal(c + 1, j);
    double time = head + tail.time;
    int blocks = 1 + tail.blocks;
    bool better = time < best.time ||
                  (time == best.time &&
                   (blocks < best.blocks || (blocks == best.blocks && c > best.cut)));
    if (better) best = {time, blocks, c};
  }
  slot = best;
  return *slot;
}

std::vector<LayerRange> DpTable::reconstruct(int i, int j) {
  std::vector<LayerRange> blocks;
  int start = i;
  while (true) {
    const Choice& choice = optimal(start, j);
    if (choice.cut == 0) {
      blocks.push_back({start, j});
      break;
    }
    blocks.push_back({start, choice.cut});
    start = choice.cut + 1;
  }
  return blocks;
}

BlockCostModel::BlockCostModel(const NetworkModel& model, const ClusterSpec& cluster,
                               const SplitRatios& ratios, const CostOptions& options)
    : model_(model), cluster_(cluster), ratios_(ratios), options_(options) {
  if (ratios_.count() != cluster_.size())
    throw std::invalid_argument("ratio count does not match cluster size");
}

BlockTiming BlockCostModel::evaluate(int first, int last) const {
  LayerRange range{first, last};
  RfTrace trace = rf_forward(model_, first, last);
  BlockSlices block;
  block.range = range;
  std::vector<RowSpan> outs = output_rows(trace.output_size, ratios_);
  int block_input = model_.input_size_of(first);
  for (const RowSpan& out : outs) {
    EsSlice slice;
    slice.out = out;
    slice.in = input_rows(trace, out, block_input);
    if (!out.empty())
      slice.layer_rows = backprop_rows_within_block(model_, range, out);
    else
      slice.layer_rows.assign(range.depth(), RowSpan{1, 0});
    block.per_es.push_back(std::move(slice));
  }
  if (first == 1) return evaluate_block(model_, block, nullptr, cluster_, options_, 1);
  std::vector<RowSpan> prev = output_rows(model_.input_size_of(first), ratios_);
  return evaluate_block(model_, block, &prev, cluster_, options_, first);
}

double BlockCostModel::operator()(int first, int last) const {
  return evaluate(first, last).t_inf;
}

double speedup_ratio(double t_inf_total, double t_pre) {
  if (!(t_pre > 0)) throw std::invalid_argument("t_pre must be positive");
  return 1.0 - t_inf_total / t_pre;
}

namespace {

// Intervals whose slices need rows beyond the immediate neighbor are not
// usable as blocks; the search simply never picks them.
DpTable::CostFn guard_infeasible(const BlockCostModel& cost) {
  return [&cost](int i, int j) {
    try {
      return cost(i, j);
    } catch (const InfeasibleError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
}

}  // namespace

OptResult dpfp(const NetworkModel& model, const ClusterSpec& cluster, const SplitRatios& ratios,
               const CostOptions& options) {
  int n = model.spatial_count();
  if (n < 1) throw std::invalid_argument("model has no spatial layers");
  BlockCostModel cost(model, cluster, ratios, options);
  DpTable table(n, guard_infeasible(cost));

  OptResult result;
  result.num_es = cluster.size();
  result.t_star = table.optimal(1, n).time;
  if (!std::isfinite(result.t_star))
    throw InfeasibleError("no feasible fused-block plan for this cluster");
  result.plan.blocks = table.reconstruct(1, n);
  validate_plan(model, result.plan);
  SliceAssignment slices = assign_slices(model, result.plan, ratios);
  result.timing = plan_time(model, result.plan, slices, cluster, options);
  // t_pre is the K=1 run of the same optimizer, so rho(1) is exactly zero.
  result.t_pre = cluster.size() == 1
                     ? result.timing.total_inf
                     : dpfp(model, cluster.prefix(1), SplitRatios::uniform(1), options).t_pre;
  result.speedup = speedup_ratio(result.timing.total_inf, result.t_pre);
  return result;
}

OptResult dpfp(const NetworkModel& model, const ClusterSpec& cluster,
               const CostOptions& options) {
  return dpfp(model, cluster, allocate_ratios(cluster.effective_throughputs()), options);
}

BruteForceResult brute_force_partition(int num_layers,
                                       const std::function<double(int, int)>& block_cost) {
  if (num_layers < 1) throw std::invalid_argument("need at least one layer");
  if (num_layers > 16) throw std::invalid_argument("brute force supports at most 16 layers");

  // Cache t(i,j); the oracle shares the cost inputs, only the search differs.
  DpTable cache(num_layers, block_cost);

  BruteForceResult best;
  bool have_best = false;
  std::vector<int> ends;
  const std::uint32_t combos = 1u << (num_layers - 1);
  for (std::uint32_t mask = 0; mask < combos; ++mask) {
    ends.clear();
    for (int b = 1; b < num_layers; ++b)
      if (mask & (1u << (b - 1))) ends.push_back(b);
    ends.push_back(num_layers);

    // Nested back-to-front sum, same order as the DP recursion.
    double total = 0;
    for (auto it = ends.rbegin(); it != ends.rend(); ++it) {
      int first = it + 1 == ends.rend() ? 1 : *(it + 1) + 1;
      total = cache.block_cost(first, *it) + total;
    }

    bool better = false;
    if (!have_best || total < best.total) {
      better = true;
    } else if (total == best.total) {
      std::size_t cur_blocks = ends.size();
      std::size_t best_blocks = best.plan.blocks.size();
      if (cur_blocks < best_blocks) {
        better = true;
      } else if (cur_blocks == best_blocks) {
        for (std::size_t idx = 0; idx < cur_blocks; ++idx) {
          int cur_end = ends[idx];
          int best_end = best.plan.blocks[idx].last;
          if (cur_end != best_end) {
            better = cur_end > best_end;
            break;
          }
        }
      }
    }
    if (better) {
      best.total = total;
      best.plan.blocks.clear();
      int first = 1;
      for (int end : ends) {
        best.plan.blocks.push_back({first, end});
        first = end + 1;
      }
      have_best = true;
    }
  }
  return best;
}

BruteForceResult brute_force_partition(const NetworkModel& model, const ClusterSpec& cluster,
                                       const SplitRatios& ratios, const CostOptions& options) {
  BlockCostModel cost(model, cluster, ratios, options);
  BruteForceResult best = brute_force_partition(model.spatial_count(), guard_infeasible(cost));
  if (!std::isfinite(best.total))
    throw InfeasibleError("no feasible fused-block plan for this cluster");
  return best;
}

SweepResult sweep_cluster_size(const NetworkModel& model, const ClusterSpec& cluster, int k_max,
                               const CostOptions& options) {
  if (k_max < 1 || k_max > cluster.size())
    throw std::invalid_argument("k_max must be within the cluster size");
  SweepResult sweep;
  double best_total = 0;
  for (int k = 1; k <= k_max; ++k) {
    ClusterSpec sub = cluster.prefix(k);
    OptResult r = dpfp(model, sub, allocate_ratios(sub.effective_throughputs()), options);
    if (k == 1 || r.timing.total_inf < best_total) {
      best_total = r.timing.total_inf;
      sweep.best_k = k;
    }
    sweep.per_k.push_back(std::move(r));
  }
  return sweep;
}

}  // namespace dpfp
