#ifndef DPFP_OPTIMIZER_HPP
#define DPFP_OPTIMIZER_HPP

#include <functional>
#include <optional>
#include <vector>

#include "dpfp/cost.hpp"

namespace dpfp {

// Memoized recurrence t*(i,j) = min(t(i,j), min_c t(i,c) + t*(c+1,j)) over an
// abstract per-interval block cost. Ties prefer fewer blocks, then the longer
// first block. Block costs are cached alongside the memo.
class DpTable {
public:
  using CostFn = std::function<double(int, int)>;

  struct Choice {
    double time = 0;
    int blocks = 1;
    int cut = 0;  // end of the first block; 0 means undivided
  };

  DpTable(int num_layers, CostFn block_cost);

  int size() const { return n_; }
  double block_cost(int i, int j);  // cached t(i,j)
  const Choice& optimal(int i, int j);
  std::vector<LayerRange> reconstruct(int i, int j);

private:
  int index(int i, int j) const { return (i - 1) * n_ + (j - 1); }
  void check(int i, int j) const;

  int n_;
  CostFn cost_fn_;
  std::vector<std::optional<double>> costs_;
  std::vector<std::optional<Choice>> memo_;
};

// Binds a model, cluster and ratios into the per-interval cost t(i,j):
// T_cmp of the single fused block [i,j] plus the T_com of the exchange that
// must precede it (initial distribution for i == 1, neighbor exchange
// against the partition of layer i-1's output otherwise).
class BlockCostModel {
public:
  BlockCostModel(const NetworkModel& model, const ClusterSpec& cluster,
                 const SplitRatios& ratios, const CostOptions& options = {});

  double operator()(int first, int last) const;
  BlockTiming evaluate(int first, int last) const;

private:
  const NetworkModel& model_;
  const ClusterSpec& cluster_;
  SplitRatios ratios_;
  CostOptions options_;
};

struct OptResult {
  FusedPlan plan;
  TimingReport timing;
  int num_es = 1;
  double t_star = 0;   // DP-optimal time of the spatial blocks
  double t_pre = 0;    // single-ES total of the same model
  double speedup = 0;  // 1 - total/t_pre
};

// rho = 1 - t_inf/t_pre.
double speedup_ratio(double t_inf_total, double t_pre);

// Optimal fused-block partition for the given cluster via the DP recurrence;
// ratios default to throughput-proportional shares.
OptResult dpfp(const NetworkModel& model, const ClusterSpec& cluster,
               const SplitRatios& ratios, const CostOptions& options = {});
OptResult dpfp(const NetworkModel& model, const ClusterSpec& cluster,
               const CostOptions& options = {});

struct BruteForceResult {
  double total = 0;
  FusedPlan plan;
};

// Exhaustive optimality oracle: enumerates all 2^(n-1) compositions of [1,n]
// and totals each with the same per-interval cost and tie-break. n <= 16.
BruteForceResult brute_force_partition(int num_layers,
                                       const std::function<double(int, int)>& block_cost);
BruteForceResult brute_force_partition(const NetworkModel& model, const ClusterSpec& cluster,
                                       const SplitRatios& ratios,
                                       const CostOptions& options = {});

struct SweepResult {
  std::vector<OptResult> per_k;  // entry i is the optimum with i+1 ESs
  int best_k = 1;                // argmin total time, ties to the smaller K
};

// Runs dpfp on every prefix of the cluster up to k_max ESs.
SweepResult sweep_cluster_size(const NetworkModel& model, const ClusterSpec& cluster, int k_max,
                               const CostOptions& options = {});

}  // namespace dpfp

#endif
