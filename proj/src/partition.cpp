#include "dpfp/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dpfp {

FusedPlan FusedPlan::single_block(const NetworkModel& model) {
  return FusedPlan{{LayerRange{1, model.spatial_count()}}};
}

FusedPlan FusedPlan::per_layer(const NetworkModel& model) {
  FusedPlan plan;
  for (int i = 1; i <= model.spatial_count(); ++i) plan.blocks.push_back({i, i});
  return plan;
}

void validate_plan(const NetworkModel& model, const FusedPlan& plan) {
  ValidationReport report;
  int expect = 1;
  for (const auto& b : plan.blocks) {
    if (b.first != expect || b.last < b.first)
      report.issues.push_back({b.first, "blocks must be contiguous and non-empty"});
    expect = b.last + 1;
  }
  if (expect != model.spatial_count() + 1)
    report.issues.push_back({0, "blocks must cover all spatial layers"});
  if (!report.ok()) throw ValidationError(report);
}

SplitRatios SplitRatios::uniform(int num_es) {
  SplitRatios r;
  for (int i = 0; i < num_es; ++i) r.shares.push_back(Rational(1, num_es));
  return r;
}

SplitRatios allocate_ratios(const std::vector<double>& throughputs) {
  if (throughputs.empty()) throw std::invalid_argument("allocate_ratios: no ESs");
  double max_t = 0;
  for (double t : throughputs) {
    if (!(t > 0)) throw std::invalid_argument("allocate_ratios: throughput must be > 0");
    max_t = std::max(max_t, t);
  }
  // Rationalize against the fastest ES; 1e6 steps keep denominators tame.
  std::vector<std::int64_t> weights;
  std::int64_t total = 0;
  for (double t : throughputs) {
    auto w = static_cast<std::int64_t>(std::llround(t / max_t * 1e6));
    w = std::max<std::int64_t>(w, 1);
    weights.push_back(w);
    total += w;
  }
  SplitRatios r;
  for (auto w : weights) r.shares.push_back(Rational(w, total));
  return r;
}

std::vector<RowSpan> output_rows(int output_size, const SplitRatios& ratios) {
  if (ratios.shares.empty()) throw std::invalid_argument("output_rows: no shares");
  std::vector<RowSpan> spans;
  spans.reserve(ratios.shares.size());
  Rational cum = 0;
  std::int64_t prev_end = 0;
  for (const Rational& share : ratios.shares) {
    if (share < Rational(0) || share > Rational(1))
      throw std::invalid_argument("output_rows: share outside [0,1]");
    cum += share;
    std::int64_t end = (cum * Rational(output_size)).round_half_up();
    spans.push_back({prev_end + 1, end});
    prev_end = end;
  }
  if (!(cum == Rational(1)))
    throw std::invalid_argument("output_rows: shares must sum to 1");
  return spans;
}

RowSpan input_rows(const RfTrace& trace, RowSpan out_rows, int input_size) {
  if (out_rows.empty()) return RowSpan{1, 0};
  std::int64_t half = (trace.field - 1) / 2;
  Rational start = trace.center + Rational((out_rows.first - 1) * trace.jump - half);
  Rational end = trace.center + Rational((out_rows.last - 1) * trace.jump + half);
  return clamp({start.floor(), end.ceil()}, 1, input_size);
}

std::vector<RowSpan> backprop_rows_within_block(const NetworkModel& model, LayerRange block,
                                                RowSpan out_rows) {
  std::vector<RowSpan> rows(block.depth());
  RowSpan current = out_rows;
  rows[block.depth() - 1] = current;
  for (int i = block.last; i > block.first; --i) {
    current = layer_input_window(model.layer(i), current);
    current = clamp(current, 1, model.output_size_of(i - 1));
    rows[i - 1 - block.first] = current;
  }
  return rows;
}

SliceAssignment assign_slices(const NetworkModel& model, const FusedPlan& plan,
                              const SplitRatios& ratios) {
  validate_plan(model, plan);
  SliceAssignment out;
  char buf[96];
  for (std::size_t m = 0; m < plan.blocks.size(); ++m) {
    LayerRange range = plan.blocks[m];
    RfTrace trace = rf_forward(model, range.first, range.last);
    int block_input = model.input_size_of(range.first);
    BlockSlices bs;
    bs.range = range;
    std::vector<RowSpan> outs = output_rows(trace.output_size, ratios);
    for (std::size_t k = 0; k < outs.size(); ++k) {
      EsSlice slice;
      slice.out = outs[k];
      slice.in = input_rows(trace, outs[k], block_input);
      if (!outs[k].empty()) {
        slice.layer_rows = backprop_rows_within_block(model, range, outs[k]);
      } else {
        slice.layer_rows.assign(range.depth(), RowSpan{1, 0});
        std::snprintf(buf, sizeof buf, "block %zu: ES %zu receives zero rows", m + 1, k + 1);
        out.warnings.push_back(buf);
      }
      bs.per_es.push_back(std::move(slice));
    }
    out.blocks.push_back(std::move(bs));
  }
  return out;
}

namespace {

std::uint64_t row_bytes(const NetworkModel& model, int width, int channels) {
  return std::uint64_t(model.element_bytes) * width * channels;
}

void check_neighbor(bool ok, std::size_t block, std::size_t es, const char* side) {
  if (!ok) {
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "block %zu: ES %zu needs input rows beyond its %s neighbor's slice", block,
                  es, side);
    throw InfeasibleError(buf);
  }
}

}  // namespace

BlockExchange distribution_exchange(const NetworkModel& model, int first_layer,
                                    const std::vector<RowSpan>& in_rows) {
  BlockExchange ex;
  const std::uint64_t per_row = row_bytes(model, model.input_size_of(first_layer),
                                          model.layer(first_layer).channels_in);
  for (std::size_t k = 2; k <= in_rows.size(); ++k) {
    std::uint64_t bytes = std::uint64_t(in_rows[k - 1].count()) * per_row;
    if (bytes > 0) ex.transfers.push_back({1, int(k), bytes});
    ex.total_bytes += bytes;
  }
  return ex;
}

BlockExchange neighbor_exchange(const NetworkModel& model, int first_layer,
                                const std::vector<RowSpan>& prev_out,
                                const std::vector<RowSpan>& in_rows,
                                const PartitionOptions& options, int block_index) {
  BlockExchange ex;
  const int num_es = static_cast<int>(in_rows.size());
  const std::uint64_t per_row = row_bytes(model, model.input_size_of(first_layer),
                                          model.layer(first_layer).channels_in);
  for (int k = 1; k <= num_es; ++k) {
    const RowSpan need = in_rows[k - 1];
    const RowSpan held = prev_out[k - 1];
    if (need.empty()) continue;
    // Rows below the ES's own held range come from the left neighbor, rows
    // above it from the right; interval intersection, so zero overlap moves
    // zero bytes.
    std::int64_t missing_left = held.first - need.first;
    std::int64_t missing_right = need.last - held.last;
    if (missing_left > 0)
      check_neighbor(k >= 2 && need.first >= prev_out[k - 2].first, block_index, k, "left");
    if (missing_right > 0)
      check_neighbor(k <= num_es - 1 && need.last <= prev_out[k].last, block_index, k, "right");
    if (options.strict_paper_exchange) {
      // Literal formula: one row crosses each live neighbor pair even with
      // zero overlap.
      if (k >= 2) {
        std::int64_t diff = prev_out[k - 2].last - need.first;
        std::uint64_t bytes = std::uint64_t(std::max<std::int64_t>(diff, 0) + 1) * per_row;
        ex.transfers.push_back({k - 1, k, bytes});
        ex.total_bytes += bytes;
      }
      if (k <= num_es - 1) {
        std::int64_t diff = need.last - prev_out[k].first;
        std::uint64_t bytes = std::uint64_t(std::max<std::int64_t>(diff, 0) + 1) * per_row;
        ex.transfers.push_back({k + 1, k, bytes});
        ex.total_bytes += bytes;
      }
      continue;
    }
    if (missing_left > 0) {
      std::uint64_t bytes = std::uint64_t(missing_left) * per_row;
      ex.transfers.push_back({k - 1, k, bytes});
      ex.total_bytes += bytes;
    }
    if (missing_right > 0) {
      std::uint64_t bytes = std::uint64_t(missing_right) * per_row;
      ex.transfers.push_back({k + 1, k, bytes});
      ex.total_bytes += bytes;
    }
  }
  return ex;
}

BlockExchange gather_exchange(const NetworkModel& model, int last_layer,
                              const std::vector<RowSpan>& out_rows) {
  BlockExchange ex;
  const std::uint64_t per_row =
      row_bytes(model, model.output_size_of(last_layer), model.layer(last_layer).channels_out);
  for (std::size_t k = 2; k <= out_rows.size(); ++k) {
    std::uint64_t bytes = std::uint64_t(out_rows[k - 1].count()) * per_row;
    if (bytes > 0) ex.transfers.push_back({int(k), 1, bytes});
    ex.total_bytes += bytes;
  }
  return ex;
}

namespace {

std::vector<RowSpan> in_spans(const BlockSlices& block) {
  std::vector<RowSpan> spans;
  spans.reserve(block.per_es.size());
  for (const auto& s : block.per_es) spans.push_back(s.in);
  return spans;
}

std::vector<RowSpan> out_spans(const BlockSlices& block) {
  std::vector<RowSpan> spans;
  spans.reserve(block.per_es.size());
  for (const auto& s : block.per_es) spans.push_back(s.out);
  return spans;
}

}  // namespace

ExchangeReport exchange_sizes(const NetworkModel& model, const FusedPlan& plan,
                              const SliceAssignment& slices, const PartitionOptions& options) {
  ExchangeReport report;
  for (std::size_t m = 0; m < plan.blocks.size(); ++m) {
    const BlockSlices& block = slices.blocks[m];
    BlockExchange ex =
        m == 0 ? distribution_exchange(model, block.range.first, in_spans(block))
               : neighbor_exchange(model, block.range.first, out_spans(slices.blocks[m - 1]),
                                   in_spans(block), options, int(m + 1));
    report.total_bytes += ex.total_bytes;
    report.blocks.push_back(std::move(ex));
  }
  if (model.has_dense() && !plan.blocks.empty()) {
    const BlockSlices& last = slices.blocks.back();
    report.gather = gather_exchange(model, last.range.last, out_spans(last));
    report.total_bytes += report.gather.total_bytes;
  }
  return report;
}

CoverageResult verify_coverage(const NetworkModel& model, const FusedPlan& plan,
                               const SliceAssignment& slices) {
  CoverageResult res;
  auto fail = [&](int block, int es, std::int64_t pixel, std::string msg) {
    res.ok = false;
    res.block = block;
    res.es = es;
    res.pixel = pixel;
    res.message = std::move(msg);
    return res;
  };

  for (std::size_t m = 0; m < plan.blocks.size(); ++m) {
    const BlockSlices& block = slices.blocks[m];
    const LayerRange range = plan.blocks[m];
    const int block_input = model.input_size_of(range.first);
    const int block_output = model.output_size_of(range.last);

    // Output spans must partition [1, OF] in ES order.
    std::int64_t expect = 1;
    for (std::size_t k = 0; k < block.per_es.size(); ++k) {
      const RowSpan out = block.per_es[k].out;
      if (out.first != expect || out.last < out.first - 1)
        return fail(int(m + 1), int(k + 1), 0, "output rows do not partition the block output");
      expect = out.last + 1;
    }
    if (expect != block_output + 1)
      return fail(int(m + 1), int(block.per_es.size()), 0,
                  "output rows do not cover the block output");

    for (std::size_t k = 0; k < block.per_es.size(); ++k) {
      const EsSlice& slice = block.per_es[k];
      if (slice.out.empty()) continue;
      if (slice.in.first < 1 || slice.in.last > block_input)
        return fail(int(m + 1), int(k + 1), 0, "input rows outside the block input tensor");

      // Every assigned pixel's receptive field must be fetchable.
      for (std::int64_t pixel = slice.out.first; pixel <= slice.out.last; ++pixel) {
        RowSpan field = clamp(rf_oracle(model, range.first, range.last, pixel), 1, block_input);
        if (!slice.in.contains(field))
          return fail(int(m + 1), int(k + 1), pixel,
                      "receptive field not contained in fetched input rows");
      }

      // Layer-by-layer: each layer's computed rows feed the next.
      if (int(slice.layer_rows.size()) != range.depth() ||
          !(slice.layer_rows.back() == slice.out))
        return fail(int(m + 1), int(k + 1), 0, "per-layer rows inconsistent with output slice");
      for (int d = range.depth() - 1; d >= 1; --d) {
        RowSpan need = layer_input_window(model.layer(range.first + d), slice.layer_rows[d]);
        need = clamp(need, 1, model.output_size_of(range.first + d - 1));
        if (!slice.layer_rows[d - 1].contains(need))
          return fail(int(m + 1), int(k + 1), 0, "computed rows miss a layer's window");
      }
      RowSpan need = layer_input_window(model.layer(range.first), slice.layer_rows[0]);
      need = clamp(need, 1, block_input);
      if (!slice.in.contains(need))
        return fail(int(m + 1), int(k + 1), 0, "fetched input rows miss the first layer's window");
    }
  }
  return res;
}

}  // namespace dpfp
