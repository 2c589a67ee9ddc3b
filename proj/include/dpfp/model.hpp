#ifndef DPFP_MODEL_HPP
#define DPFP_MODEL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpfp/rational.hpp"

namespace dpfp {

// Layer and row indices are 1-based throughout the public API; rows count
// along the partitioned dimension (height).

enum class LayerKind { Conv, Pool, Dense };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  // Conv/Pool geometry (square kernel, symmetric padding).
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  int channels_in = 0;   // inferred by chaining for Conv/Pool
  int channels_out = 0;  // Pool: equals channels_in
  // Dense
  std::int64_t in_features = 0;
  std::int64_t out_features = 0;

  bool is_spatial() const { return kind != LayerKind::Dense; }
};

struct NetworkModel {
  int input_size = 0;      // height == width of the input tensor
  int input_channels = 0;
  int element_bytes = 4;   // bytes per tensor element
  std::vector<LayerSpec> layers;

  // Filled by validate_model: output height/width per spatial layer.
  std::vector<int> output_size;

  int layer_count() const { return static_cast<int>(layers.size()); }
  // Number of leading Conv/Pool layers (the partitionable range).
  int spatial_count() const;
  bool has_dense() const { return spatial_count() < layer_count(); }

  const LayerSpec& layer(int index1) const { return layers[index1 - 1]; }
  // Input height of spatial layer i (output of layer i-1).
  int input_size_of(int index1) const {
    return index1 == 1 ? input_size : output_size[index1 - 2];
  }
  int output_size_of(int index1) const { return output_size[index1 - 1]; }
};

struct ValidationIssue {
  int layer = 0;  // 0 for model-level issues
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const ValidationReport& report)
      : std::runtime_error(report.to_string()), report_(report) {}
  const ValidationReport& report() const { return report_; }

private:
  ValidationReport report_;
};

// Raised when a slice needs rows its immediate neighbor does not hold.
class InfeasibleError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Checks layer invariants (geometry, channel chaining, dense suffix, OF >= 1)
// and fills model.output_size. Returns the list of violations; an empty list
// means the model is ready for the other operations.
ValidationReport validate_model(NetworkModel& model);

// validate_model, throwing ValidationError on any issue.
void validate_model_or_throw(NetworkModel& model);

// Receptive-field attributes of a layer range: output size, cumulative stride
// (jump), field side length, and the center row of the first output feature.
// The center is a half-integer whenever the field side is even.
struct RfTrace {
  int output_size = 0;
  std::int64_t jump = 1;
  std::int64_t field = 1;
  Rational center = 1;

  bool operator==(const RfTrace& o) const {
    return output_size == o.output_size && jump == o.jump && field == o.field &&
           center == o.center;
  }
};

// Trace of `first` followed by `second`, where `second` consumes the output
// of `first`.
RfTrace compose(const RfTrace& first, const RfTrace& second);

// Trace over layers [first,last] (inclusive, 1-based). last == first-1 gives
// the identity trace on that point's tensor. The range must not contain a
// Dense layer.
RfTrace rf_forward(const NetworkModel& model, int first, int last);

// Closed interval of rows; empty when first > last.
struct RowSpan {
  std::int64_t first = 1;
  std::int64_t last = 0;

  bool empty() const { return first > last; }
  std::int64_t count() const { return empty() ? 0 : last - first + 1; }
  bool contains(const RowSpan& inner) const {
    return inner.empty() || (first <= inner.first && inner.last <= last);
  }
  bool operator==(const RowSpan& o) const { return first == o.first && last == o.last; }
};

RowSpan clamp(RowSpan span, std::int64_t lo, std::int64_t hi);

// Input rows feeding one output row of a single (k,s,p) layer, unclamped:
// [s*(o-1)+1-p, s*(o-1)+1-p+k-1]. Extends to a span of output rows.
RowSpan layer_input_window(const LayerSpec& layer, RowSpan out_rows);

// Brute-force check of the trace recurrences: propagates the window of one
// output pixel backwards through [first,last] without clamping and returns
// the input interval. Two adjacent pixels recover jump (shift), field
// (width), and center (midpoint of pixel 1).
RowSpan rf_oracle(const NetworkModel& model, int first, int last, std::int64_t pixel);

// Arithmetic operations for `output_rows` rows of the layer's output.
// Conv: 2*k^2*c_in*rows*width*c_out; Pool: k^2*c_in*rows*width;
// Dense: 2*in*out (rows only gates empty slices).
std::int64_t layer_flops(const LayerSpec& layer, std::int64_t output_rows,
                         std::int64_t output_width);

}  // namespace dpfp

#endif
