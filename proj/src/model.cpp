#include "dpfp/model.hpp"

#include <algorithm>

namespace dpfp {

namespace {

int conv_output_size(int input, const LayerSpec& l) {
  // floor((IF + 2p - k)/s) + 1; may be non-positive for undersized inputs.
  int numer = input + 2 * l.pad - l.kernel;
  int q = numer >= 0 ? numer / l.stride : -((-numer + l.stride - 1) / l.stride);
  return q + 1;
}

}  // namespace

int NetworkModel::spatial_count() const {
  int n = 0;
  for (const auto& l : layers) {
    if (!l.is_spatial()) break;
    ++n;
  }
  return n;
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += "; ";
    if (issue.layer > 0) out += "layer " + std::to_string(issue.layer) + ": ";
    out += issue.message;
  }
  return out.empty() ? "ok" : out;
}

ValidationReport validate_model(NetworkModel& model) {
  ValidationReport report;
  auto fail = [&](int layer, std::string msg) {
    report.issues.push_back({layer, std::move(msg)});
  };

  if (model.input_size < 1) fail(0, "input size must be positive");
  if (model.input_channels < 1) fail(0, "input channels must be positive");
  if (model.element_bytes < 1) fail(0, "element_bytes must be positive");
  if (model.layers.empty()) fail(0, "model has no layers");

  model.output_size.assign(model.layers.size(), 0);

  bool seen_dense = false;
  int size = model.input_size;
  int channels = model.input_channels;
  std::int64_t features = 0;

  for (int i = 1; i <= model.layer_count(); ++i) {
    LayerSpec& l = model.layers[i - 1];
    if (l.kind == LayerKind::Dense) {
      if (!seen_dense) {
        seen_dense = true;
        features = static_cast<std::int64_t>(size) * size * channels;
      }
      if (l.in_features <= 0) l.in_features = features;
      if (l.in_features != features)
        fail(i, "dense in_features " + std::to_string(l.in_features) +
                    " does not match incoming " + std::to_string(features));
      if (l.out_features <= 0) fail(i, "dense out_features must be positive");
      features = l.out_features;
      model.output_size[i - 1] = 1;
      continue;
    }

    if (seen_dense) {
      fail(i, "spatial layer after a dense layer");
      continue;
    }
    if (l.kernel < 1) fail(i, "kernel must be >= 1");
    if (l.stride < 1) fail(i, "stride must be >= 1");
    if (l.pad < 0) fail(i, "padding must be >= 0");

    if (l.kind == LayerKind::Conv) {
      if (l.channels_in == 0) l.channels_in = channels;
      if (l.channels_in != channels)
        fail(i, "channel mismatch: expects " + std::to_string(l.channels_in) +
                    " inputs, previous layer provides " + std::to_string(channels));
      if (l.channels_out < 1) fail(i, "channels_out must be positive");
      channels = l.channels_out;
    } else {  // Pool
      l.channels_in = channels;
      if (l.channels_out != 0 && l.channels_out != channels)
        fail(i, "pool must preserve channels");
      l.channels_out = channels;
    }

    if (l.kernel >= 1 && l.stride >= 1 && l.pad >= 0) {
      size = conv_output_size(size, l);
      model.output_size[i - 1] = size;
      if (size < 1) {
        fail(i, "OF < 1 (layer output collapses)");
        break;
      }
    }
  }

  return report;
}

void validate_model_or_throw(NetworkModel& model) {
  ValidationReport report = validate_model(model);
  if (!report.ok()) throw ValidationError(report);
}

RfTrace compose(const RfTrace& first, const RfTrace& second) {
  RfTrace out;
  out.output_size = second.output_size;
  out.jump = first.jump * second.jump;
  out.field = first.field + (second.field - 1) * first.jump;
  out.center = first.center + (second.center - Rational(1)) * Rational(first.jump);
  return out;
}

namespace {

void check_spatial_range(const NetworkModel& model, int first, int last) {
  int spatial = model.spatial_count();
  if (first < 1 || first > spatial + 1 || last > spatial || last < first - 1)
    throw std::invalid_argument("invalid layer range [" + std::to_string(first) + "," +
                                std::to_string(last) + "]");
}

}  // namespace

RfTrace rf_forward(const NetworkModel& model, int first, int last) {
  check_spatial_range(model, first, last);
  RfTrace t;
  t.output_size = model.input_size_of(first);
  for (int i = first; i <= last; ++i) {
    const LayerSpec& l = model.layer(i);
    int of = conv_output_size(t.output_size, l);
    RfTrace next;
    next.output_size = of;
    next.jump = t.jump * l.stride;
    next.field = t.field + std::int64_t(l.kernel - 1) * t.jump;
    next.center = t.center + (Rational(l.kernel - 1, 2) - Rational(l.pad)) * Rational(t.jump);
    t = next;
  }
  return t;
}

RowSpan clamp(RowSpan span, std::int64_t lo, std::int64_t hi) {
  span.first = std::max(span.first, lo);
  span.last = std::min(span.last, hi);
  return span;
}

RowSpan layer_input_window(const LayerSpec& layer, RowSpan out_rows) {
  if (out_rows.empty()) return out_rows;
  std::int64_t base_first = layer.stride * (out_rows.first - 1) + 1 - layer.pad;
  std::int64_t base_last = layer.stride * (out_rows.last - 1) + 1 - layer.pad;
  return {base_first, base_last + layer.kernel - 1};
}

RowSpan rf_oracle(const NetworkModel& model, int first, int last, std::int64_t pixel) {
  check_spatial_range(model, first, last);
  RfTrace trace = rf_forward(model, first, last);
  if (pixel < 1 || pixel > trace.output_size)
    throw std::invalid_argument("output pixel " + std::to_string(pixel) + " outside [1," +
                                std::to_string(trace.output_size) + "]");
  RowSpan span{pixel, pixel};
  for (int i = last; i >= first; --i) span = layer_input_window(model.layer(i), span);
  return span;
}

std::int64_t layer_flops(const LayerSpec& layer, std::int64_t output_rows,
                         std::int64_t output_width) {
  if (output_rows <= 0) return 0;
  std::int64_t k2 = std::int64_t(layer.kernel) * layer.kernel;
  switch (layer.kind) {
    case LayerKind::Conv:
      return 2 * k2 * layer.channels_in * output_rows * output_width * layer.channels_out;
    case LayerKind::Pool:
      return k2 * layer.channels_in * output_rows * output_width;
    case LayerKind::Dense:
      return 2 * layer.in_features * layer.out_features;
  }
  return 0;
}

}  // namespace dpfp
