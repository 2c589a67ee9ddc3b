#include "dpfp/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dpfp {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError(origin + ": not valid JSON");
  return doc;
}

double require_number(const json& obj, const char* key, const std::string& origin) {
  if (!obj.contains(key) || !obj[key].is_number())
    throw ParseError(origin + ": missing numeric field '" + key + "'");
  return obj[key].get<double>();
}

}  // namespace

NetworkModel parse_model(const std::string& text, const std::string& origin) {
  json doc = parse_json(text, origin);
  NetworkModel model;
  if (!doc.contains("input") || !doc["input"].is_object())
    throw ParseError(origin + ": missing 'input' object");
  model.input_size = int(require_number(doc["input"], "size", origin));
  model.input_channels = int(require_number(doc["input"], "channels", origin));
  model.element_bytes = int(doc.value("element_bytes", 4.0));

  if (!doc.contains("layers") || !doc["layers"].is_array())
    throw ParseError(origin + ": missing 'layers' array");
  for (const auto& entry : doc["layers"]) {
    LayerSpec layer;
    std::string kind = entry.value("kind", "");
    if (kind == "conv") {
      layer.kind = LayerKind::Conv;
      layer.kernel = int(require_number(entry, "k", origin));
      layer.stride = int(entry.value("s", 1.0));
      layer.pad = int(entry.value("p", 0.0));
      layer.channels_out = int(require_number(entry, "c_out", origin));
    } else if (kind == "pool") {
      layer.kind = LayerKind::Pool;
      layer.kernel = int(require_number(entry, "k", origin));
      layer.stride = int(entry.value("s", 1.0));
      layer.pad = int(entry.value("p", 0.0));
    } else if (kind == "dense") {
      layer.kind = LayerKind::Dense;
      layer.in_features = std::int64_t(entry.value("in", 0.0));
      layer.out_features = std::int64_t(require_number(entry, "out", origin));
    } else {
      throw ParseError(origin + ": layer kind must be conv, pool or dense");
    }
    model.layers.push_back(layer);
  }
  validate_model_or_throw(model);
  return model;
}

NetworkModel load_model(const std::string& path) { return parse_model(read_file(path), path); }

ClusterSpec parse_cluster(const std::string& text, const std::string& origin) {
  json doc = parse_json(text, origin);
  ClusterSpec cluster;
  cluster.link_rate_bps = require_number(doc, "link_rate_gbps", origin) * 1e9;
  if (!(cluster.link_rate_bps > 0)) throw ParseError(origin + ": link rate must be positive");
  if (!doc.contains("es") || !doc["es"].is_array() || doc["es"].empty())
    throw ParseError(origin + ": missing non-empty 'es' array");
  for (const auto& entry : doc["es"]) {
    EsProfile es;
    es.name = entry.value("name", "es" + std::to_string(cluster.es.size() + 1));
    es.peak_ops_per_s = require_number(entry, "tflops", origin) * 1e12;
    es.efficiency = entry.value("efficiency", 0.35);
    if (!(es.peak_ops_per_s > 0) || !(es.efficiency > 0) || es.efficiency > 1)
      throw ParseError(origin + ": ES '" + es.name + "' has invalid throughput or efficiency");
    if (entry.contains("measured_times")) {
      for (const auto& mt : entry["measured_times"]) {
        int layer = int(require_number(mt, "layer", origin));
        auto rows = std::int64_t(require_number(mt, "rows", origin));
        double seconds = require_number(mt, "seconds", origin);
        es.measured_times[{layer, rows}] = seconds;
      }
    }
    cluster.es.push_back(std::move(es));
  }
  return cluster;
}

ClusterSpec load_cluster(const std::string& path) {
  return parse_cluster(read_file(path), path);
}

ChannelModel parse_channel(const std::string& text, double fallback_task_bits,
                           const std::string& origin) {
  json doc = parse_json(text, origin);
  ChannelModel channel;
  channel.mean_rate_bps = require_number(doc, "mean_rate_mbps", origin) * 1e6;
  channel.delta_s = require_number(doc, "delta_ms", origin) * 1e-3;
  channel.deadline_s = require_number(doc, "deadline_ms", origin) * 1e-3;
  if (doc.contains("task_kbytes"))
    channel.task_bits = doc["task_kbytes"].get<double>() * 1000.0 * 8.0;
  else
    channel.task_bits = fallback_task_bits;
  channel.fps = doc.value("fps", 0.0);
  if (!(channel.mean_rate_bps > 0)) throw ParseError(origin + ": mean rate must be positive");
  if (channel.delta_s < 0) throw ParseError(origin + ": delta must be non-negative");
  if (!(channel.task_bits > 0))
    throw ParseError(origin + ": task size missing and no fallback available");
  return channel;
}

ChannelModel load_channel(const std::string& path, double fallback_task_bits) {
  return parse_channel(read_file(path), fallback_task_bits, path);
}

double input_task_bits(const NetworkModel& model) {
  return 8.0 * model.element_bytes * double(model.input_size) * model.input_size *
         model.input_channels;
}

}  // namespace dpfp
