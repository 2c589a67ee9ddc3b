#ifndef DPFP_IO_HPP
#define DPFP_IO_HPP

#include <string>

#include "dpfp/cost.hpp"
#include "dpfp/model.hpp"
#include "dpfp/reliability.hpp"

namespace dpfp {

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Model file:
//   {"input": {"size": 224, "channels": 3}, "element_bytes": 4,
//    "layers": [{"kind": "conv", "k": 3, "s": 1, "p": 1, "c_out": 64},
//               {"kind": "pool", "k": 2, "s": 2, "p": 0},
//               {"kind": "dense", "in": 25088, "out": 4096}, ...]}
// Input channels chain layer to layer; "s" and "p" default to 1 and 0, and a
// dense "in" defaults to the incoming feature count. The result is validated.
NetworkModel load_model(const std::string& path);
NetworkModel parse_model(const std::string& text, const std::string& origin = "model");

// Cluster file:
//   {"link_rate_gbps": 100,
//    "es": [{"name": "rtx2080ti", "tflops": 13.45, "efficiency": 0.35,
//            "measured_times": [{"layer": 1, "rows": 224, "seconds": 1.1e-3}]},
//           ...]}
ClusterSpec load_cluster(const std::string& path);
ClusterSpec parse_cluster(const std::string& text, const std::string& origin = "cluster");

// Channel file:
//   {"mean_rate_mbps": 100, "delta_ms": 3, "task_kbytes": 125,
//    "deadline_ms": 33.333, "fps": 30}
// task_kbytes falls back to fallback_task_bits (e.g. the model's input
// tensor) when absent; KBytes and Mbps are decimal.
ChannelModel load_channel(const std::string& path, double fallback_task_bits = 0);
ChannelModel parse_channel(const std::string& text, double fallback_task_bits = 0,
                           const std::string& origin = "channel");

// Bits of one input tensor, the default offloading task size.
double input_task_bits(const NetworkModel& model);

}  // namespace dpfp

#endif
