// dpfp: planner and simulator for distributed CNN inference over
// collaborating edge servers. Subcommands: plan, sweep, baseline,
// reliability, rf.
#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpfp/io.hpp"
#include "dpfp/optimizer.hpp"
#include "dpfp/reliability.hpp"

namespace {

using nlohmann::json;

enum class Format { Table, Csv, Json };

struct CommonArgs {
  std::string model_path;
  std::string cluster_path;
  std::string channel_path;
  int num_es = 0;  // 0: whole cluster
  int max_es = 0;
  std::vector<double> rates;
  std::vector<double> deltas;
  std::string format = "table";
  std::uint64_t seed = 42;
  std::uint64_t samples = 1000000;
  bool strict_paper_mode = false;
  bool comm_max_pairs = false;
  bool modnn_redistribution = false;
};

Format parse_format(const std::string& name) {
  if (name == "table") return Format::Table;
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  throw dpfp::ParseError("unknown format '" + name + "' (use table, csv or json)");
}

dpfp::CostOptions cost_options(const CommonArgs& args) {
  dpfp::CostOptions opt;
  opt.partition.strict_paper_exchange = args.strict_paper_mode;
  opt.comm_max_over_pairs = args.comm_max_pairs;
  opt.modnn_count_redistribution = args.modnn_redistribution;
  return opt;
}

int clamp_num_es(int requested, const dpfp::ClusterSpec& cluster) {
  if (requested == 0) return cluster.size();
  if (requested < 1 || requested > cluster.size())
    throw dpfp::ParseError("cluster has only " + std::to_string(cluster.size()) + " ESs");
  return requested;
}

// %.17g round-trips doubles exactly, which keeps the CSV identities
// (t_inf == t_com + t_cmp) intact after parsing.
std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ms3(double seconds) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", seconds * 1e3);
  return buf;
}

std::string block_label(const dpfp::BlockTiming& bt) {
  if (bt.dense) return "dense";
  if (bt.range.first == bt.range.last) return std::to_string(bt.range.first);
  return std::to_string(bt.range.first) + "-" + std::to_string(bt.range.last);
}

json timing_to_json(const dpfp::TimingReport& report) {
  json blocks = json::array();
  for (const auto& bt : report.blocks) {
    json b;
    b["layers"] = block_label(bt);
    b["dense"] = bt.dense;
    b["t_cmp_s"] = bt.t_cmp;
    b["t_com_s"] = bt.t_com;
    b["t_inf_s"] = bt.t_inf;
    b["exchange_bytes"] = bt.exchange_bytes;
    blocks.push_back(b);
  }
  json out;
  out["blocks"] = blocks;
  out["total_cmp_s"] = report.total_cmp;
  out["total_com_s"] = report.total_com;
  out["total_inf_s"] = report.total_inf;
  out["total_bytes"] = report.total_bytes;
  return out;
}

void print_timing_table(const dpfp::TimingReport& report) {
  std::printf("%7s %9s %11s %11s %11s %14s\n", "block", "layers", "t_cmp_ms", "t_com_ms",
              "t_inf_ms", "bytes");
  for (std::size_t i = 0; i < report.blocks.size(); ++i) {
    const auto& bt = report.blocks[i];
    std::printf("%7s %9s %11s %11s %11s %14" PRIu64 "\n",
                bt.dense ? "dense" : std::to_string(i + 1).c_str(), block_label(bt).c_str(),
                ms3(bt.t_cmp).c_str(), ms3(bt.t_com).c_str(), ms3(bt.t_inf).c_str(),
                bt.exchange_bytes);
  }
  std::printf("%7s %9s %11s %11s %11s %14" PRIu64 "\n", "total", "", ms3(report.total_cmp).c_str(),
              ms3(report.total_com).c_str(), ms3(report.total_inf).c_str(), report.total_bytes);
}

void print_timing_csv(const dpfp::TimingReport& report) {
  std::printf("block,layers,t_cmp_s,t_com_s,t_inf_s,exchange_bytes\n");
  for (std::size_t i = 0; i < report.blocks.size(); ++i) {
    const auto& bt = report.blocks[i];
    std::printf("%s,%s,%s,%s,%s,%" PRIu64 "\n", bt.dense ? "dense" : std::to_string(i + 1).c_str(),
                block_label(bt).c_str(), g17(bt.t_cmp).c_str(), g17(bt.t_com).c_str(),
                g17(bt.t_inf).c_str(), bt.exchange_bytes);
  }
  std::printf("total,,%s,%s,%s,%" PRIu64 "\n", g17(report.total_cmp).c_str(),
              g17(report.total_com).c_str(), g17(report.total_inf).c_str(), report.total_bytes);
}

int cmd_plan(const CommonArgs& args) {
  Format format = parse_format(args.format);
  dpfp::NetworkModel model = dpfp::load_model(args.model_path);
  dpfp::ClusterSpec cluster = dpfp::load_cluster(args.cluster_path);
  int k = clamp_num_es(args.num_es, cluster);
  dpfp::ClusterSpec active = cluster.prefix(k);
  dpfp::OptResult result = dpfp::dpfp(
      model, active, dpfp::allocate_ratios(active.effective_throughputs()), cost_options(args));

  if (format == Format::Json) {
    json out;
    out["model"] = args.model_path;
    out["num_es"] = k;
    out["link_rate_bps"] = active.link_rate_bps;
    json blocks = json::array();
    for (const auto& b : result.plan.blocks)
      blocks.push_back({{"first", b.first}, {"last", b.last}});
    out["plan"] = blocks;
    dpfp::SliceAssignment slices = dpfp::assign_slices(
        model, result.plan, dpfp::allocate_ratios(active.effective_throughputs()));
    json slice_rows = json::array();
    for (const auto& bs : slices.blocks) {
      json per_es = json::array();
      for (const auto& s : bs.per_es)
        per_es.push_back({{"out", {s.out.first, s.out.last}}, {"in", {s.in.first, s.in.last}}});
      slice_rows.push_back(
          {{"first", bs.range.first}, {"last", bs.range.last}, {"es", per_es}});
    }
    out["slices"] = slice_rows;
    out["timing"] = timing_to_json(result.timing);
    out["t_pre_s"] = result.t_pre;
    out["speedup"] = result.speedup;
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
  }
  if (format == Format::Csv) {
    print_timing_csv(result.timing);
    std::printf("speedup,,%s,,,\n", g17(result.speedup).c_str());
    return 0;
  }
  std::printf("model: %s  (%d spatial layers", args.model_path.c_str(), model.spatial_count());
  if (model.has_dense()) std::printf(", %d dense", model.layer_count() - model.spatial_count());
  std::printf(")\ncluster: %d ES(s) at %.0f Gbps\n\n", k, active.link_rate_bps / 1e9);
  dpfp::SliceAssignment slices = dpfp::assign_slices(
      model, result.plan, dpfp::allocate_ratios(active.effective_throughputs()));
  for (const auto& w : slices.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  print_timing_table(result.timing);
  std::printf("\nsingle-ES time: %s ms\nspeedup ratio:  %.3f\n", ms3(result.t_pre).c_str(),
              result.speedup);
  return 0;
}

int cmd_sweep(const CommonArgs& args, bool format_given) {
  // The sweep is a data product; it defaults to CSV.
  Format format = format_given ? parse_format(args.format) : Format::Csv;
  dpfp::NetworkModel model = dpfp::load_model(args.model_path);
  dpfp::ClusterSpec cluster = dpfp::load_cluster(args.cluster_path);
  int k_max = args.max_es == 0 ? cluster.size() : clamp_num_es(args.max_es, cluster);
  std::vector<double> rates = args.rates;
  if (rates.empty()) rates.push_back(cluster.link_rate_bps / 1e9);

  json rows = json::array();
  if (format == Format::Csv)
    std::printf("rate_gbps,num_es,t_cmp_s,t_com_s,t_inf_s,exchange_bytes,speedup\n");
  else if (format == Format::Table)
    std::printf("%9s %6s %11s %11s %11s %14s %8s\n", "rate_gbps", "num_es", "t_cmp_ms",
                "t_com_ms", "t_inf_ms", "bytes", "speedup");
  for (double gbps : rates) {
    dpfp::ClusterSpec at_rate = cluster;
    at_rate.link_rate_bps = gbps * 1e9;
    dpfp::SweepResult sweep = dpfp::sweep_cluster_size(model, at_rate, k_max, cost_options(args));
    for (const auto& r : sweep.per_k) {
      if (format == Format::Csv) {
        std::printf("%s,%d,%s,%s,%s,%" PRIu64 ",%s\n", g17(gbps).c_str(), r.num_es,
                    g17(r.timing.total_cmp).c_str(), g17(r.timing.total_com).c_str(),
                    g17(r.timing.total_inf).c_str(), r.timing.total_bytes, g17(r.speedup).c_str());
      } else if (format == Format::Table) {
        std::printf("%9.0f %6d %11s %11s %11s %14" PRIu64 " %8.3f\n", gbps, r.num_es,
                    ms3(r.timing.total_cmp).c_str(), ms3(r.timing.total_com).c_str(),
                    ms3(r.timing.total_inf).c_str(), r.timing.total_bytes, r.speedup);
      } else {
        rows.push_back({{"rate_gbps", gbps},
                        {"num_es", r.num_es},
                        {"t_cmp_s", r.timing.total_cmp},
                        {"t_com_s", r.timing.total_com},
                        {"t_inf_s", r.timing.total_inf},
                        {"exchange_bytes", r.timing.total_bytes},
                        {"speedup", r.speedup}});
      }
    }
  }
  if (format == Format::Json) std::printf("%s\n", rows.dump(2).c_str());
  return 0;
}

int cmd_baseline(const CommonArgs& args) {
  Format format = parse_format(args.format);
  dpfp::NetworkModel model = dpfp::load_model(args.model_path);
  dpfp::ClusterSpec cluster = dpfp::load_cluster(args.cluster_path);
  int k = clamp_num_es(args.num_es, cluster);
  dpfp::ClusterSpec active = cluster.prefix(k);
  dpfp::SplitRatios ratios = dpfp::allocate_ratios(active.effective_throughputs());
  dpfp::CostOptions opt = cost_options(args);
  dpfp::OptResult plan = dpfp::dpfp(model, active, ratios, opt);
  dpfp::TimingReport modnn = dpfp::modnn_baseline_time(model, active, ratios, opt);

  double com_reduction = modnn.total_com > 0 ? 1.0 - plan.timing.total_com / modnn.total_com : 0.0;
  double byte_reduction = modnn.total_bytes > 0
                              ? 1.0 - double(plan.timing.total_bytes) / double(modnn.total_bytes)
                              : 0.0;

  if (format == Format::Json) {
    json out;
    out["num_es"] = k;
    out["dpfp"] = timing_to_json(plan.timing);
    out["modnn"] = timing_to_json(modnn);
    out["modnn_counts_redistribution"] = args.modnn_redistribution;
    out["communication_time_reduction"] = com_reduction;
    out["exchange_bytes_reduction"] = byte_reduction;
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
  }
  if (format == Format::Csv) {
    std::printf("scheme,t_cmp_s,t_com_s,t_inf_s,exchange_bytes\n");
    std::printf("dpfp,%s,%s,%s,%" PRIu64 "\n", g17(plan.timing.total_cmp).c_str(),
                g17(plan.timing.total_com).c_str(), g17(plan.timing.total_inf).c_str(),
                plan.timing.total_bytes);
    std::printf("modnn,%s,%s,%s,%" PRIu64 "\n", g17(modnn.total_cmp).c_str(),
                g17(modnn.total_com).c_str(), g17(modnn.total_inf).c_str(), modnn.total_bytes);
    std::printf("reduction,,%s,,%s\n", g17(com_reduction).c_str(), g17(byte_reduction).c_str());
    return 0;
  }
  std::printf("%d ES(s) at %.0f Gbps  (MoDNN T_com counts %s)\n\n", k, active.link_rate_bps / 1e9,
              args.modnn_redistribution ? "gather + redistribution" : "gather only");
  std::printf("%8s %11s %11s %11s %14s\n", "scheme", "t_cmp_ms", "t_com_ms", "t_inf_ms", "bytes");
  std::printf("%8s %11s %11s %11s %14" PRIu64 "\n", "dpfp", ms3(plan.timing.total_cmp).c_str(),
              ms3(plan.timing.total_com).c_str(), ms3(plan.timing.total_inf).c_str(),
              plan.timing.total_bytes);
  std::printf("%8s %11s %11s %11s %14" PRIu64 "\n", "modnn", ms3(modnn.total_cmp).c_str(),
              ms3(modnn.total_com).c_str(), ms3(modnn.total_inf).c_str(), modnn.total_bytes);
  std::printf("\ncommunication time reduction: %.1f%%\n", com_reduction * 100);
  std::printf("exchanged bytes reduction:    %.1f%%\n", byte_reduction * 100);
  return 0;
}

int cmd_reliability(const CommonArgs& args) {
  Format format = parse_format(args.format);
  dpfp::NetworkModel model = dpfp::load_model(args.model_path);
  dpfp::ClusterSpec cluster = dpfp::load_cluster(args.cluster_path);
  int k = clamp_num_es(args.num_es, cluster);
  dpfp::ClusterSpec active = cluster.prefix(k);
  dpfp::ChannelModel base = dpfp::load_channel(args.channel_path, dpfp::input_task_bits(model));
  dpfp::OptResult result = dpfp::dpfp(
      model, active, dpfp::allocate_ratios(active.effective_throughputs()), cost_options(args));
  double t_inf = result.timing.total_inf;

  std::vector<double> rates = args.rates;
  if (rates.empty()) rates.push_back(base.mean_rate_bps / 1e6);
  std::vector<double> deltas = args.deltas;
  if (deltas.empty()) deltas.push_back(base.delta_s * 1e3);

  json rows = json::array();
  if (format == Format::Csv)
    std::printf("rate_mbps,delta_ms,mu_ms,phi_mbps,analytic,monte_carlo,five_nines\n");
  else if (format == Format::Table) {
    std::printf("num_es: %d   t_inf: %s ms   deadline: %s ms   task: %.0f bits\n", k,
                ms3(t_inf).c_str(), ms3(base.deadline_s).c_str(), base.task_bits);
    if (base.fps > 0)
      std::printf("minimal offload rate for %.0f FPS: %.3f Mbps\n", base.fps,
                  dpfp::min_offload_rate(base.task_bits, base.fps) / 1e6);
    std::printf("\n%10s %9s %8s %9s %10s %12s %6s\n", "rate_mbps", "delta_ms", "mu_ms", "phi_mbps",
                "analytic", "monte_carlo", "5x9s");
  }
  for (double mbps : rates) {
    for (double delta_ms : deltas) {
      dpfp::ChannelModel ch = base;
      ch.mean_rate_bps = mbps * 1e6;
      ch.delta_s = delta_ms * 1e-3;
      dpfp::ReliabilityReport exact =
          dpfp::evaluate_reliability(ch, t_inf, dpfp::ReliabilityMethod::Analytic);
      dpfp::ReliabilityReport sampled = dpfp::evaluate_reliability(
          ch, t_inf, dpfp::ReliabilityMethod::MonteCarlo, args.samples, args.seed);
      double analytic = exact.reliability;
      double mc = sampled.reliability;
      double phi = exact.phi_bps;
      bool five_nines = analytic >= 0.99999;
      if (format == Format::Csv) {
        std::printf("%s,%s,%s,%s,%s,%s,%d\n", g17(mbps).c_str(), g17(delta_ms).c_str(),
                    g17(ch.mu() * 1e3).c_str(), g17(phi / 1e6).c_str(), g17(analytic).c_str(),
                    g17(mc).c_str(), five_nines ? 1 : 0);
      } else if (format == Format::Table) {
        std::printf("%10.1f %9.1f %8.3f %9.1f %10.6f %12.6f %6s\n", mbps, delta_ms, ch.mu() * 1e3,
                    phi / 1e6, analytic, mc, five_nines ? "*" : "");
      } else {
        rows.push_back({{"rate_mbps", mbps},
                        {"delta_ms", delta_ms},
                        {"mu_ms", ch.mu() * 1e3},
                        {"phi_mbps", phi / 1e6},
                        {"analytic", analytic},
                        {"monte_carlo", mc},
                        {"five_nines", five_nines}});
      }
    }
  }
  if (format == Format::Json) std::printf("%s\n", rows.dump(2).c_str());
  return 0;
}

int cmd_rf(const CommonArgs& args, int from, int to) {
  Format format = parse_format(args.format);
  dpfp::NetworkModel model = dpfp::load_model(args.model_path);
  if (from == 0) from = 1;
  if (to == 0 && from <= model.spatial_count()) to = model.spatial_count();
  json rows = json::array();
  if (format == Format::Csv)
    std::printf("layer,kind,of,jump,field,center\n");
  else if (format == Format::Table)
    std::printf("%6s %5s %6s %6s %7s %8s\n", "layer", "kind", "of", "jump", "field", "center");
  auto emit = [&](const char* label, const char* kind, const dpfp::RfTrace& t) {
    if (format == Format::Csv) {
      std::printf("%s,%s,%d,%" PRId64 ",%" PRId64 ",%s\n", label, kind, t.output_size, t.jump,
                  t.field, t.center.str().c_str());
    } else if (format == Format::Table) {
      std::printf("%6s %5s %6d %6" PRId64 " %7" PRId64 " %8s\n", label, kind, t.output_size,
                  t.jump, t.field, t.center.str().c_str());
    } else {
      rows.push_back({{"layer", label},
                      {"kind", kind},
                      {"of", t.output_size},
                      {"jump", t.jump},
                      {"field", t.field},
                      {"center", t.center.str()}});
    }
  };
  for (int i = from; i <= to; ++i) {
    dpfp::RfTrace t = dpfp::rf_forward(model, from, i);
    const char* kind = model.layer(i).kind == dpfp::LayerKind::Conv ? "conv" : "pool";
    emit(std::to_string(i).c_str(), kind, t);
  }
  // Summary row for the whole range; the identity trace when the range is empty.
  char label[32];
  std::snprintf(label, sizeof label, "%d-%d", from, to);
  emit(label, "range", dpfp::rf_forward(model, from, to));
  if (format == Format::Json) std::printf("%s\n", rows.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planner and simulator for distributed CNN inference on edge servers"};
  app.require_subcommand(1);

  CommonArgs args;
  int rf_from = 0, rf_to = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_cluster) {
    cmd->add_option("--model", args.model_path, "model JSON file")->required();
    auto* cl = cmd->add_option("--cluster", args.cluster_path, "cluster JSON file");
    if (needs_cluster) cl->required();
    cmd->add_option("--format", args.format, "output format: table, csv or json");
    cmd->add_option("--seed", args.seed, "seed for randomized evaluation");
    cmd->add_flag("--strict-paper-mode", args.strict_paper_mode,
                  "literal neighbor-exchange formula (one row even at zero overlap)");
    cmd->add_flag("--comm-max-pairs", args.comm_max_pairs,
                  "model T_com as the slowest pairwise transfer instead of the volume sum");
  };

  CLI::App* plan = app.add_subcommand("plan", "optimal fused-block partition for one cluster");
  add_common(plan, true);
  plan->add_option("--num-es", args.num_es, "number of ESs to use (prefix of the cluster)");

  CLI::App* sweep = app.add_subcommand("sweep", "optimum for every cluster size (CSV)");
  add_common(sweep, true);
  sweep->add_option("--max-es", args.max_es, "largest cluster size to evaluate");
  sweep->add_option("--rates", args.rates, "link rates in Gbps to sweep")->delimiter(',');

  CLI::App* baseline = app.add_subcommand("baseline", "compare against per-layer merging (MoDNN)");
  add_common(baseline, true);
  baseline->add_option("--num-es", args.num_es, "number of ESs to use");
  baseline->add_flag("--modnn-redistribution", args.modnn_redistribution,
                     "count MoDNN's primary-to-secondary redistribution in its T_com");

  CLI::App* reliability =
      app.add_subcommand("reliability", "deadline-meeting probability over a channel grid");
  add_common(reliability, true);
  reliability->add_option("--channel", args.channel_path, "channel JSON file")->required();
  reliability->add_option("--num-es", args.num_es, "number of ESs to use");
  reliability->add_option("--rates", args.rates, "mean offload rates in Mbps")->delimiter(',');
  reliability->add_option("--deltas", args.deltas, "offload-time sigmas in ms")->delimiter(',');
  reliability->add_option("--samples", args.samples, "Monte Carlo samples per cell");

  CLI::App* rf = app.add_subcommand("rf", "receptive-field trace of a layer range");
  add_common(rf, false);
  rf->add_option("--from", rf_from, "first layer of the range (default 1)");
  rf->add_option("--to", rf_to, "last layer of the range (default: last spatial layer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (plan->parsed()) return cmd_plan(args);
    if (sweep->parsed()) return cmd_sweep(args, sweep->count("--format") > 0);
    if (baseline->parsed()) return cmd_baseline(args);
    if (reliability->parsed()) return cmd_reliability(args);
    if (rf->parsed()) return cmd_rf(args, rf_from, rf_to);
  } catch (const dpfp::InfeasibleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
