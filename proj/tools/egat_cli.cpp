// Command-line front end: one subcommand per pipeline stage.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "egat/errors.hpp"
#include "egat/graph/graph_io.hpp"
#include "egat/harness/ablation.hpp"
#include "egat/interpret/interpret.hpp"
#include "egat/text.hpp"

namespace fs = std::filesystem;
using namespace egat;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> overrides;  // key=value
  bool quiet = false;
};

harness::TrainConfig load_config(const Globals& g) {
  std::string text;
  if (!g.config_path.empty()) {
    std::ifstream is(g.config_path);
    if (!is) throw ConfigError("cannot open configuration " + g.config_path);
    std::stringstream ss;
    ss << is.rdbuf();
    text = ss.str();
  }
  for (const auto& kv : g.overrides) {
    if (kv.find('=') == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    text += "\n" + kv;
  }
  // Later lines of the same key would be rejected as duplicates; let
  // command-line overrides win by rebuilding the text key by key.
  std::vector<std::pair<std::string, std::string>> merged;
  {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      const auto hash = line.find('#');
      const std::string body(text::trim(line.substr(0, hash)));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError("configuration line without '=': " + body);
      const std::string key(text::trim(body.substr(0, eq))), value(text::trim(body.substr(eq + 1)));
      auto it = std::find_if(merged.begin(), merged.end(), [&](const auto& p) { return p.first == key; });
      if (it != merged.end()) it->second = value;
      else merged.emplace_back(key, value);
    }
  }
  std::string joined;
  for (const auto& [k, v] : merged) joined += k + " = " + v + "\n";
  harness::TrainConfig cfg = harness::TrainConfig::from_text(joined, g.config_path.empty() ? "--set" : g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

std::shared_ptr<spdlog::logger> make_logger(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  std::vector<spdlog::sink_ptr> sinks;
  sinks.push_back(std::make_shared<spdlog::sinks::basic_file_sink_mt>((fs::path(g.out) / (name + ".log")).string(), true));
  if (!g.quiet) sinks.push_back(std::make_shared<spdlog::sinks::stderr_sink_mt>());
  auto log = std::make_shared<spdlog::logger>(name, sinks.begin(), sinks.end());
  log->set_pattern("[%H:%M:%S.%e] %v");
  log->flush_on(spdlog::level::info);
  return log;
}

fs::path out_path(const Globals& g, const std::string& file) {
  fs::create_directories(g.out);
  return fs::path(g.out) / file;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  if (!os || !(os << s)) throw DataError("cannot write " + p.string());
}

const char* split_name(std::size_t s) {
  static const char* names[] = {"train", "val", "test"};
  return names[s];
}

std::size_t split_index(const std::string& s) {
  if (s == "train") return 0;
  if (s == "val") return 1;
  if (s == "test") return 2;
  throw ConfigError("split must be train, val or test, got '" + s + "'");
}

void write_split_csv(const fs::path& p, const harness::PreparedData& d) {
  std::ofstream os(p);
  os << "cell_id,split,node\n";
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& sp = d.splits[s];
    for (std::size_t i = 0; i < sp.size(); ++i) {
      os << text::csv_field(d.dataset.meta[sp.cells[i]].cell_id) << ',' << split_name(s) << ',' << i << '\n';
    }
  }
  if (!os) throw DataError("cannot write " + p.string());
}

harness::TrainConfig config_of_checkpoint(const model::Checkpoint& ck) {
  return harness::TrainConfig::from_text(ck.config_text, "checkpoint");
}

interpret::NodeTable node_table(const harness::PreparedData& d, std::size_t split) {
  interpret::NodeTable t;
  t.columns = {"cell_id", "batch", "condition", "label"};
  const auto& sp = d.splits[split];
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const auto& m = d.dataset.meta[sp.cells[i]];
    const int l = sp.labels[i];
    t.rows.push_back({m.cell_id, m.batch, m.condition, l < 0 ? "" : d.dataset.class_names[static_cast<std::size_t>(l)]});
  }
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph attention classifier with self-supervised edge features"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--seed", g.seed, "base trial seed (overrides the configuration)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--set", g.overrides, "configuration override key=value (repeatable)");
  app.add_flag("--quiet", g.quiet, "log to files only");

  std::string data_dir, checkpoint, split = "test", graph_file, rows = "all", label_scheme = "file";
  double viral_threshold = 10.0;
  std::vector<std::size_t> nodes;
  std::size_t top_k = 20, steps = 200;
  bool per_head = false;

  ingest::SyntheticSpec spec;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  synth->add_option("--cells", spec.n_cells)->capture_default_str();
  synth->add_option("--genes", spec.n_genes)->capture_default_str();
  synth->add_option("--clusters", spec.n_clusters)->capture_default_str();
  synth->add_option("--batches", spec.n_batches)->capture_default_str();
  synth->add_option("--classes", spec.n_classes)->capture_default_str();
  synth->add_option("--signal", spec.signal_strength)->capture_default_str();
  synth->add_option("--batch-effect", spec.batch_effect)->capture_default_str();
  synth->add_option("--signal-genes", spec.n_signal_genes)->capture_default_str();
  synth->add_option("--mixing", spec.mixing)->capture_default_str();

  auto* preprocess = app.add_subcommand("preprocess", "filter, normalize and split a dataset");
  auto* build_graph = app.add_subcommand("build-graph", "per-split batch-balanced kNN graphs");
  auto* cluster = app.add_subcommand("cluster", "Louvain communities of the training graph or a graph file");
  cluster->add_option("--graph", graph_file, "cluster this edge-list file instead");
  auto* edgefeat_cmd = app.add_subcommand("edgefeat", "auxiliary models, curvature, node2vec: 18-column edge tables");
  auto* train = app.add_subcommand("train", "train one model per seed and evaluate on the test split");
  auto* evaluate = app.add_subcommand("evaluate", "accuracy of a checkpoint on a split");
  auto* ablate = app.add_subcommand("ablate", "ablation grid over edge-feature blocks");
  ablate->add_option("--rows", rows, "all, core (baseline, zero mask, single blocks, cluster+batch, all) or comma-separated row names")
      ->capture_default_str();
  auto* explain = app.add_subcommand("explain", "per-node explanation masks and feature saliency");
  explain->add_option("--nodes", nodes, "node ids within the split")->delimiter(',');
  explain->add_option("--top", top_k, "features reported by saliency")->capture_default_str();
  explain->add_option("--steps", steps, "mask optimisation steps")->capture_default_str();
  explain->add_flag("--per-head", per_head, "also rank features per attention head");
  auto* export_attn = app.add_subcommand("export-attn", "set-encoder attention as a weighted edge list");

  for (auto* sc : {preprocess, build_graph, cluster, edgefeat_cmd, train, evaluate, ablate, explain, export_attn}) {
    sc->add_option("--data", data_dir, "dataset directory (counts.mtx, genes.txt, meta.csv, labels.csv)");
    sc->add_option("--labels", label_scheme, "file (labels.csv), organoid or patient")
        ->check(CLI::IsMember({"file", "organoid", "patient"}))
        ->capture_default_str();
    sc->add_option("--viral-threshold", viral_threshold, "organoid labels: infected above this viral count")
        ->capture_default_str();
  }
  for (auto* sc : {evaluate, explain, export_attn}) {
    sc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    sc->add_option("--split", split, "train, val or test")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto need_data = [&]() {
    if (data_dir.empty()) throw ConfigError("--data is required");
    auto d = ingest::load_dataset_dir(data_dir);
    if (label_scheme == "organoid") return ingest::derive_labels_organoid(d, viral_threshold);
    if (label_scheme == "patient") return ingest::derive_labels_patient(d);
    return d;
  };

  try {
    if (synth->parsed()) {
      if (g.seed) spec.seed = *g.seed;
      const auto d = ingest::generate_synthetic(spec);
      ingest::write_dataset_dir(d, g.out);
      std::printf("wrote %zu cells x %zu genes to %s\n", d.n_cells(), d.n_genes(), g.out.c_str());
    } else if (preprocess->parsed()) {
      const auto cfg = load_config(g);
      const auto raw = need_data();
      const auto filtered = ingest::filter_and_normalize(raw, cfg.filter_options());
      ingest::write_dataset_dir(filtered, out_path(g, "filtered"));
      const auto sa = ingest::split_70_15_15(filtered, cfg.split_seed);
      std::ofstream os(out_path(g, "split.csv"));
      os << "cell_id,split\n";
      for (std::size_t i = 0; i < filtered.n_cells(); ++i) {
        os << text::csv_field(filtered.meta[i].cell_id) << ',' << split_name(static_cast<std::size_t>(sa.tag[i])) << '\n';
      }
      for (const auto& w : sa.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("%zu of %zu cells and %zu of %zu genes kept\n", filtered.n_cells(), raw.n_cells(),
                  filtered.n_genes(), raw.n_genes());
    } else if (build_graph->parsed()) {
      const auto cfg = load_config(g);
      const auto d = harness::prepare_graphs(need_data(), cfg);
      for (std::size_t s = 0; s < 3; ++s) {
        graph::write_graph(out_path(g, std::string("graph_") + split_name(s) + ".txt"), d.splits[s].graph);
        std::printf("%s: %zu nodes, %zu edges\n", split_name(s), d.splits[s].graph.n_nodes, d.splits[s].graph.n_edges());
      }
      write_split_csv(out_path(g, "split.csv"), d);
    } else if (cluster->parsed()) {
      const auto cfg = load_config(g);
      community::LouvainResult r;
      if (!graph_file.empty()) {
        community::LouvainOptions lo;
        lo.resolution = cfg.louvain_resolution;
        lo.seed = cfg.feature_seed;
        r = community::louvain(graph::without_self_loops(graph::read_graph(fs::path(graph_file))), lo);
      } else {
        harness::PreparedData d = harness::prepare_graphs(need_data(), cfg);
        community::LouvainOptions lo;
        lo.resolution = cfg.louvain_resolution;
        lo.seed = cfg.feature_seed;
        r = community::louvain(graph::without_self_loops(d.train().graph), lo);
      }
      community::write_partition_csv(out_path(g, "clusters.csv"), r.partition);
      std::printf("%zu communities; modularity per pass:", r.partition.n_communities);
      for (double q : r.modularity_per_pass) std::printf(" %.6f", q);
      std::printf("\n");
    } else if (edgefeat_cmd->parsed()) {
      const auto cfg = load_config(g);
      const auto d = harness::prepare(need_data(), cfg);
      for (std::size_t s = 0; s < 3; ++s) {
        graph::write_graph(out_path(g, std::string("edges_") + split_name(s) + ".txt"), d.splits[s].graph);
      }
      write_split_csv(out_path(g, "split.csv"), d);
      const auto& rep = d.edge_report;
      std::ostringstream os;
      os << "louvain_communities = " << d.clusters.partition.n_communities << '\n'
         << "cluster_aux_val_accuracy = " << text::format_double(rep.cluster_val_accuracy) << '\n'
         << "batch_aux_val_accuracy = " << text::format_double(rep.batch_val_accuracy) << '\n'
         << "curvature_mean = " << text::format_double(rep.stats.curvature_mean) << '\n'
         << "curvature_sd = " << text::format_double(rep.stats.curvature_sd) << '\n'
         << "node2vec_mean = " << text::format_double(rep.stats.node2vec_mean) << '\n'
         << "node2vec_sd = " << text::format_double(rep.stats.node2vec_sd) << '\n';
      write_text(out_path(g, "edgefeat_report.txt"), os.str());
      std::printf("%s", os.str().c_str());
    } else if (train->parsed()) {
      const auto cfg = load_config(g);
      auto log = make_logger(g, "train");
      log->info("preparing data from {}", data_dir);
      const auto d = cfg.use_edge_features ? harness::prepare(need_data(), cfg) : harness::prepare_graphs(need_data(), cfg);
      fs::create_directories(out_path(g, "checkpoints"));
      harness::AblationResult res{"train", {}};
      for (std::size_t s = 0; s < cfg.seeds; ++s) {
        const std::uint64_t seed = cfg.seed + s;
        auto out = harness::run_trial(d, cfg, seed, log);
        model::write_checkpoint(out_path(g, "checkpoints/seed_" + std::to_string(seed) + ".ckpt"), out.checkpoint);
        res.trials.push_back(out.result);
      }
      harness::write_metrics_csv(out_path(g, "metrics.csv"), {res});
      const std::string summary = harness::summary_text({res});
      write_text(out_path(g, "summary.txt"), summary);
      std::printf("%s", summary.c_str());
    } else if (evaluate->parsed()) {
      const auto ck = model::read_checkpoint(checkpoint);
      const auto cfg = config_of_checkpoint(ck);
      const auto d = cfg.use_edge_features ? harness::prepare(need_data(), cfg) : harness::prepare_graphs(need_data(), cfg);
      const std::size_t s = split_index(split);
      const double acc = harness::evaluate(ck, harness::with_feature_mask(d.splits[s], cfg.feature_mask));
      std::printf("%s accuracy = %s\n", split.c_str(), text::format_double(acc).c_str());
    } else if (ablate->parsed()) {
      const auto cfg = load_config(g);
      auto log = make_logger(g, "ablate");
      log->info("preparing data from {}", data_dir);
      const auto d = harness::prepare(need_data(), cfg);
      std::vector<harness::AblationRow> grid;
      if (rows == "all") {
        grid = harness::default_ablation_rows(cfg);
      } else if (rows == "core") {
        using B = edgefeat::FeatureBlock;
        grid = {harness::gat_baseline_row(cfg), harness::zero_mask_row(cfg)};
        for (B b : {B::cluster, B::batch, B::node2vec, B::curvature}) grid.push_back(harness::mask_row(cfg, edgefeat::mask_of({b})));
        grid.push_back(harness::mask_row(cfg, edgefeat::mask_of({B::cluster, B::batch})));
        grid.push_back(harness::mask_row(cfg, edgefeat::full_mask()));
      } else {
        const auto table = harness::default_ablation_rows(cfg);
        std::istringstream names(rows);
        for (std::string name; std::getline(names, name, ',');) {
          const auto it = std::find_if(table.begin(), table.end(), [&](const auto& r) { return r.name == name; });
          if (it == table.end()) throw ConfigError("--rows: unknown row '" + name + "'");
          grid.push_back(*it);
        }
      }
      const auto results = harness::run_ablation_grid(d, grid, log);
      harness::write_metrics_csv(out_path(g, "metrics.csv"), results);
      const std::string summary = harness::summary_text(results);
      write_text(out_path(g, "summary.txt"), summary);
      std::printf("%s", summary.c_str());
    } else if (explain->parsed()) {
      const auto ck = model::read_checkpoint(checkpoint);
      const auto cfg = config_of_checkpoint(ck);
      auto m = model::model_from_checkpoint(ck);
      std::ostringstream os;
      const auto d = cfg.use_edge_features ? harness::prepare(need_data(), cfg) : harness::prepare_graphs(need_data(), cfg);
      const auto& genes = d.dataset.gene_names;
      os << "saliency:";
      for (const auto& f : interpret::feature_saliency(m, top_k)) os << ' ' << genes[f.feature] << ':' << text::format_double(f.score);
      os << '\n';
      if (per_head) {
        const auto heads = interpret::feature_saliency_per_head(m, top_k);
        for (std::size_t h = 0; h < heads.size(); ++h) {
          os << "saliency_head_" << h << ':';
          for (const auto& f : heads[h]) os << ' ' << genes[f.feature] << ':' << text::format_double(f.score);
          os << '\n';
        }
      }
      const auto sp = harness::with_feature_mask(d.splits[split_index(split)], cfg.feature_mask);
      const auto batch = harness::full_batch(sp);
      interpret::ExplainConfig ec;
      ec.steps = steps;
      ec.seed = cfg.seed;
      for (std::size_t node : nodes) os << interpret::explain_node(m, batch, node, ec).to_record(top_k, 10, genes) << '\n';
      write_text(out_path(g, "explanations.txt"), os.str());
      std::printf("%s", os.str().c_str());
    } else if (export_attn->parsed()) {
      const auto ck = model::read_checkpoint(checkpoint);
      const auto cfg = config_of_checkpoint(ck);
      auto m = model::model_from_checkpoint(ck);
      const auto d = harness::prepare(need_data(), cfg);
      const std::size_t s = split_index(split);
      const auto sp = harness::with_feature_mask(d.splits[s], cfg.feature_mask);
      const auto w = interpret::attention_adjacency(m, harness::full_batch(sp));
      interpret::export_embedding_inputs(out_path(g, "attention_" + split), sp.graph, w, node_table(d, s));
      std::printf("wrote %zu weighted edges to %s\n", w.size(), out_path(g, "attention_" + split + ".edges").c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
