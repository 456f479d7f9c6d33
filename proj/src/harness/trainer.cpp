#include "egat/harness/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <spdlog/spdlog.h>

#include "egat/errors.hpp"
#include "egat/graph/partition.hpp"
#include "egat/numerics/adagrad.hpp"

namespace egat::harness {

namespace {

numerics::Tensor gather_rows(const numerics::Tensor& x, std::span<const std::size_t> rows) {
  numerics::Tensor out = numerics::Tensor::matrix(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(rows[r] * x.cols()), x.cols(),
                out.values().begin() + static_cast<std::ptrdiff_t>(r * x.cols()));
  }
  return out;
}

model::NodeBatch batch_of(const SplitData& s, const std::vector<std::size_t>& nodes) {
  graph::Subgraph sub = graph::induced_subgraph(s.graph, nodes);
  std::vector<int> labels;
  labels.reserve(nodes.size());
  for (std::size_t u : nodes) labels.push_back(s.labels[u]);
  return model::NodeBatch::make(std::move(sub.graph), gather_rows(s.features, nodes), std::move(labels), nodes);
}

// Groups of node ids, one group per optimizer step.
std::vector<std::vector<std::size_t>> group_parts(const std::vector<std::vector<std::size_t>>& parts,
                                                  std::size_t batch_nodes, model::Rng& rng) {
  std::vector<std::size_t> order(parts.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> current;
  for (std::size_t p : order) {
    current.insert(current.end(), parts[p].begin(), parts[p].end());
    if (current.size() >= batch_nodes) {
      groups.push_back(std::move(current));
      current.clear();
    }
  }
  // A short tail joins the previous group rather than forming a tiny step.
  if (!current.empty()) {
    if (groups.empty()) groups.push_back(std::move(current));
    else groups.back().insert(groups.back().end(), current.begin(), current.end());
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

void check_labels(const SplitData& s, std::size_t n_classes) {
  for (int l : s.labels) {
    if (l >= static_cast<int>(n_classes)) {
      throw ConfigError("split carries label " + std::to_string(l) + " but the model has " +
                        std::to_string(n_classes) + " classes");
    }
  }
}

}  // namespace

model::NodeBatch full_batch(const SplitData& s) {
  std::vector<std::size_t> ids(s.size());
  std::iota(ids.begin(), ids.end(), 0);
  return model::NodeBatch::make(s.graph, s.features, s.labels, std::move(ids));
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw ShapeError("accuracy: prediction and label counts differ");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    ++total;
    hit += predicted[i] == labels[i] ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

double evaluate(model::EgatModel& m, const SplitData& s) {
  check_labels(s, m.config().n_classes);
  const model::NodeBatch b = full_batch(s);
  return accuracy(m.predict(b), s.labels);
}

double evaluate(const model::Checkpoint& ckpt, const SplitData& s) {
  model::EgatModel m = model::model_from_checkpoint(ckpt);
  return evaluate(m, s);
}

TrainOutput train(const SplitData& tr, const SplitData& va, const TrainConfig& cfg, std::size_t n_classes,
                  std::size_t d_max, std::uint64_t seed, const std::shared_ptr<spdlog::logger>& log) {
  cfg.validate();
  if (tr.size() == 0 || va.size() == 0) throw DataError("training and validation splits must be non-empty");
  check_labels(tr, n_classes);
  check_labels(va, n_classes);
  if (cfg.use_edge_features && (tr.graph.edge_feat_dim() != cfg.set_in || va.graph.edge_feat_dim() != cfg.set_in)) {
    throw ConfigError("edge features are enabled but the split graphs carry no " + std::to_string(cfg.set_in) +
                      "-column edge feature table");
  }
  const auto start = std::chrono::steady_clock::now();

  model::EgatModel m(cfg.model_config(tr.features.cols(), n_classes, d_max, seed));
  model::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);

  const std::size_t n_parts =
      cfg.partitions > 0 ? std::min(cfg.partitions, tr.size())
                         : std::max<std::size_t>(1, (tr.size() + cfg.part_size / 2) / cfg.part_size);
  const auto parts = graph::partition_graph(tr.graph, n_parts, seed).members();
  const model::NodeBatch val_batch = full_batch(va);

  layers::ParamList params = m.params();
  const std::vector<numerics::Tensor*> tensors = layers::tensors_of(params);
  numerics::Adagrad opt(tensors, cfg.lr, cfg.weight_decay);

  TrainOutput out;
  out.result.seed = seed;
  out.result.best_val_accuracy = -1.0;
  const std::string extra = cfg.to_text();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto groups = group_parts(parts, cfg.batch_nodes, rng);
    for (const auto& nodes : groups) {
      const model::NodeBatch b = batch_of(tr, nodes);
      opt.zero_grad();
      layers::Tape t;
      model::ForwardOptions fo;
      fo.training = true;
      fo.rng = &rng;
      const layers::Var l = model::loss(t, m.forward(t, b, fo), b.labels);
      const double lv = t.value(l)[0];
      if (!std::isfinite(lv)) {
        throw NumericalError("training diverged: loss " + std::to_string(lv) + " at epoch " + std::to_string(epoch) +
                             " (seed " + std::to_string(seed) + ")");
      }
      loss_sum += lv;
      t.backward(l);
      opt.step();
    }
    const double val_acc = accuracy(m.predict(val_batch), va.labels);
    const double mean_loss = loss_sum / static_cast<double>(groups.size());
    out.history.push_back({epoch, mean_loss, val_acc});
    out.result.epochs_run = epoch;
    if (log) log->info("seed={} epoch={} loss={:.6f} val_acc={:.4f}", seed, epoch, mean_loss, val_acc);

    if (val_acc > out.result.best_val_accuracy) {
      out.result.best_val_accuracy = val_acc;
      out.result.best_epoch = epoch;
      out.checkpoint = model::make_checkpoint(m, extra);
      since_best = 0;
    } else if (++since_best > cfg.early_stop_patience) {
      break;
    }
  }
  out.result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (log) {
    log->info("seed={} stopped after {} epochs; best val_acc={:.4f} at epoch {}", seed, out.result.epochs_run,
              out.result.best_val_accuracy, out.result.best_epoch);
  }
  return out;
}

TrainOutput run_trial(const PreparedData& data, const TrainConfig& cfg, std::uint64_t seed,
                      const std::shared_ptr<spdlog::logger>& log) {
  if (cfg.use_edge_features && !data.has_edge_features) {
    throw ConfigError("edge features are enabled but were not computed for this dataset");
  }
  const auto start = std::chrono::steady_clock::now();
  TrainOutput out;
  SplitData test;
  if (cfg.use_edge_features && !cfg.feature_mask.all()) {
    out = train(with_feature_mask(data.train(), cfg.feature_mask), with_feature_mask(data.val(), cfg.feature_mask),
                cfg, data.n_classes, data.d_max, seed, log);
    test = with_feature_mask(data.test(), cfg.feature_mask);
  } else {
    out = train(data.train(), data.val(), cfg, data.n_classes, data.d_max, seed, log);
    test = data.test();
  }
  out.result.test_accuracy = evaluate(out.checkpoint, test);
  out.result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (log) log->info("seed={} test_acc={:.4f}", seed, out.result.test_accuracy);
  return out;
}

}  // namespace egat::harness
