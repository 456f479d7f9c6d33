#include "egat/edgefeat/auxiliary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "egat/errors.hpp"
#include "egat/numerics/adagrad.hpp"

namespace egat::edgefeat {

namespace ops = numerics;
using numerics::Tensor;

AuxModel::AuxModel(std::size_t in_dim, std::size_t n_classes, const AuxConfig& cfg, layers::Rng& rng)
    : first_(in_dim, cfg.hidden_per_head, cfg.heads, true, rng, cfg.leaky_slope),
      second_(cfg.hidden_per_head * cfg.heads, n_classes, cfg.heads, false, rng, cfg.leaky_slope),
      dropout_(cfg.dropout) {}

layers::Var AuxModel::forward(layers::Tape& t, layers::Var x, const layers::EdgeIndex& edges, bool training,
                              layers::Rng* rng, layers::Var* first_alpha) {
  const bool drop = training && dropout_ > 0.0;
  if (drop && rng == nullptr) throw ConfigError("auxiliary model: dropout in training needs a random generator");
  layers::GatOptions opt{drop, dropout_, rng, std::nullopt};
  if (drop) x = ops::dropout(t, x, dropout_, true, *rng);
  const layers::GatOutput h1 = first_.forward(t, x, edges, opt);
  if (first_alpha != nullptr) *first_alpha = h1.alpha;
  layers::Var h = h1.h;
  if (drop) h = ops::dropout(t, h, dropout_, true, *rng);
  return ops::log_softmax_rows(t, second_.forward(t, h, edges, opt).h);
}

layers::ParamList AuxModel::params() {
  layers::ParamList p;
  first_.collect("aux.gat1", p);
  second_.collect("aux.gat2", p);
  return p;
}

double accuracy(const Tensor& scores, std::span<const int> labels) {
  if (scores.rows() != labels.size()) throw ShapeError("accuracy: one label per row expected");
  std::size_t hit = 0, counted = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (labels[i] < 0) continue;
    const auto row = scores.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    ++counted;
    if (best == static_cast<std::size_t>(labels[i])) ++hit;
  }
  return counted == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(counted);
}

AuxTrainResult train_auxiliary(const graph::SparseGraph& g, const Tensor& x, std::span<const int> labels,
                               const AuxConfig& cfg) {
  if (labels.size() != g.n_nodes || x.rows() != g.n_nodes) {
    throw ShapeError("auxiliary training: labels and features must cover every node");
  }
  if (cfg.epochs == 0) throw ConfigError("auxiliary training: epochs must be positive");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
    throw ConfigError("auxiliary training: held-out fraction must lie in (0, 1)");
  }
  std::set<int> distinct;
  for (int l : labels) {
    if (l < 0) throw DataError("auxiliary training: every node needs a label");
    distinct.insert(l);
  }
  if (distinct.size() < 2) throw ConfigError("auxiliary training: labels contain a single class");
  const auto n_classes = static_cast<std::size_t>(*distinct.rbegin()) + 1;

  layers::Rng rng(cfg.seed);
  AuxTrainResult result;
  result.model = AuxModel(x.cols(), n_classes, cfg, rng);
  const layers::EdgeIndex edges = layers::EdgeIndex::of(g);

  std::vector<std::size_t> order(g.n_nodes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(g.n_nodes))));
  std::vector<int> fit_labels(labels.begin(), labels.end());
  std::vector<int> val_labels(g.n_nodes, -1);
  for (std::size_t k = 0; k < n_val && k < order.size(); ++k) {
    val_labels[order[k]] = labels[order[k]];
    fit_labels[order[k]] = -1;
  }

  layers::ParamList params = result.model.params();
  const std::vector<Tensor*> tensors = layers::tensors_of(params);
  numerics::Adagrad opt(tensors, cfg.learning_rate, cfg.weight_decay);
  std::vector<Tensor> best;
  double best_acc = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.zero_grad();
    {
      layers::Tape t;
      const layers::Var logp = result.model.forward(t, t.constant(x), edges, true, &rng);
      const layers::Var loss = ops::nll_loss(t, logp, fit_labels);
      const double lv = t.value(loss)[0];
      if (!std::isfinite(lv)) {
        throw NumericalError("auxiliary training diverged at epoch " + std::to_string(epoch) + " (loss " +
                             std::to_string(lv) + ")");
      }
      t.backward(loss);
    }
    opt.step();

    layers::Tape t;
    const double acc = accuracy(t.value(result.model.forward(t, t.constant(x), edges, false, nullptr)), val_labels);
    result.epochs_run = epoch;
    if (acc > best_acc) {
      best_acc = acc;
      result.best_epoch = epoch;
      since_best = 0;
      best.clear();
      for (Tensor* p : tensors) best.emplace_back(p->shape(), p->values());
    } else if (++since_best > cfg.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i]->values() = best[i].values();
  result.val_accuracy = best_acc;
  return result;
}

Tensor edge_attention_features(AuxModel& model, const graph::SparseGraph& g, const Tensor& x) {
  return layers::extract_attention(model.first_layer(), x, g);
}

}  // namespace egat::edgefeat
