#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "egat/graph/sparse_graph.hpp"
#include "egat/layers/gat.hpp"

namespace egat::edgefeat {

struct AuxConfig {
  std::size_t hidden_per_head = 8;
  std::size_t heads = 8;
  std::size_t epochs = 300;
  std::size_t patience = 30;
  double learning_rate = 0.05;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  double leaky_slope = 0.2;
  double val_fraction = 0.15;  // nodes of the training graph held out for early stopping
  std::uint64_t seed = 0;
};

// Two GAT layers with K heads each: the first concatenates (K * hidden, ELU),
// the second averages its heads into class logits.
class AuxModel {
 public:
  AuxModel() = default;
  AuxModel(std::size_t in_dim, std::size_t n_classes, const AuxConfig& cfg, layers::Rng& rng);

  std::size_t in_dim() const noexcept { return first_.in_dim(); }
  std::size_t n_classes() const noexcept { return second_.out_dim(); }

  // Row-wise log-probabilities. `first_alpha`, when given, receives the
  // first layer's normalized coefficients.
  layers::Var forward(layers::Tape& t, layers::Var x, const layers::EdgeIndex& edges, bool training,
                      layers::Rng* rng, layers::Var* first_alpha = nullptr);
  layers::GatLayer& first_layer() noexcept { return first_; }
  layers::ParamList params();

 private:
  layers::GatLayer first_, second_;
  double dropout_ = 0.0;
};

struct AuxTrainResult {
  AuxModel model;  // parameters of the best validation epoch
  double val_accuracy = 0.0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
};

// Full-graph training with Adagrad on the NLL of the non-held-out nodes;
// keeps the parameters with the best held-out accuracy and stops after
// `patience` epochs without improvement. g must carry self-loops; labels are
// 0..C-1 for every node. Throws ConfigError when fewer than two classes occur
// and NumericalError on a non-finite loss.
AuxTrainResult train_auxiliary(const graph::SparseGraph& g, const numerics::Tensor& x, std::span<const int> labels,
                               const AuxConfig& cfg);

// First-layer coefficients of the model applied to graph g (E x heads).
numerics::Tensor edge_attention_features(AuxModel& model, const graph::SparseGraph& g, const numerics::Tensor& x);

// Fraction of rows whose arg-max (lowest index on ties) equals the label;
// rows with a negative label are skipped.
double accuracy(const numerics::Tensor& scores, std::span<const int> labels);

}  // namespace egat::edgefeat
