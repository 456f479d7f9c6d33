#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "egat/graph/sparse_graph.hpp"
#include "egat/layers/deepset.hpp"
#include "egat/layers/gat.hpp"
#include "egat/layers/gcn.hpp"
#include "egat/layers/set_transformer.hpp"

namespace egat::model {

using layers::Rng;
using layers::Tape;
using layers::Var;
using numerics::Tensor;

enum class EncoderKind { set_transformer, deepset };
enum class Backbone { gat, gcn };

struct ModelConfig {
  std::size_t in_dim = 0;
  std::size_t n_classes = 0;
  Backbone backbone = Backbone::gat;
  std::size_t gat_hidden = 8;  // per head
  std::size_t gat_heads = 8;
  std::size_t gcn_hidden = 64;
  std::size_t edge_dim = 18;
  std::size_t set_out = 8;
  std::size_t set_heads = 2;
  std::size_t set_blocks = 1;
  std::size_t deepset_hidden = 16;
  std::size_t d_max = 0;  // largest neighbourhood (self-loop included) the aggregation accepts
  double dropout = 0.5;
  double leaky_slope = 0.2;
  bool use_edge_features = true;
  bool averaged_aggregation = false;
  bool freeze_lambda = false;
  EncoderKind encoder = EncoderKind::set_transformer;
  std::uint64_t seed = 0;

  // Width of the node vector produced by the graph layers.
  std::size_t node_dim() const;
  // Throws ConfigError on an inconsistent configuration.
  void validate() const;
  // Canonical `key = value` lines, prefixed with "model.".
  std::string to_text() const;
  // Reads the "model." keys of a key-value list; other keys are ignored.
  static ModelConfig from_keys(const std::vector<std::pair<std::string, std::string>>& kv);
};

// A set of nodes to classify together: the subgraph they induce (with
// self-loops, edge weights used for ordering sets, edge_feat holding the
// E x edge_dim table), their input features and labels (-1 = not scored).
struct NodeBatch {
  graph::SparseGraph graph;
  Tensor node_features;
  std::vector<int> labels;
  std::vector<std::size_t> global_ids;

  layers::EdgeIndex edges;
  // Per node, its incident edges sorted nearest first (by weight, then
  // neighbour id); a permutation of the edge ids that keeps rows in place.
  layers::IndexPtr canonical;

  static NodeBatch make(graph::SparseGraph g, Tensor node_features, std::vector<int> labels,
                        std::vector<std::size_t> global_ids);
  std::size_t size() const noexcept { return graph.n_nodes; }
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
  std::optional<Var> edge_mask;     // [E], CSR order; scales coefficients and edge-feature rows
  std::optional<Var> feature_mask;  // [in_dim], scales every node's input features
  // Receives the set-transformer attention probabilities, set by set in
  // canonical order (heads x n x n each).
  std::vector<double>* set_attention = nullptr;
  // Receives the first GAT layer's normalized coefficients (E x heads).
  Var* first_alpha = nullptr;
};

class EgatModel {
 public:
  EgatModel() = default;
  explicit EgatModel(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  // Row-wise class log-probabilities of the batch nodes.
  Var forward(Tape& t, const NodeBatch& b, const ForwardOptions& opt = {});
  // Arg-max class per node in evaluation mode; ties go to the lowest id.
  std::vector<int> predict(const NodeBatch& b);
  Tensor log_probabilities(const NodeBatch& b);

  // Trainable tensors by checkpoint name. Frozen lambda is not included.
  layers::ParamList params();
  layers::ParamList all_tensors();

  layers::GatLayer& gat1() noexcept { return gat1_; }
  layers::GatLayer& gat2() noexcept { return gat2_; }
  layers::SetAggregator& aggregator() noexcept { return aggregator_; }

 private:
  ModelConfig cfg_;
  layers::GatLayer gat1_, gat2_;
  layers::GcnLayer gcn1_, gcn2_;
  layers::SetTransformerBlock stb_;
  layers::SetAggregator aggregator_;
  layers::DeepSet deepset_;
  layers::Dense classifier_;
};

// Mean negative log-likelihood over rows with a label >= 0.
Var loss(Tape& t, Var log_probs, std::span<const int> labels);

// Binary checkpoint: magic "EGATCKPT", u32 version, u64 length + config
// text, u32 tensor count, then per tensor: u32 name length, name, u32 rank,
// u64 dims, raw little-endian doubles.
struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> tensors;
};
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Model snapshot including the text of the surrounding configuration.
Checkpoint make_checkpoint(EgatModel& m, const std::string& extra_config_text = {});
// Rebuilds the model from the checkpoint's "model." keys and loads every
// tensor; DataError on a missing or misshapen tensor.
EgatModel model_from_checkpoint(const Checkpoint& ckpt);
// Copies tensors by name into an existing model of the same configuration.
void load_tensors(EgatModel& m, const Checkpoint& ckpt);

}  // namespace egat::model
