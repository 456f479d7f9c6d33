#include "egat/model/egat_model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "egat/errors.hpp"
#include "egat/text.hpp"

namespace egat::model {

namespace ops = numerics;

std::size_t ModelConfig::node_dim() const { return backbone == Backbone::gat ? gat_hidden * gat_heads : gcn_hidden; }

void ModelConfig::validate() const {
  if (in_dim == 0) throw ConfigError("model: input width must be positive");
  if (n_classes < 2) throw ConfigError("model: at least two classes are needed");
  if (gat_hidden == 0 || gat_heads == 0 || gcn_hidden == 0) throw ConfigError("model: layer widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  if (!(leaky_slope >= 0.0)) throw ConfigError("model: leaky slope must be non-negative");
  if (use_edge_features) {
    if (edge_dim == 0 || set_out == 0) throw ConfigError("model: edge feature widths must be positive");
    if (set_blocks != 1) throw ConfigError("model: only a single set transformer block is supported");
    if (encoder == EncoderKind::set_transformer && (set_heads == 0 || edge_dim % set_heads != 0)) {
      throw ConfigError("model: edge feature width " + std::to_string(edge_dim) + " is not divisible into " +
                        std::to_string(set_heads) + " heads");
    }
    if (d_max == 0) throw ConfigError("model: the maximum neighbourhood size must be set");
  }
}

namespace {

const char* backbone_name(Backbone b) { return b == Backbone::gat ? "gat" : "gcn"; }
const char* encoder_name(EncoderKind e) { return e == EncoderKind::set_transformer ? "set_transformer" : "deepset"; }

std::size_t as_size(const std::string& key, const std::string& v) {
  const auto x = text::parse_size(v);
  if (!x) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return *x;
}
double as_double(const std::string& key, const std::string& v) {
  const auto x = text::parse_double(v);
  if (!x) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *x;
}
bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "model.in_dim = " << in_dim << '\n'
     << "model.n_classes = " << n_classes << '\n'
     << "model.backbone = " << backbone_name(backbone) << '\n'
     << "model.gat_hidden = " << gat_hidden << '\n'
     << "model.gat_heads = " << gat_heads << '\n'
     << "model.gcn_hidden = " << gcn_hidden << '\n'
     << "model.edge_dim = " << edge_dim << '\n'
     << "model.set_out = " << set_out << '\n'
     << "model.set_heads = " << set_heads << '\n'
     << "model.set_blocks = " << set_blocks << '\n'
     << "model.deepset_hidden = " << deepset_hidden << '\n'
     << "model.d_max = " << d_max << '\n'
     << "model.dropout = " << text::format_double(dropout) << '\n'
     << "model.leaky_slope = " << text::format_double(leaky_slope) << '\n'
     << "model.use_edge_features = " << (use_edge_features ? "true" : "false") << '\n'
     << "model.averaged_aggregation = " << (averaged_aggregation ? "true" : "false") << '\n'
     << "model.freeze_lambda = " << (freeze_lambda ? "true" : "false") << '\n'
     << "model.encoder = " << encoder_name(encoder) << '\n'
     << "model.seed = " << seed << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_keys(const std::vector<std::pair<std::string, std::string>>& kv) {
  ModelConfig c;
  for (const auto& [key, v] : kv) {
    if (key.rfind("model.", 0) != 0) continue;
    const std::string k = key.substr(6);
    if (k == "in_dim") c.in_dim = as_size(key, v);
    else if (k == "n_classes") c.n_classes = as_size(key, v);
    else if (k == "backbone") {
      if (v == "gat") c.backbone = Backbone::gat;
      else if (v == "gcn") c.backbone = Backbone::gcn;
      else throw ConfigError(key + ": expected gat or gcn, got '" + v + "'");
    } else if (k == "gat_hidden") c.gat_hidden = as_size(key, v);
    else if (k == "gat_heads") c.gat_heads = as_size(key, v);
    else if (k == "gcn_hidden") c.gcn_hidden = as_size(key, v);
    else if (k == "edge_dim") c.edge_dim = as_size(key, v);
    else if (k == "set_out") c.set_out = as_size(key, v);
    else if (k == "set_heads") c.set_heads = as_size(key, v);
    else if (k == "set_blocks") c.set_blocks = as_size(key, v);
    else if (k == "deepset_hidden") c.deepset_hidden = as_size(key, v);
    else if (k == "d_max") c.d_max = as_size(key, v);
    else if (k == "dropout") c.dropout = as_double(key, v);
    else if (k == "leaky_slope") c.leaky_slope = as_double(key, v);
    else if (k == "use_edge_features") c.use_edge_features = as_bool(key, v);
    else if (k == "averaged_aggregation") c.averaged_aggregation = as_bool(key, v);
    else if (k == "freeze_lambda") c.freeze_lambda = as_bool(key, v);
    else if (k == "encoder") {
      if (v == "set_transformer") c.encoder = EncoderKind::set_transformer;
      else if (v == "deepset") c.encoder = EncoderKind::deepset;
      else throw ConfigError(key + ": expected set_transformer or deepset, got '" + v + "'");
    } else if (k == "seed") c.seed = as_size(key, v);
    else throw ConfigError("unknown configuration key '" + key + "'");
  }
  return c;
}

NodeBatch NodeBatch::make(graph::SparseGraph g, Tensor node_features, std::vector<int> labels,
                          std::vector<std::size_t> global_ids) {
  if (node_features.rank() != 2 || node_features.rows() != g.n_nodes) {
    throw ShapeError("node batch: feature rows differ from the node count");
  }
  if (labels.size() != g.n_nodes || global_ids.size() != g.n_nodes) {
    throw ShapeError("node batch: labels and ids must cover every node");
  }
  NodeBatch b;
  b.edges = layers::EdgeIndex::of(g);
  b.canonical = std::make_shared<const std::vector<std::size_t>>(
      layers::canonical_order(g.row_ptr, g.edge_weight, g.col_idx));
  b.graph = std::move(g);
  b.node_features = std::move(node_features);
  b.labels = std::move(labels);
  b.global_ids = std::move(global_ids);
  return b;
}

EgatModel::EgatModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  if (cfg_.backbone == Backbone::gat) {
    gat1_ = layers::GatLayer(cfg_.in_dim, cfg_.gat_hidden, cfg_.gat_heads, true, rng, cfg_.leaky_slope);
    gat2_ = layers::GatLayer(cfg_.gat_hidden * cfg_.gat_heads, cfg_.gat_hidden, cfg_.gat_heads, true, rng,
                             cfg_.leaky_slope);
  } else {
    gcn1_ = layers::GcnLayer(cfg_.in_dim, cfg_.gcn_hidden, true, rng);
    gcn2_ = layers::GcnLayer(cfg_.gcn_hidden, cfg_.gcn_hidden, true, rng);
  }
  std::size_t width = cfg_.node_dim();
  if (cfg_.use_edge_features) {
    if (cfg_.encoder == EncoderKind::set_transformer) {
      stb_ = layers::SetTransformerBlock(cfg_.edge_dim, cfg_.set_out, cfg_.set_heads, rng);
      aggregator_ = layers::SetAggregator(cfg_.d_max, cfg_.averaged_aggregation);
      aggregator_.set_frozen(cfg_.freeze_lambda);
    } else {
      deepset_ = layers::DeepSet(cfg_.edge_dim, cfg_.deepset_hidden, cfg_.set_out, rng);
    }
    width += cfg_.set_out;
  }
  classifier_ = layers::Dense(width, cfg_.n_classes, rng);
}

Var EgatModel::forward(Tape& t, const NodeBatch& b, const ForwardOptions& opt) {
  const bool drop = opt.training && cfg_.dropout > 0.0;
  if (drop && opt.rng == nullptr) throw ConfigError("model: training with dropout needs a random generator");
  if (b.node_features.cols() != cfg_.in_dim) {
    throw ConfigError("model expects " + std::to_string(cfg_.in_dim) + " node features, the batch has " +
                      std::to_string(b.node_features.cols()));
  }
  auto dropout = [&](Var v) { return drop ? ops::dropout(t, v, cfg_.dropout, true, *opt.rng) : v; };

  Var x = t.constant(b.node_features);
  if (opt.feature_mask) x = ops::mul_row(t, x, *opt.feature_mask);
  Var h;
  if (cfg_.backbone == Backbone::gat) {
    const layers::GatOptions gopt{drop, cfg_.dropout, opt.rng, opt.edge_mask};
    const layers::GatOutput h1 = gat1_.forward(t, dropout(x), b.edges, gopt);
    if (opt.first_alpha != nullptr) *opt.first_alpha = h1.alpha;
    h = gat2_.forward(t, dropout(h1.h), b.edges, gopt).h;
  } else {
    if (opt.edge_mask) throw ConfigError("model: edge masks are only supported with the attention backbone");
    const Tensor coef = layers::gcn_coefficients(b.edges);
    h = gcn2_.forward(t, dropout(gcn1_.forward(t, dropout(x), b.edges, coef)), b.edges, coef);
  }

  if (cfg_.use_edge_features) {
    const Tensor& ef = b.graph.edge_feat;
    if (ef.rank() != 2 || ef.rows() != b.graph.n_edges() || ef.cols() != cfg_.edge_dim) {
      throw ConfigError("model expects an E x " + std::to_string(cfg_.edge_dim) + " edge feature table");
    }
    Var s = ops::gather_rows(t, t.constant(ef), *b.canonical);
    if (opt.edge_mask) s = ops::mul_rows(t, s, ops::gather_rows(t, *opt.edge_mask, *b.canonical));
    Var enc;
    if (cfg_.encoder == EncoderKind::set_transformer) {
      enc = aggregator_.forward(t, stb_.forward(t, s, b.edges.row_ptr, opt.set_attention), b.edges.row_ptr);
    } else {
      enc = deepset_.forward(t, s, b.edges.row_ptr);
    }
    h = ops::concat_cols(t, {h, enc});
  }
  return ops::log_softmax_rows(t, classifier_.forward(t, dropout(h)));
}

Tensor EgatModel::log_probabilities(const NodeBatch& b) {
  Tape t;
  return t.value(forward(t, b));
}

std::vector<int> EgatModel::predict(const NodeBatch& b) {
  const Tensor lp = log_probabilities(b);
  std::vector<int> out(lp.rows());
  for (std::size_t i = 0; i < lp.rows(); ++i) {
    const auto row = lp.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

layers::ParamList EgatModel::all_tensors() {
  layers::ParamList p;
  if (cfg_.backbone == Backbone::gat) {
    gat1_.collect("gat1", p);
    gat2_.collect("gat2", p);
  } else {
    gcn1_.collect("gcn1", p);
    gcn2_.collect("gcn2", p);
  }
  if (cfg_.use_edge_features) {
    if (cfg_.encoder == EncoderKind::set_transformer) {
      stb_.collect("stb", p);
      aggregator_.collect("set", p);
    } else {
      deepset_.collect("deepset", p);
    }
  }
  classifier_.collect("classifier", p);
  return p;
}

layers::ParamList EgatModel::params() {
  layers::ParamList p = all_tensors();
  if (cfg_.freeze_lambda || cfg_.averaged_aggregation) {
    std::erase_if(p, [](const auto& entry) { return entry.first == "set.lambda"; });
  }
  return p;
}

Var loss(Tape& t, Var log_probs, std::span<const int> labels) { return ops::nll_loss(t, log_probs, labels); }

namespace {

constexpr char kMagic[8] = {'E', 'G', 'A', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw DataError("checkpoint truncated while reading " + what);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& is, std::size_t len, const std::string& what) {
  std::string s(len, '\0');
  if (len > 0 && !is.read(s.data(), static_cast<std::streamsize>(len))) {
    throw DataError("checkpoint truncated while reading " + what);
  }
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, ckpt.config_text.size());
  os.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(os, d);
    for (double v : t.values()) put<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw DataError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError(path.string() + " is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto text_len = get<std::uint64_t>(is, "configuration length");
  if (text_len > (1u << 24)) throw DataError("checkpoint configuration text is implausibly long");
  ckpt.config_text = get_string(is, text_len, "configuration");
  const auto count = get<std::uint32_t>(is, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(is, "tensor name length");
    if (name_len > 4096) throw DataError("checkpoint tensor name is implausibly long");
    std::string name = get_string(is, name_len, "tensor name");
    const auto rank = get<std::uint32_t>(is, name + " rank");
    if (rank == 0 || rank > 4) throw DataError("checkpoint tensor " + name + " has rank " + std::to_string(rank));
    numerics::Shape shape;
    std::uint64_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(get<std::uint64_t>(is, name + " shape"));
      total *= shape.back();
      if (total > (1ull << 32)) throw DataError("checkpoint tensor " + name + " is implausibly large");
    }
    std::vector<double> values(total);
    for (double& v : values) v = std::bit_cast<double>(get<std::uint64_t>(is, name + " values"));
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after checkpoint");
  return ckpt;
}

Checkpoint make_checkpoint(EgatModel& m, const std::string& extra_config_text) {
  Checkpoint c;
  c.config_text = m.config().to_text() + extra_config_text;
  for (const auto& [name, t] : m.all_tensors()) c.tensors.emplace_back(name, Tensor(t->shape(), t->values()));
  return c;
}

void load_tensors(EgatModel& m, const Checkpoint& ckpt) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
  for (const auto& [name, t] : m.all_tensors()) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint lacks tensor " + name);
    if (it->second->shape() != t->shape()) {
      throw DataError("checkpoint tensor " + name + " has shape " + numerics::shape_str(it->second->shape()) +
                      ", the model expects " + numerics::shape_str(t->shape()));
    }
    t->values() = it->second->values();
  }
}

EgatModel model_from_checkpoint(const Checkpoint& ckpt) {
  EgatModel m(ModelConfig::from_keys(text::parse_key_values(ckpt.config_text, "checkpoint configuration")));
  load_tensors(m, ckpt);
  return m;
}

}  // namespace egat::model
