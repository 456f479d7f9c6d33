#include "egat/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "egat/errors.hpp"
#include "egat/text.hpp"

namespace egat::harness {

std::string mask_to_string(const edgefeat::FeatureMask& m) {
  std::string s(edgefeat::kEdgeFeatureWidth, '0');
  for (std::size_t c = 0; c < s.size(); ++c)
    if (m.test(c)) s[c] = '1';
  return s;
}

edgefeat::FeatureMask mask_from_string(std::string_view s) {
  if (s.size() != edgefeat::kEdgeFeatureWidth) {
    throw ConfigError("feature_mask: expected " + std::to_string(edgefeat::kEdgeFeatureWidth) +
                      " characters of 0/1, got '" + std::string(s) + "'");
  }
  edgefeat::FeatureMask m;
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (s[c] != '0' && s[c] != '1') throw ConfigError("feature_mask: only '0' and '1' are allowed");
    m.set(c, s[c] == '1');
  }
  return m;
}

namespace {

// One entry per key: how to print the field and how to parse it back.
struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

std::size_t to_size(const std::string& key, const std::string& v) {
  const auto x = text::parse_size(v);
  if (!x) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return *x;
}
double to_double(const std::string& key, const std::string& v) {
  const auto x = text::parse_double(v);
  if (!x) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *x;
}
bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <class T>
Field size_field(T TrainConfig::*member) {
  return {[member](const TrainConfig& c) { return std::to_string(c.*member); },
          [member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*member = static_cast<T>(to_size(k, v));
          }};
}
Field double_field(double TrainConfig::*member) {
  return {[member](const TrainConfig& c) { return text::format_double(c.*member); },
          [member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = to_double(k, v); }};
}
Field bool_field(bool TrainConfig::*member) {
  return {[member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = to_bool(k, v); }};
}
template <class Sub, class T>
Field nested_size(Sub TrainConfig::*outer, T Sub::*inner) {
  return {[=](const TrainConfig& c) { return std::to_string((c.*outer).*inner); },
          [=](TrainConfig& c, const std::string& k, const std::string& v) {
            (c.*outer).*inner = static_cast<T>(to_size(k, v));
          }};
}
template <class Sub>
Field nested_double(Sub TrainConfig::*outer, double Sub::*inner) {
  return {[=](const TrainConfig& c) { return text::format_double((c.*outer).*inner); },
          [=](TrainConfig& c, const std::string& k, const std::string& v) { (c.*outer).*inner = to_double(k, v); }};
}

// Ordered so that to_text() output is stable.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> f;
    f.emplace_back("epochs", size_field(&TrainConfig::epochs));
    f.emplace_back("early_stop_patience", size_field(&TrainConfig::early_stop_patience));
    f.emplace_back("batch_nodes", size_field(&TrainConfig::batch_nodes));
    f.emplace_back("partitions", size_field(&TrainConfig::partitions));
    f.emplace_back("part_size", size_field(&TrainConfig::part_size));
    f.emplace_back("lr", double_field(&TrainConfig::lr));
    f.emplace_back("weight_decay", double_field(&TrainConfig::weight_decay));
    f.emplace_back("dropout", double_field(&TrainConfig::dropout));
    f.emplace_back("leaky_slope", double_field(&TrainConfig::leaky_slope));
    f.emplace_back("gat.layers", size_field(&TrainConfig::gat_layers));
    f.emplace_back("gat.hidden", size_field(&TrainConfig::gat_hidden));
    f.emplace_back("gat.heads", size_field(&TrainConfig::gat_heads));
    f.emplace_back("gcn.hidden", size_field(&TrainConfig::gcn_hidden));
    f.emplace_back("set_transformer.in", size_field(&TrainConfig::set_in));
    f.emplace_back("set_transformer.out", size_field(&TrainConfig::set_out));
    f.emplace_back("set_transformer.heads", size_field(&TrainConfig::set_heads));
    f.emplace_back("set_transformer.blocks", size_field(&TrainConfig::set_blocks));
    f.emplace_back("encoder",
                   Field{[](const TrainConfig& c) {
                           return std::string(c.encoder == model::EncoderKind::set_transformer ? "set_transformer"
                                                                                              : "deepset");
                         },
                         [](TrainConfig& c, const std::string& k, const std::string& v) {
                           if (v == "set_transformer") c.encoder = model::EncoderKind::set_transformer;
                           else if (v == "deepset") c.encoder = model::EncoderKind::deepset;
                           else throw ConfigError(k + ": expected set_transformer or deepset, got '" + v + "'");
                         }});
    f.emplace_back("backbone",
                   Field{[](const TrainConfig& c) { return std::string(c.backbone == model::Backbone::gat ? "gat" : "gcn"); },
                         [](TrainConfig& c, const std::string& k, const std::string& v) {
                           if (v == "gat") c.backbone = model::Backbone::gat;
                           else if (v == "gcn") c.backbone = model::Backbone::gcn;
                           else throw ConfigError(k + ": expected gat or gcn, got '" + v + "'");
                         }});
    f.emplace_back("use_edge_features", bool_field(&TrainConfig::use_edge_features));
    f.emplace_back("averaged_aggregation", bool_field(&TrainConfig::averaged_aggregation));
    f.emplace_back("freeze_lambda", bool_field(&TrainConfig::freeze_lambda));
    f.emplace_back("feature_mask", Field{[](const TrainConfig& c) { return mask_to_string(c.feature_mask); },
                                         [](TrainConfig& c, const std::string&, const std::string& v) {
                                           c.feature_mask = mask_from_string(v);
                                         }});
    f.emplace_back("seed", size_field(&TrainConfig::seed));
    f.emplace_back("seeds", size_field(&TrainConfig::seeds));
    f.emplace_back("split_seed", size_field(&TrainConfig::split_seed));
    f.emplace_back("min_cells_per_gene", size_field(&TrainConfig::min_cells_per_gene));
    f.emplace_back("min_genes_per_cell", size_field(&TrainConfig::min_genes_per_cell));
    f.emplace_back("pca_dims", size_field(&TrainConfig::pca_dims));
    f.emplace_back("knn_k", size_field(&TrainConfig::knn_k));
    f.emplace_back("louvain_resolution", double_field(&TrainConfig::louvain_resolution));
    f.emplace_back("feature_seed", size_field(&TrainConfig::feature_seed));
    using A = edgefeat::AuxConfig;
    f.emplace_back("aux.hidden", nested_size(&TrainConfig::aux, &A::hidden_per_head));
    f.emplace_back("aux.heads", nested_size(&TrainConfig::aux, &A::heads));
    f.emplace_back("aux.epochs", nested_size(&TrainConfig::aux, &A::epochs));
    f.emplace_back("aux.patience", nested_size(&TrainConfig::aux, &A::patience));
    f.emplace_back("aux.lr", nested_double(&TrainConfig::aux, &A::learning_rate));
    f.emplace_back("aux.weight_decay", nested_double(&TrainConfig::aux, &A::weight_decay));
    f.emplace_back("aux.dropout", nested_double(&TrainConfig::aux, &A::dropout));
    f.emplace_back("aux.val_fraction", nested_double(&TrainConfig::aux, &A::val_fraction));
    using N = edgefeat::Node2vecConfig;
    f.emplace_back("n2v.dims", nested_size(&TrainConfig::node2vec, &N::dims));
    f.emplace_back("n2v.walks_per_node", nested_size(&TrainConfig::node2vec, &N::walks_per_node));
    f.emplace_back("n2v.walk_length", nested_size(&TrainConfig::node2vec, &N::walk_length));
    f.emplace_back("n2v.window", nested_size(&TrainConfig::node2vec, &N::window));
    f.emplace_back("n2v.p", nested_double(&TrainConfig::node2vec, &N::p));
    f.emplace_back("n2v.q", nested_double(&TrainConfig::node2vec, &N::q));
    f.emplace_back("n2v.negatives", nested_size(&TrainConfig::node2vec, &N::negatives));
    f.emplace_back("n2v.epochs", nested_size(&TrainConfig::node2vec, &N::epochs));
    f.emplace_back("n2v.lr", nested_double(&TrainConfig::node2vec, &N::learning_rate));
    f.emplace_back("curvature_weight_floor", double_field(&TrainConfig::curvature_weight_floor));
    f.emplace_back("per_graph_scalar_stats", bool_field(&TrainConfig::per_graph_scalar_stats));
    return f;
  }();
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(epochs, "epochs");
  positive(batch_nodes, "batch_nodes");
  positive(part_size, "part_size");
  positive(gat_hidden, "gat.hidden");
  positive(gat_heads, "gat.heads");
  positive(gcn_hidden, "gcn.hidden");
  positive(set_out, "set_transformer.out");
  positive(set_heads, "set_transformer.heads");
  positive(seeds, "seeds");
  positive(pca_dims, "pca_dims");
  positive(knn_k, "knn_k");
  if (early_stop_patience > epochs) throw ConfigError("early_stop_patience must not exceed epochs");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite non-negative number");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky_slope must be non-negative");
  if (gat_layers != 2) throw ConfigError("gat.layers: only the two-layer network is implemented");
  if (set_in != edgefeat::kEdgeFeatureWidth) {
    throw ConfigError("set_transformer.in must equal the edge feature width " +
                      std::to_string(edgefeat::kEdgeFeatureWidth));
  }
  if (set_blocks != 1) throw ConfigError("set_transformer.blocks: only one block is supported");
  if (set_in % set_heads != 0) throw ConfigError("set_transformer.heads must divide set_transformer.in");
  if (!(louvain_resolution > 0.0)) throw ConfigError("louvain_resolution must be positive");
  if (!(curvature_weight_floor >= 0.0)) throw ConfigError("curvature_weight_floor must be non-negative");
  node2vec.validate();
  if (aux.epochs == 0 || aux.heads == 0 || aux.hidden_per_head == 0) throw ConfigError("aux sizes must be positive");
  if (!(aux.val_fraction > 0.0 && aux.val_fraction < 1.0)) throw ConfigError("aux.val_fraction must lie in (0, 1)");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [key, f] : fields()) os << key << " = " << f.get(*this) << '\n';
  return os.str();
}

TrainConfig TrainConfig::from_text(std::string_view text_in, std::string_view source) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const auto& [key, f] : fields()) m.emplace(key, &f);
    return m;
  }();
  TrainConfig c;
  for (const auto& [key, value] : text::parse_key_values(text_in, source)) {
    if (key.rfind("model.", 0) == 0) continue;  // checkpoint echo of the model section
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(std::string(source) + ": unknown key '" + key + "'");
    it->second->set(c, key, value);
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str(), path.string());
}

edgefeat::EdgeFeatureConfig TrainConfig::edge_feature_config() const {
  edgefeat::EdgeFeatureConfig e;
  e.aux = aux;
  e.aux.seed = feature_seed;
  e.aux.leaky_slope = leaky_slope;
  e.node2vec = node2vec;
  e.node2vec.seed = feature_seed;
  e.weight_floor_fraction = curvature_weight_floor;
  e.per_graph_scalar_stats = per_graph_scalar_stats;
  return e;
}

model::ModelConfig TrainConfig::model_config(std::size_t in_dim, std::size_t n_classes, std::size_t d_max,
                                             std::uint64_t trial_seed) const {
  model::ModelConfig m;
  m.in_dim = in_dim;
  m.n_classes = n_classes;
  m.backbone = backbone;
  m.gat_hidden = gat_hidden;
  m.gat_heads = gat_heads;
  m.gcn_hidden = gcn_hidden;
  m.edge_dim = set_in;
  m.set_out = set_out;
  m.set_heads = set_heads;
  m.set_blocks = set_blocks;
  m.d_max = d_max;
  m.dropout = dropout;
  m.leaky_slope = leaky_slope;
  m.use_edge_features = use_edge_features;
  m.averaged_aggregation = averaged_aggregation;
  m.freeze_lambda = freeze_lambda;
  m.encoder = encoder;
  m.seed = trial_seed;
  m.validate();
  return m;
}

}  // namespace egat::harness
