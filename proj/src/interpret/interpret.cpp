#include "egat/interpret/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "egat/errors.hpp"
#include "egat/graph/graph_io.hpp"
#include "egat/numerics/adagrad.hpp"
#include "egat/numerics/ops.hpp"
#include "egat/text.hpp"

namespace egat::interpret {

namespace ops = numerics;
using numerics::Tensor;

std::vector<double> attention_adjacency(model::EgatModel& m, const model::NodeBatch& b) {
  const auto& cfg = m.config();
  if (!cfg.use_edge_features || cfg.encoder != model::EncoderKind::set_transformer) {
    throw ConfigError("attention adjacency needs a model that encodes edge sets with the set transformer");
  }
  std::vector<double> probs;
  model::ForwardOptions fo;
  fo.set_attention = &probs;
  {
    layers::Tape t;
    m.forward(t, b, fo);
  }
  const auto& row_ptr = *b.edges.row_ptr;
  const auto& canon = *b.canonical;
  const std::size_t heads = cfg.set_heads;
  std::vector<double> w(b.graph.n_edges(), 0.0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < b.graph.n_nodes; ++i) {
    const std::size_t n = row_ptr[i + 1] - row_ptr[i];
    for (std::size_t h = 0; h < heads; ++h) {
      const double* p = probs.data() + offset + h * n * n;
      for (std::size_t k = 0; k < n; ++k) {
        double col = 0.0;
        for (std::size_t q = 0; q < n; ++q) col += p[q * n + k];
        w[canon[row_ptr[i] + k]] += col / static_cast<double>(n * heads);
      }
    }
    offset += heads * n * n;
  }
  if (offset != probs.size()) throw InternalError("attention adjacency: probability layout mismatch");
  return w;
}

graph::SparseGraph reweighted(const graph::SparseGraph& g, const std::vector<double>& weights) {
  if (weights.size() != g.n_edges()) throw ShapeError("reweighted: one weight per edge is required");
  graph::SparseGraph out;
  out.n_nodes = g.n_nodes;
  out.row_ptr = g.row_ptr;
  out.col_idx = g.col_idx;
  out.edge_weight = weights;
  return out;
}

namespace {

std::vector<FeatureScore> ranked(std::vector<double> scores, std::size_t top_k) {
  std::vector<FeatureScore> out;
  for (std::size_t f = 0; f < scores.size(); ++f) out.push_back({f, scores[f]});
  std::stable_sort(out.begin(), out.end(), [](const FeatureScore& a, const FeatureScore& b) { return a.score > b.score; });
  out.resize(std::min(top_k, out.size()));
  return out;
}

std::vector<std::size_t> rank_indices(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

const Tensor& first_weight(model::EgatModel& m) {
  if (m.config().backbone != model::Backbone::gat) throw ConfigError("feature saliency needs the GAT backbone");
  return m.gat1().weight();
}

}  // namespace

std::vector<FeatureScore> feature_saliency(model::EgatModel& m, std::size_t top_k) {
  const Tensor& w = first_weight(m);
  const std::size_t heads = m.config().gat_heads, per = m.config().gat_hidden;
  std::vector<double> scores(w.rows(), 0.0);
  for (std::size_t f = 0; f < w.rows(); ++f) {
    double ss = 0.0;
    for (std::size_t c = 0; c < per; ++c) {
      double mean = 0.0;
      for (std::size_t h = 0; h < heads; ++h) mean += w.at(f, h * per + c);
      mean /= static_cast<double>(heads);
      ss += mean * mean;
    }
    scores[f] = std::sqrt(ss);
  }
  return ranked(std::move(scores), top_k);
}

std::vector<std::vector<FeatureScore>> feature_saliency_per_head(model::EgatModel& m, std::size_t top_k) {
  const Tensor& w = first_weight(m);
  const std::size_t heads = m.config().gat_heads, per = m.config().gat_hidden;
  std::vector<std::vector<FeatureScore>> out;
  for (std::size_t h = 0; h < heads; ++h) {
    std::vector<double> scores(w.rows(), 0.0);
    for (std::size_t f = 0; f < w.rows(); ++f) {
      double ss = 0.0;
      for (std::size_t c = 0; c < per; ++c) ss += w.at(f, h * per + c) * w.at(f, h * per + c);
      scores[f] = std::sqrt(ss);
    }
    out.push_back(ranked(std::move(scores), top_k));
  }
  return out;
}

std::vector<std::size_t> ExplanationResult::top_features(std::size_t k) const { return rank_indices(feature_mask, k); }
std::vector<std::size_t> ExplanationResult::top_edges(std::size_t k) const { return rank_indices(edge_mask, k); }

std::string ExplanationResult::to_record(std::size_t k_features, std::size_t k_edges,
                                        const std::vector<std::string>& feature_names) const {
  std::ostringstream os;
  os << "{node: " << node << ", predicted_class: " << predicted_class << ", top_features: [";
  const auto tf = top_features(k_features);
  for (std::size_t i = 0; i < tf.size(); ++i) {
    os << (i ? ", " : "");
    if (feature_names.size() == feature_mask.size()) {
      os << feature_names[tf[i]];
    } else {
      os << tf[i];
    }
    os << ':' << text::format_double(feature_mask[tf[i]]);
  }
  os << "], top_edges: [";
  const auto te = top_edges(k_edges);
  for (std::size_t i = 0; i < te.size(); ++i) {
    os << (i ? ", " : "") << edge_src[te[i]] << '-' << edge_dst[te[i]] << ':' << text::format_double(edge_mask[te[i]]);
  }
  os << "], retention: " << text::format_double(retention) << "}";
  return os.str();
}

std::vector<std::size_t> k_hop_nodes(const graph::SparseGraph& g, std::size_t node, std::size_t hops) {
  if (node >= g.n_nodes) throw IndexError("node " + std::to_string(node) + " is outside the graph");
  std::vector<char> seen(g.n_nodes, 0);
  std::vector<std::size_t> frontier{node}, all{node};
  seen[node] = 1;
  for (std::size_t h = 0; h < hops; ++h) {
    std::vector<std::size_t> next;
    for (std::size_t u : frontier)
      for (std::size_t v : g.neighbors(u))
        if (!seen[v]) {
          seen[v] = 1;
          next.push_back(v);
          all.push_back(v);
        }
    frontier = std::move(next);
  }
  std::sort(all.begin(), all.end());
  return all;
}

model::NodeBatch sub_batch(const model::NodeBatch& b, const std::vector<std::size_t>& nodes) {
  graph::Subgraph sub = graph::induced_subgraph(b.graph, nodes);
  Tensor x = Tensor::matrix(nodes.size(), b.node_features.cols());
  std::vector<int> labels;
  std::vector<std::size_t> ids;
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    for (std::size_t j = 0; j < x.cols(); ++j) x.at(r, j) = b.node_features.at(nodes[r], j);
    labels.push_back(b.labels[nodes[r]]);
    ids.push_back(b.global_ids[nodes[r]]);
  }
  return model::NodeBatch::make(std::move(sub.graph), std::move(x), std::move(labels), std::move(ids));
}

double retention(model::EgatModel& m, const model::NodeBatch& b, std::size_t node, int cls,
                 const std::vector<double>& edge_mask, const std::vector<double>& feature_mask) {
  if (edge_mask.size() != b.graph.n_edges() || feature_mask.size() != b.node_features.cols()) {
    throw ShapeError("retention: mask sizes do not match the batch");
  }
  layers::Tape t;
  model::ForwardOptions fo;
  fo.edge_mask = t.constant(Tensor::vector(edge_mask));
  fo.feature_mask = t.constant(Tensor::vector(feature_mask));
  const Tensor& lp = t.value(m.forward(t, b, fo));
  return std::exp(lp.at(node, static_cast<std::size_t>(cls)));
}

namespace {

// mean over elements of the binary entropy of m, with m kept off {0, 1}.
layers::Var mean_entropy(layers::Tape& t, layers::Var m) {
  constexpr double eps = 1e-12;
  const layers::Var p = ops::affine(t, m, 1.0 - 2.0 * eps, eps);
  const layers::Var q = ops::affine(t, p, -1.0, 1.0);
  const layers::Var h = ops::add(t, ops::mul(t, p, ops::log(t, p)), ops::mul(t, q, ops::log(t, q)));
  return ops::scale(t, ops::mean_all(t, h), -1.0);
}

}  // namespace

ExplanationResult explain_node(model::EgatModel& m, const model::NodeBatch& b, std::size_t node,
                               const ExplainConfig& cfg) {
  if (cfg.steps == 0 || !(cfg.learning_rate > 0.0)) throw ConfigError("explain: steps and learning rate must be positive");
  ExplanationResult r;
  r.node = node;
  r.subgraph_nodes = k_hop_nodes(b.graph, node, cfg.hops);
  const model::NodeBatch sb = sub_batch(b, r.subgraph_nodes);
  const auto local = static_cast<std::size_t>(
      std::lower_bound(r.subgraph_nodes.begin(), r.subgraph_nodes.end(), node) - r.subgraph_nodes.begin());

  const Tensor base = m.log_probabilities(sb);
  std::size_t best = 0;
  for (std::size_t c = 1; c < base.cols(); ++c)
    if (base.at(local, c) > base.at(local, best)) best = c;
  r.predicted_class = static_cast<int>(best);
  r.original_probability = std::exp(base.at(local, best));

  const std::size_t n_edges = sb.graph.n_edges(), n_feat = sb.node_features.cols();
  for (std::size_t u = 0; u < sb.graph.n_nodes; ++u)
    for (std::size_t e = sb.graph.row_ptr[u]; e < sb.graph.row_ptr[u + 1]; ++e) {
      r.edge_src.push_back(r.subgraph_nodes[u]);
      r.edge_dst.push_back(r.subgraph_nodes[sb.graph.col_idx[e]]);
    }

  // Edge logits start near 1 (mask ~0.73) with a little jitter. Feature
  // logits start at exactly 0: at mask 0.5 the entropy term has no slope, so
  // the prediction loss and the size penalty pick each feature's direction.
  model::Rng rng(cfg.seed);
  std::normal_distribution<double> jitter(0.0, 0.1);
  Tensor edge_logit({n_edges});
  Tensor feat_logit({n_feat});
  for (auto& v : edge_logit.values()) v = 1.0 + jitter(rng);
  edge_logit.set_requires_grad(true);
  feat_logit.set_requires_grad(true);
  numerics::Adam opt({&edge_logit, &feat_logit}, cfg.learning_rate);
  const std::vector<int> target{r.predicted_class};

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    opt.zero_grad();
    layers::Tape t;
    const layers::Var em = ops::sigmoid(t, t.parameter(edge_logit));
    const layers::Var fm = ops::sigmoid(t, t.parameter(feat_logit));
    model::ForwardOptions fo;
    fo.edge_mask = em;
    fo.feature_mask = fm;
    const layers::Var lp = ops::gather_rows(t, m.forward(t, sb, fo), {local});
    layers::Var obj = ops::nll_loss(t, lp, target);
    obj = ops::add(t, obj, ops::scale(t, ops::mean_all(t, em), cfg.size_weight));
    obj = ops::add(t, obj, ops::scale(t, mean_entropy(t, em), cfg.entropy_weight));
    obj = ops::add(t, obj, ops::scale(t, ops::mean_all(t, fm), cfg.feature_size_weight));
    obj = ops::add(t, obj, ops::scale(t, mean_entropy(t, fm), cfg.feature_entropy_weight));
    const double value = t.value(obj)[0];
    if (!std::isfinite(value)) {
      throw NumericalError("explain: objective became non-finite at step " + std::to_string(step) + " for node " +
                           std::to_string(node));
    }
    r.objective.push_back(value);
    t.backward(obj);
    opt.step();
  }
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (double v : edge_logit.values()) r.edge_mask.push_back(sig(v));
  for (double v : feat_logit.values()) r.feature_mask.push_back(sig(v));
  r.retention = retention(m, sb, local, r.predicted_class, r.edge_mask, r.feature_mask);
  return r;
}

void export_embedding_inputs(const std::filesystem::path& stem, const graph::SparseGraph& g,
                             const std::vector<double>& weights, const NodeTable& meta) {
  if (meta.rows.size() != g.n_nodes) throw ShapeError("export: one metadata row per node is required");
  graph::write_graph(std::filesystem::path(stem.string() + ".edges"), reweighted(g, weights));
  std::ofstream os(stem.string() + ".nodes.csv");
  if (!os) throw DataError("cannot write " + stem.string() + ".nodes.csv");
  os << "node";
  for (const auto& c : meta.columns) os << ',' << text::csv_field(c);
  os << '\n';
  for (std::size_t i = 0; i < meta.rows.size(); ++i) {
    if (meta.rows[i].size() != meta.columns.size()) throw ShapeError("export: metadata row width differs");
    os << i;
    for (const auto& v : meta.rows[i]) os << ',' << text::csv_field(v);
    os << '\n';
  }
  if (!os) throw DataError("write to " + stem.string() + ".nodes.csv failed");
}

std::pair<graph::SparseGraph, NodeTable> read_embedding_inputs(const std::filesystem::path& stem) {
  graph::SparseGraph g = graph::read_graph(std::filesystem::path(stem.string() + ".edges"));
  std::ifstream is(stem.string() + ".nodes.csv");
  if (!is) throw DataError("cannot open " + stem.string() + ".nodes.csv");
  NodeTable meta;
  std::string line;
  if (!std::getline(is, line)) throw DataError(stem.string() + ".nodes.csv: empty file");
  auto head = text::split_csv(line);
  if (!head || head->empty() || (*head)[0] != "node") throw DataError(stem.string() + ".nodes.csv: bad header");
  meta.columns.assign(head->begin() + 1, head->end());
  while (std::getline(is, line)) {
    auto f = text::split_csv(line);
    if (!f || f->size() != meta.columns.size() + 1) throw DataError(stem.string() + ".nodes.csv: bad row");
    const auto id = text::parse_size((*f)[0]);
    if (!id || *id != meta.rows.size()) throw DataError(stem.string() + ".nodes.csv: node ids must run 0..n-1");
    meta.rows.emplace_back(f->begin() + 1, f->end());
  }
  if (meta.rows.size() != g.n_nodes) throw DataError(stem.string() + ": node table and graph disagree");
  return {std::move(g), std::move(meta)};
}

}  // namespace egat::interpret
