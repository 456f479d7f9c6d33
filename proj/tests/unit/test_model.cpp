#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "egat/errors.hpp"
#include "egat/model/egat_model.hpp"
#include "egat/numerics/grad_check.hpp"
#include "egat/text.hpp"
#include "support.hpp"

using namespace egat;
using namespace egat::model;

namespace {

ModelConfig small_config(std::size_t in_dim, std::size_t classes, std::size_t d_max) {
  ModelConfig c;
  c.in_dim = in_dim;
  c.n_classes = classes;
  c.gat_hidden = 3;
  c.gat_heads = 2;
  c.gcn_hidden = 5;
  c.edge_dim = 6;
  c.set_out = 4;
  c.set_heads = 2;
  c.deepset_hidden = 5;
  c.d_max = d_max;
  c.dropout = 0.3;
  return c;
}

NodeBatch random_batch(std::size_t n, std::size_t in_dim, std::size_t edge_dim, std::size_t classes,
                       std::mt19937_64& rng, double p = 0.2) {
  graph::SparseGraph g = test::random_graph(n, p, rng);
  g.edge_feat = test::random_tensor({g.n_edges(), edge_dim}, rng);
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng() % classes);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 100);
  return NodeBatch::make(std::move(g), test::random_tensor({n, in_dim}, rng), std::move(labels), std::move(ids));
}

}  // namespace

TEST_CASE("model: outputs are log-probabilities of the expected shape") {
  std::mt19937_64 rng(1);
  const NodeBatch b = random_batch(40, 7, 18, 3, rng);
  ModelConfig cfg;
  cfg.in_dim = 7;
  cfg.n_classes = 3;
  cfg.d_max = 2 * b.graph.max_degree();
  EgatModel m(cfg);
  const Tensor lp = m.log_probabilities(b);
  REQUIRE(lp.rows() == 40);
  REQUIRE(lp.cols() == 3);
  for (std::size_t i = 0; i < 40; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += std::exp(lp.at(i, c));
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  // 64 + 8 = 72 inputs to the classifier
  for (const auto& [name, t] : m.params())
    if (name == "classifier.weight") CHECK(t->rows() == 72);
}

TEST_CASE("model: without edge features it is a two-layer GAT plus dense layer") {
  std::mt19937_64 rng(2);
  const NodeBatch b = random_batch(25, 5, 18, 2, rng);
  ModelConfig cfg = small_config(5, 2, 50);
  cfg.use_edge_features = false;
  EgatModel m(cfg);
  for (const auto& [name, t] : m.params()) {
    CHECK(name.rfind("stb", 0) != 0);
    CHECK(name.rfind("set", 0) != 0);
  }
  Tape t;
  const Var h1 = m.gat1().forward(t, t.constant(b.node_features), b.edges).h;
  const Var h2 = m.gat2().forward(t, h1, b.edges).h;
  Tensor* w = nullptr;
  Tensor* bias = nullptr;
  for (const auto& [name, p] : m.params()) {
    if (name == "classifier.weight") w = p;
    if (name == "classifier.bias") bias = p;
  }
  REQUIRE(w != nullptr);
  const Var logits = numerics::add_row(t, numerics::matmul(t, h2, t.constant(*w)), t.constant(*bias));
  const Tensor expect = t.value(numerics::log_softmax_rows(t, logits));
  CHECK(m.log_probabilities(b) == expect);
}

TEST_CASE("model: gradients through the full composite match finite differences") {
  struct Variant {
    const char* name;
    Backbone backbone;
    EncoderKind encoder;
    bool averaged, edges;
  };
  const Variant variants[] = {{"set transformer", Backbone::gat, EncoderKind::set_transformer, false, true},
                              {"averaged", Backbone::gat, EncoderKind::set_transformer, true, true},
                              {"deepset", Backbone::gat, EncoderKind::deepset, false, true},
                              {"gcn", Backbone::gcn, EncoderKind::deepset, false, true},
                              {"plain", Backbone::gat, EncoderKind::set_transformer, false, false}};
  for (const Variant& v : variants) {
    CAPTURE(v.name);
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      std::mt19937_64 rng(seed + 10);
      const NodeBatch b = random_batch(14, 4, 6, 3, rng, 0.25);
      ModelConfig cfg = small_config(4, 3, 2 * b.graph.max_degree());
      cfg.backbone = v.backbone;
      cfg.encoder = v.encoder;
      cfg.averaged_aggregation = v.averaged;
      cfg.use_edge_features = v.edges;
      cfg.seed = seed;
      EgatModel m(cfg);
      Tensor fmask = test::random_param({4}, rng);
      Tensor emask = test::random_param({b.graph.n_edges()}, rng);
      auto ptrs = layers::tensors_of(m.params());
      ptrs.push_back(&fmask);
      if (v.backbone == Backbone::gat) ptrs.push_back(&emask);
      auto f = [&](Tape& t) {
        Rng drop(seed);
        ForwardOptions opt;
        opt.training = true;
        opt.rng = &drop;
        opt.feature_mask = t.parameter(fmask);
        if (v.backbone == Backbone::gat) opt.edge_mask = t.parameter(emask);
        return loss(t, m.forward(t, b, opt), b.labels);
      };
      const auto report = numerics::grad_check(f, ptrs, {1e-6, 25, seed, 1e-5});
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("model: loss values") {
  Tape t;
  const std::vector<int> labels{0, 2, 1};
  // uniform over 4 classes
  const Var u = t.constant(Tensor::matrix(3, 4, std::log(0.25)));
  CHECK(t.value(loss(t, u, labels))[0] == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  // near one-hot at the right classes
  Tensor sure = Tensor::matrix(3, 3, -50.0);
  for (std::size_t i = 0; i < 3; ++i) sure.at(i, static_cast<std::size_t>(labels[i])) = std::log1p(-2 * std::exp(-50.0));
  CHECK(t.value(loss(t, t.constant(sure), labels))[0] < 1e-15);
  // hand value: -(ln .5 + ln .2 + ln .7) / 3
  const Tensor lp = Tensor::matrix({{std::log(0.5), std::log(0.3), std::log(0.2)},
                                    {std::log(0.1), std::log(0.7), std::log(0.2)},
                                    {std::log(0.2), std::log(0.7), std::log(0.1)}});
  const double hand = -(std::log(0.5) + std::log(0.2) + std::log(0.7)) / 3.0;
  CHECK(t.value(loss(t, t.constant(lp), labels))[0] == doctest::Approx(hand).epsilon(1e-15));
  // unlabelled rows are skipped
  const std::vector<int> partial{0, -1, -1};
  CHECK(t.value(loss(t, t.constant(lp), partial))[0] == doctest::Approx(-std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("model: predictions are deterministic and follow node relabelling") {
  std::mt19937_64 rng(3);
  const std::size_t n = 30;
  const NodeBatch b = random_batch(n, 6, 18, 4, rng);
  ModelConfig cfg;
  cfg.in_dim = 6;
  cfg.n_classes = 4;
  cfg.d_max = 2 * b.graph.max_degree();
  EgatModel m(cfg);
  const auto pred = m.predict(b);
  CHECK(m.predict(b) == pred);
  const Tensor lp = m.log_probabilities(b);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = lp.row(i);
    CHECK(pred[i] == std::max_element(row.begin(), row.end()) - row.begin());
  }

  std::vector<std::size_t> perm(n);  // new id -> old id
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
  std::vector<graph::Edge> edges;
  std::vector<std::vector<double>> feat_of;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t e = b.graph.row_ptr[u]; e < b.graph.row_ptr[u + 1]; ++e)
      edges.push_back({inv[u], inv[b.graph.col_idx[e]], b.graph.edge_weight[e]});
  graph::SparseGraph pg = graph::SparseGraph::from_edges(n, edges);
  pg.edge_feat = Tensor::matrix(pg.n_edges(), 18);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t e = pg.row_ptr[u]; e < pg.row_ptr[u + 1]; ++e) {
      const std::size_t old = b.graph.find_edge(perm[u], perm[pg.col_idx[e]]);
      for (std::size_t c = 0; c < 18; ++c) pg.edge_feat.at(e, c) = b.graph.edge_feat.at(old, c);
    }
  Tensor px = Tensor::matrix(n, 6);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 6; ++c) px.at(i, c) = b.node_features.at(perm[i], c);
  const NodeBatch pb = NodeBatch::make(std::move(pg), std::move(px), std::vector<int>(n, 0), std::vector<std::size_t>(n, 0));
  const Tensor plp = m.log_probabilities(pb);
  const auto ppred = m.predict(pb);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(ppred[i] == pred[perm[i]]);
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(plp.at(i, c) - lp.at(perm[i], c)) < 1e-12);
  }
}

TEST_CASE("model: masks of ones leave the output unchanged, oversized sets are rejected") {
  std::mt19937_64 rng(4);
  const NodeBatch b = random_batch(20, 5, 18, 3, rng);
  ModelConfig cfg;
  cfg.in_dim = 5;
  cfg.n_classes = 3;
  cfg.d_max = b.graph.max_degree();
  EgatModel m(cfg);
  Tape t;
  ForwardOptions opt;
  opt.feature_mask = t.constant(Tensor({5}, 1.0));
  opt.edge_mask = t.constant(Tensor({b.graph.n_edges()}, 1.0));
  CHECK(t.value(m.forward(t, b, opt)) == m.log_probabilities(b));

  cfg.d_max = b.graph.max_degree() - 1;
  EgatModel tight(cfg);
  CHECK_THROWS_AS(tight.log_probabilities(b), ConfigError);
  cfg.d_max = 0;
  CHECK_THROWS_AS(EgatModel{cfg}, ConfigError);
  cfg.d_max = 10;
  cfg.set_heads = 4;  // 18 is not divisible by 4
  CHECK_THROWS_AS(EgatModel{cfg}, ConfigError);
}

TEST_CASE("model: frozen lambda is excluded from training and keeps its value") {
  ModelConfig cfg = small_config(4, 2, 8);
  cfg.freeze_lambda = true;
  EgatModel m(cfg);
  bool listed = false;
  for (const auto& [name, t] : m.params()) listed = listed || name == "set.lambda";
  CHECK_FALSE(listed);
  bool stored = false;
  for (const auto& [name, t] : m.all_tensors()) stored = stored || name == "set.lambda";
  CHECK(stored);
}

TEST_CASE("checkpoint: bit-exact round trip and malformed files") {
  test::TempDir dir("ckpt");
  ModelConfig cfg;
  cfg.in_dim = 9;
  cfg.n_classes = 3;
  cfg.d_max = 40;
  cfg.seed = 17;
  cfg.encoder = EncoderKind::deepset;
  cfg.dropout = 0.25;
  EgatModel m(cfg);
  // values that stress the encoding
  auto tensors = m.all_tensors();
  tensors[0].second->values()[0] = -0.0;
  tensors[0].second->values()[1] = 4.9e-324;
  tensors[0].second->values()[2] = 1.0 / 3.0;
  const Checkpoint ck = make_checkpoint(m, "epochs = 5\n");
  write_checkpoint(dir / "m.ckpt", ck);
  const Checkpoint back = read_checkpoint(dir / "m.ckpt");
  CHECK(back.config_text == ck.config_text);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    CHECK(back.tensors[i].first == ck.tensors[i].first);
    CHECK(back.tensors[i].second == ck.tensors[i].second);
  }
  CHECK(std::signbit(back.tensors[0].second.values()[0]));
  EgatModel restored = model_from_checkpoint(back);
  CHECK(restored.config().to_text() == m.config().to_text());
  std::mt19937_64 rng(5);
  const NodeBatch b = random_batch(15, 9, 18, 3, rng);
  CHECK(restored.log_probabilities(b) == m.log_probabilities(b));

  {
    std::ofstream os(dir / "bad.ckpt", std::ios::binary);
    os << "NOTACKPT";
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), DataError);
  {
    std::ifstream is(dir / "m.ckpt", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::ofstream os(dir / "short.ckpt", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "short.ckpt"), DataError);

  Checkpoint wrong = ck;
  wrong.tensors.pop_back();
  CHECK_THROWS_AS(model_from_checkpoint(wrong), DataError);
}

TEST_CASE("model configuration text") {
  ModelConfig c;
  c.in_dim = 12;
  c.n_classes = 7;
  c.backbone = Backbone::gcn;
  c.dropout = 0.1;
  c.averaged_aggregation = true;
  c.d_max = 33;
  const auto kv = text::parse_key_values(c.to_text() + "# comment\nunrelated = 1\n", "test");
  CHECK(ModelConfig::from_keys(kv).to_text() == c.to_text());
  CHECK_THROWS_AS(ModelConfig::from_keys({{"model.heads", "3"}}), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_keys({{"model.dropout", "half"}}), ConfigError);
  CHECK_THROWS_AS(text::parse_key_values("a = 1\na = 2\n", "x"), ConfigError);
  CHECK_THROWS_AS(text::parse_key_values("just words\n", "x"), ConfigError);
}
