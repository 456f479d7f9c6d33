#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "egat/errors.hpp"
#include "egat/harness/ablation.hpp"
#include "support.hpp"

using namespace egat;
using namespace egat::harness;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.min_genes_per_cell = 5;
  c.pca_dims = 10;
  c.epochs = 12;
  c.early_stop_patience = 4;
  c.part_size = 32;
  c.batch_nodes = 64;
  c.gat_hidden = 4;
  c.gat_heads = 2;
  c.seeds = 2;
  c.aux.epochs = 30;
  c.aux.patience = 10;
  c.aux.hidden_per_head = 4;
  c.aux.heads = 8;
  c.node2vec.dims = 8;
  c.node2vec.walks_per_node = 2;
  c.node2vec.walk_length = 12;
  c.node2vec.window = 3;
  return c;
}

const PreparedData& tiny_data() {
  static const PreparedData data = [] {
    ingest::SyntheticSpec s;
    s.n_cells = 300;
    s.n_genes = 60;
    s.n_clusters = 3;
    s.n_batches = 2;
    s.n_classes = 3;
    s.seed = 11;
    return prepare(ingest::generate_synthetic(s), tiny_config());
  }();
  return data;
}

// Two-pass mean and sample deviation in long double, independent of the
// library routine.
std::pair<long double, long double> mean_sd(const std::vector<double>& v) {
  long double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  long double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (v.size() - 1))};
}

}  // namespace

TEST_CASE("confidence interval: Student-t hand values") {
  // Quantiles t_{0.975, dof} from standard tables (15 significant digits).
  const double t1 = 12.7062047361747, t5 = 2.57058183563631;
  CHECK(student_t_quantile(0.975, 1) == doctest::Approx(t1).epsilon(1e-13));
  CHECK(student_t_quantile(0.975, 5) == doctest::Approx(t5).epsilon(1e-13));

  const std::vector<double> two{0.8, 0.9};
  const Interval a = confidence_interval(two);
  CHECK(std::abs(a.mean - 0.85) < 1e-12);
  CHECK(std::abs(a.half_width - t1 * 0.05) < 1e-12);
  CHECK(std::abs(a.half_width - 0.635310236808735) < 1e-12);
  CHECK(a.lo < 0.85);
  CHECK(a.hi > 1.0);  // raw, not clipped

  const std::vector<double> six{0.81, 0.84, 0.79, 0.88, 0.86, 0.83};
  const Interval b = confidence_interval(six);
  const auto [m, sd] = mean_sd(six);
  CHECK(std::abs(b.mean - static_cast<double>(m)) < 1e-12);
  CHECK(std::abs(b.sd - static_cast<double>(sd)) < 1e-12);
  CHECK(std::abs(b.half_width - static_cast<double>(t5 * sd / std::sqrt(6.0L))) < 1e-12);
  CHECK(b.lo <= b.mean);
  CHECK(b.mean <= b.hi);
}

TEST_CASE("confidence interval: degenerate inputs") {
  const std::vector<double> same(6, 0.9);
  const Interval ci = confidence_interval(same);
  CHECK(ci.half_width == 0.0);
  CHECK(ci.lo == ci.hi);
  const std::vector<double> one{0.5};
  CHECK_THROWS_AS(confidence_interval(one), StatError);
  CHECK_THROWS_AS(confidence_interval(std::vector<double>{}), StatError);
  CHECK(exit_code(ErrorKind::statistics) == 2);
}

TEST_CASE("accuracy: hand cases and confusion-matrix recount") {
  const std::vector<int> l{0, 1, 2, 1, 0};
  CHECK(accuracy(l, l) == 1.0);
  const std::vector<int> bin{0, 1, 0, 1, 0, 1};
  const std::vector<int> all0(6, 0);
  CHECK(accuracy(all0, bin) == 0.5);
  const std::vector<int> some_unlabelled{-1, 1, -1};
  CHECK(accuracy(std::vector<int>{0, 1, 1}, some_unlabelled) == 1.0);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 50 + rep, c = 4;
    std::vector<int> pred(n), lab(n);
    std::vector<std::vector<int>> confusion(c, std::vector<int>(c, 0));
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng() % c);
      lab[i] = static_cast<int>(rng() % c);
      ++confusion[static_cast<std::size_t>(lab[i])][static_cast<std::size_t>(pred[i])];
    }
    int trace = 0;
    for (std::size_t k = 0; k < c; ++k) trace += confusion[k][k];
    CHECK(accuracy(pred, lab) == static_cast<double>(trace) / static_cast<double>(n));
  }
}

TEST_CASE("train config: defaults, text round trip and validation") {
  const TrainConfig d;
  CHECK(d.epochs == 1000);
  CHECK(d.early_stop_patience == 100);
  CHECK(d.batch_nodes == 256);
  CHECK(d.weight_decay == 0.0005);
  CHECK(d.dropout == 0.5);
  CHECK(d.leaky_slope == 0.2);
  CHECK(d.gat_heads == 8);
  CHECK(d.gat_hidden == 8);
  CHECK(d.set_in == 18);
  CHECK(d.set_out == 8);
  CHECK(d.set_heads == 2);
  CHECK(d.set_blocks == 1);
  CHECK(d.seeds == 6);
  CHECK(d.feature_mask.all());

  TrainConfig c = tiny_config();
  c.lr = 0.0123;
  c.feature_mask = edgefeat::mask_of({edgefeat::FeatureBlock::batch, edgefeat::FeatureBlock::node2vec});
  c.encoder = model::EncoderKind::deepset;
  const std::string text = c.to_text();
  const TrainConfig back = TrainConfig::from_text(text);
  CHECK(back.to_text() == text);
  CHECK(back.feature_mask == c.feature_mask);
  CHECK(back.encoder == model::EncoderKind::deepset);
  CHECK(mask_to_string(c.feature_mask) == "000000001111111101");

  CHECK_THROWS_AS(TrainConfig::from_text("epochs = 10\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("epochs = 10\nearly_stop_patience = 11\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("lr = -1\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("batch_nodes = 0\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("feature_mask = 0101\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("set_transformer.heads = 4\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("dropout = 1\n"), ConfigError);
  CHECK(TrainConfig::from_text("# comment only\n").to_text() == TrainConfig{}.to_text());
}

TEST_CASE("pipeline: splits, graphs and edge features") {
  const PreparedData& d = tiny_data();
  const std::size_t n = d.dataset.n_cells();
  CHECK(d.train().size() + d.val().size() + d.test().size() == n);
  CHECK(d.val().size() == static_cast<std::size_t>(std::llround(0.15 * n)));
  std::set<std::size_t> seen;
  for (const auto& sp : d.splits) seen.insert(sp.cells.begin(), sp.cells.end());
  CHECK(seen.size() == n);

  for (const auto& sp : d.splits) {
    const auto& g = sp.graph;
    CHECK(graph::is_symmetric(g));
    for (std::size_t u = 0; u < g.n_nodes; ++u) {
      const std::size_t e = g.find_edge(u, u);
      REQUIRE(e != graph::npos);
      CHECK(g.edge_weight[e] == 0.0);
      CHECK(g.degree(u) <= d.d_max);
    }
    CHECK(g.edge_feat_dim() == 18);
    CHECK(g.edge_feat.rows() == g.n_edges());
    CHECK(sp.features.cols() == d.dataset.n_genes());
  }
  // Training features are standardized with their own statistics.
  std::vector<double> mean, sd;
  column_stats(d.train().features, mean, sd);
  for (std::size_t j = 0; j < mean.size(); ++j) {
    CHECK(std::abs(mean[j]) < 1e-9);
    if (sd[j] != 1.0) CHECK(std::abs(sd[j] - 1.0) < 1e-9);
  }
  CHECK(d.clusters.partition.n_communities >= 2);
  CHECK(d.n_classes == 3);
}

TEST_CASE("train: lr = 0 leaves parameters and validation accuracy unchanged; patience 0 stops one epoch later") {
  TrainConfig c = tiny_config();
  c.lr = 0.0;
  c.early_stop_patience = 0;
  const PreparedData& d = tiny_data();
  const TrainOutput out = train(d.train(), d.val(), c, d.n_classes, d.d_max, 5);
  CHECK(out.result.epochs_run == 2);
  CHECK(out.result.best_epoch == 1);
  REQUIRE(out.history.size() == 2);
  CHECK(out.history[0].val_accuracy == out.history[1].val_accuracy);

  model::EgatModel fresh(c.model_config(d.train().features.cols(), d.n_classes, d.d_max, 5));
  const model::Checkpoint init = model::make_checkpoint(fresh, c.to_text());
  REQUIRE(init.tensors.size() == out.checkpoint.tensors.size());
  for (std::size_t i = 0; i < init.tensors.size(); ++i) {
    CHECK(init.tensors[i].first == out.checkpoint.tensors[i].first);
    CHECK(init.tensors[i].second.values() == out.checkpoint.tensors[i].second.values());
  }
}

TEST_CASE("train: best checkpoint is kept and evaluation reproduces its validation accuracy") {
  TrainConfig c = tiny_config();
  c.lr = 0.05;
  const PreparedData& d = tiny_data();
  const TrainOutput out = train(d.train(), d.val(), c, d.n_classes, d.d_max, 7);
  double best = -1.0;
  for (const auto& h : out.history) best = std::max(best, h.val_accuracy);
  CHECK(out.result.best_val_accuracy == best);
  CHECK(out.history[out.result.best_epoch - 1].val_accuracy == best);
  CHECK(evaluate(out.checkpoint, d.val()) == best);
  CHECK(out.result.epochs_run <= c.epochs);
  if (out.result.epochs_run < c.epochs) CHECK(out.result.epochs_run == out.result.best_epoch + c.early_stop_patience + 1);
}

TEST_CASE("train: same seed and configuration give identical trials") {
  TrainConfig c = tiny_config();
  c.epochs = 5;
  const PreparedData& d = tiny_data();
  const TrainOutput a = run_trial(d, c, 3), b = run_trial(d, c, 3);
  CHECK(a.result.best_val_accuracy == b.result.best_val_accuracy);
  CHECK(a.result.test_accuracy == b.result.test_accuracy);
  CHECK(a.result.epochs_run == b.result.epochs_run);
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].train_loss == b.history[i].train_loss);
  for (std::size_t i = 0; i < a.checkpoint.tensors.size(); ++i)
    CHECK(a.checkpoint.tensors[i].second.values() == b.checkpoint.tensors[i].second.values());
  const TrainOutput other = run_trial(d, c, 4);
  CHECK(other.history[0].train_loss != a.history[0].train_loss);
}

TEST_CASE("evaluate: label outside the model's classes is a configuration error") {
  TrainConfig c = tiny_config();
  c.epochs = 1;
  c.early_stop_patience = 0;
  const PreparedData& d = tiny_data();
  const TrainOutput out = train(d.train(), d.val(), c, d.n_classes, d.d_max, 1);
  SplitData bad = d.test();
  bad.labels[0] = static_cast<int>(d.n_classes);
  CHECK_THROWS_AS(evaluate(out.checkpoint, bad), ConfigError);
  CHECK_THROWS_AS(train(bad, d.val(), c, d.n_classes, d.d_max, 1), ConfigError);
  SplitData bare = d.train();
  bare.graph.edge_feat = numerics::Tensor();
  CHECK_THROWS_AS(train(bare, d.val(), c, d.n_classes, d.d_max, 1), ConfigError);
}

TEST_CASE("feature masks zero exactly the cleared columns") {
  const PreparedData& d = tiny_data();
  const auto m = edgefeat::mask_of({edgefeat::FeatureBlock::curvature});
  const SplitData s = with_feature_mask(d.train(), m);
  for (std::size_t e = 0; e < s.graph.n_edges(); ++e)
    for (std::size_t c = 0; c < 18; ++c) {
      const double want = c == 16 ? d.train().graph.edge_feat.at(e, c) : 0.0;
      CHECK(s.graph.edge_feat.at(e, c) == want);
    }
}

TEST_CASE("ablation rows follow the ablation table naming") {
  const auto rows = default_ablation_rows(TrainConfig{});
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.name);
  const std::vector<std::string> want{"GAT",
                                      "No edge features",
                                      "Cluster label",
                                      "Batch label",
                                      "node2vec",
                                      "Curvature",
                                      "Cluster + batch label",
                                      "node2vec + curvature",
                                      "Cluster + batch label + node2vec",
                                      "Cluster + batch label + curvature",
                                      "Cluster + curvature",
                                      "Cluster + node2vec",
                                      "Batch label + curvature",
                                      "Batch label + node2vec",
                                      "Cluster + curvature + node2vec",
                                      "Batch + curvature + node2vec",
                                      "All edge features",
                                      "Set Transformer Averaged"};
  CHECK(names == want);
  CHECK_FALSE(rows[0].config.use_edge_features);
  CHECK(rows[1].config.freeze_lambda);
  CHECK(rows[1].config.feature_mask.none());
  CHECK(rows.back().config.averaged_aggregation);
  CHECK(rows.back().config.feature_mask.all());
}

TEST_CASE("ablation grid: metrics file is reproducible and round-trips") {
  TrainConfig c = tiny_config();
  c.epochs = 3;
  c.early_stop_patience = 1;
  const PreparedData& d = tiny_data();
  const std::vector<AblationRow> rows{gat_baseline_row(c), mask_row(c, edgefeat::full_mask())};
  test::TempDir dir("ablate");
  const auto r1 = run_ablation_grid(d, rows);
  const auto r2 = run_ablation_grid(d, rows);
  write_metrics_csv(dir / "a.csv", r1);
  write_metrics_csv(dir / "b.csv", r2);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  const auto back = read_metrics_csv(dir / "a.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(back[r].name == r1[r].name);
    REQUIRE(back[r].trials.size() == 2);
    for (std::size_t s = 0; s < 2; ++s) {
      CHECK(back[r].trials[s].seed == r1[r].trials[s].seed);
      CHECK(back[r].trials[s].test_accuracy == r1[r].trials[s].test_accuracy);
      CHECK(back[r].trials[s].best_val_accuracy == r1[r].trials[s].best_val_accuracy);
    }
  }
  const std::string summary = summary_text(r1);
  CHECK(summary.find("GAT") != std::string::npos);
  CHECK(summary.find("All edge features") != std::string::npos);
}
