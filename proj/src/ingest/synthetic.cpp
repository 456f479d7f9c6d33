#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "egat/errors.hpp"
#include "egat/ingest/dataset.hpp"

namespace egat::ingest {

CellDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_cells == 0 || spec.n_genes == 0 || spec.n_clusters == 0 || spec.n_batches == 0 || spec.n_classes == 0) {
    throw ConfigError("synthetic: all sizes must be positive");
  }
  if (spec.n_signal_genes > spec.n_genes) throw ConfigError("synthetic: more signal genes than genes");
  if (spec.signal_strength < 0 || spec.batch_effect < 0) throw ConfigError("synthetic: strengths must be >= 0");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t G = spec.n_genes, K = spec.n_clusters, B = spec.n_batches, C = spec.n_classes;

  // Signal genes are a random subset; they carry no cluster markers.
  std::vector<std::size_t> genes(G);
  std::iota(genes.begin(), genes.end(), 0);
  std::shuffle(genes.begin(), genes.end(), rng);
  std::vector<std::size_t> signal(genes.begin(), genes.begin() + static_cast<std::ptrdiff_t>(spec.n_signal_genes));
  std::vector<bool> is_signal(G, false);
  for (std::size_t g : signal) is_signal[g] = true;

  std::vector<double> base(G);
  for (double& b : base) b = normal(rng);

  std::vector<std::vector<double>> cluster_lfc(K, std::vector<double>(G, 0.0));
  for (auto& lfc : cluster_lfc)
    for (std::size_t g = 0; g < G; ++g)
      if (!is_signal[g] && unit(rng) < spec.marker_fraction) lfc[g] = spec.cluster_scale * normal(rng);

  std::vector<std::vector<double>> batch_lfc(B, std::vector<double>(G));
  for (auto& lfc : batch_lfc)
    for (double& v : lfc) v = spec.batch_effect * 0.5 * normal(rng);

  // Class effect on each signal gene, centred across classes.
  std::vector<std::vector<double>> class_lfc(C, std::vector<double>(signal.size()));
  for (std::size_t j = 0; j < signal.size(); ++j) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += (class_lfc[c][j] = normal(rng)) / static_cast<double>(C);
    for (std::size_t c = 0; c < C; ++c) class_lfc[c][j] = spec.signal_strength * (class_lfc[c][j] - mean);
  }

  const double mix_scale = std::min(1.0, spec.signal_strength) * spec.mixing;
  std::lognormal_distribution<double> library(std::log(spec.mean_library), 0.3);

  CellDataset d;
  d.counts = numerics::Tensor::matrix(spec.n_cells, G);
  d.gene_names.resize(G);
  for (std::size_t g = 0; g < G; ++g) d.gene_names[g] = "gene" + std::to_string(g);
  for (std::size_t j = 0; j < signal.size(); ++j) d.gene_names[signal[j]] = "sig" + std::to_string(j);
  for (std::size_t c = 0; c < C; ++c) d.class_names.push_back("class" + std::to_string(c));

  std::vector<double> log_rate(G);
  for (std::size_t i = 0; i < spec.n_cells; ++i) {
    const std::size_t k = rng() % K, b = rng() % B, c = rng() % C;
    const std::size_t s = K > 1 ? (k + 1 + rng() % (K - 1)) % K : k;
    const double f = C > 1 ? mix_scale * static_cast<double>(c) / static_cast<double>(C - 1) : 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      log_rate[g] = base[g] + (1.0 - f) * cluster_lfc[k][g] + f * cluster_lfc[s][g] + batch_lfc[b][g] +
                    spec.cell_noise * normal(rng);
    }
    for (std::size_t j = 0; j < signal.size(); ++j) log_rate[signal[j]] += class_lfc[c][j];
    const double mx = *std::max_element(log_rate.begin(), log_rate.end());
    double z = 0.0;
    for (double& v : log_rate) z += (v = std::exp(v - mx));
    const double lib = library(rng);
    for (std::size_t g = 0; g < G; ++g) {
      std::poisson_distribution<long> pois(lib * log_rate[g] / z);
      d.counts.at(i, g) = static_cast<double>(pois(rng));
    }
    d.meta.push_back({"cell" + std::to_string(i), "batch" + std::to_string(b), d.class_names[c], "", std::nullopt});
    d.labels.push_back(static_cast<int>(c));
    d.true_cluster.push_back(static_cast<int>(k));
  }
  return d;
}

}  // namespace egat::ingest
