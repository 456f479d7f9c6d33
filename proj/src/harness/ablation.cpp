#include "egat/harness/ablation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <spdlog/spdlog.h>

#include "egat/errors.hpp"
#include "egat/text.hpp"

namespace egat::harness {

using edgefeat::FeatureBlock;

std::vector<double> AblationResult::test_accuracies() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.test_accuracy);
  return v;
}

double AblationResult::mean_test_accuracy() const {
  if (trials.empty()) return 0.0;
  const auto v = test_accuracies();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

AblationRow gat_baseline_row(const TrainConfig& base) {
  AblationRow r{"GAT", base};
  r.config.use_edge_features = false;
  r.config.averaged_aggregation = false;
  r.config.freeze_lambda = false;
  return r;
}

AblationRow zero_mask_row(const TrainConfig& base) {
  AblationRow r{edgefeat::mask_name(edgefeat::FeatureMask{}), base};
  r.config.use_edge_features = true;
  r.config.feature_mask.reset();
  r.config.freeze_lambda = true;
  r.config.averaged_aggregation = false;
  return r;
}

AblationRow mask_row(const TrainConfig& base, const edgefeat::FeatureMask& mask) {
  AblationRow r{edgefeat::mask_name(mask), base};
  r.config.use_edge_features = true;
  r.config.feature_mask = mask;
  r.config.averaged_aggregation = false;
  r.config.freeze_lambda = false;
  return r;
}

AblationRow averaged_row(const TrainConfig& base) {
  AblationRow r = mask_row(base, edgefeat::full_mask());
  r.name = "Set Transformer Averaged";
  r.config.averaged_aggregation = true;
  return r;
}

std::vector<AblationRow> default_ablation_rows(const TrainConfig& base) {
  using B = FeatureBlock;
  const B c = B::cluster, b = B::batch, k = B::curvature, n = B::node2vec;
  std::vector<AblationRow> rows{gat_baseline_row(base), zero_mask_row(base)};
  const std::vector<edgefeat::FeatureMask> masks{
      edgefeat::mask_of({c}),       edgefeat::mask_of({b}),       edgefeat::mask_of({n}),
      edgefeat::mask_of({k}),       edgefeat::mask_of({c, b}),    edgefeat::mask_of({n, k}),
      edgefeat::mask_of({c, b, n}), edgefeat::mask_of({c, b, k}), edgefeat::mask_of({c, k}),
      edgefeat::mask_of({c, n}),    edgefeat::mask_of({b, k}),    edgefeat::mask_of({b, n}),
      edgefeat::mask_of({c, k, n}), edgefeat::mask_of({b, k, n}), edgefeat::full_mask()};
  for (const auto& m : masks) rows.push_back(mask_row(base, m));
  rows.push_back(averaged_row(base));
  return rows;
}

std::vector<AblationResult> run_ablation_grid(const PreparedData& data, const std::vector<AblationRow>& rows,
                                              const std::shared_ptr<spdlog::logger>& log, bool keep_checkpoints) {
  std::vector<AblationResult> results(rows.size());
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].config.validate();
    results[r].name = rows[r].name;
    results[r].trials.resize(rows[r].config.seeds);
    if (keep_checkpoints) results[r].checkpoints.resize(rows[r].config.seeds);
    for (std::size_t s = 0; s < rows[r].config.seeds; ++s) jobs.emplace_back(r, s);
  }
  std::vector<std::string> errors(jobs.size());
  // Nested kernels inside a trial then run on the trial's own thread.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto [r, s] = jobs[j];
    const TrainConfig& cfg = rows[r].config;
    try {
      TrainOutput out = run_trial(data, cfg, cfg.seed + s);
      results[r].trials[s] = out.result;
      if (keep_checkpoints) results[r].checkpoints[s] = std::move(out.checkpoint);
      if (log) {
        const auto& t = results[r].trials[s];
        log->info("row='{}' seed={} val={:.4f} test={:.4f} epochs={} ({:.1f}s)", rows[r].name, t.seed,
                  t.best_val_accuracy, t.test_accuracy, t.epochs_run, t.wall_seconds);
      }
    } catch (const std::exception& e) {
      errors[j] = rows[r].name + " seed " + std::to_string(cfg.seed + s) + ": " + e.what();
    }
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!errors[j].empty()) throw NumericalError("ablation trial failed: " + errors[j]);
  }
  return results;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<AblationResult>& results) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "row,seed,best_val_accuracy,test_accuracy,epochs_run,best_epoch\n";
  for (const auto& r : results) {
    for (const auto& t : r.trials) {
      os << text::csv_field(r.name) << ',' << t.seed << ',' << text::format_double(t.best_val_accuracy) << ','
         << text::format_double(t.test_accuracy) << ',' << t.epochs_run << ',' << t.best_epoch << '\n';
    }
  }
  if (!os) throw DataError("write to " + path.string() + " failed");
}

std::vector<AblationResult> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ": empty file");
  std::vector<AblationResult> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (!f || f->size() != 6) throw DataError(where + "expected 6 fields");
    TrialResult t;
    const auto seed = text::parse_size((*f)[1]);
    const auto val = text::parse_double((*f)[2]);
    const auto test = text::parse_double((*f)[3]);
    const auto epochs = text::parse_size((*f)[4]);
    const auto best = text::parse_size((*f)[5]);
    if (!seed || !val || !test || !epochs || !best) throw DataError(where + "malformed number");
    t.seed = *seed;
    t.best_val_accuracy = *val;
    t.test_accuracy = *test;
    t.epochs_run = *epochs;
    t.best_epoch = *best;
    if (out.empty() || out.back().name != (*f)[0]) out.push_back({(*f)[0], {}, {}});
    out.back().trials.push_back(t);
  }
  return out;
}

std::string summary_text(const std::vector<AblationResult>& results) {
  std::ostringstream os;
  std::size_t width = 4;
  for (const auto& r : results) width = std::max(width, r.name.size());
  os << std::string(width - 3, ' ') << "row   n   mean    95% CI            mean epochs\n";
  for (const auto& r : results) {
    const auto acc = r.test_accuracies();
    double epochs = 0.0;
    for (const auto& t : r.trials) epochs += static_cast<double>(t.epochs_run);
    epochs /= std::max<std::size_t>(1, r.trials.size());
    os << std::string(width - std::min(width, r.name.size()), ' ') << r.name << "  " << acc.size();
    char buf[128];
    if (acc.size() >= 2) {
      const Interval ci = confidence_interval(acc);
      std::snprintf(buf, sizeof buf, "  %.4f  [%.4f, %.4f]  %8.1f\n", ci.mean, std::max(0.0, ci.lo),
                    std::min(1.0, ci.hi), epochs);
    } else {
      std::snprintf(buf, sizeof buf, "  %.4f  (single trial)    %8.1f\n", r.mean_test_accuracy(), epochs);
    }
    os << buf;
  }
  return os.str();
}

}  // namespace egat::harness
