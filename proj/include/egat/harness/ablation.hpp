#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "egat/harness/config.hpp"
#include "egat/harness/pipeline.hpp"
#include "egat/harness/stats.hpp"
#include "egat/harness/trainer.hpp"

namespace egat::harness {

struct AblationRow {
  std::string name;
  TrainConfig config;
};

struct AblationResult {
  std::string name;
  std::vector<TrialResult> trials;
  std::vector<model::Checkpoint> checkpoints;  // per trial, only when requested

  std::vector<double> test_accuracies() const;
  double mean_test_accuracy() const;
};

// Row builders on top of a base configuration.
AblationRow gat_baseline_row(const TrainConfig& base);
AblationRow zero_mask_row(const TrainConfig& base);  // all columns zeroed, lambda frozen
AblationRow mask_row(const TrainConfig& base, const edgefeat::FeatureMask& mask);
AblationRow averaged_row(const TrainConfig& base);  // every column, 1/|S_i| weights

// The full grid: GAT baseline, zero mask, the fourteen block subsets of the
// ablation table (singles, pairs, triples), all blocks, averaged aggregation.
std::vector<AblationRow> default_ablation_rows(const TrainConfig& base);

// One trial per (row, seed) with seeds base.seed .. base.seed + seeds - 1.
// Trials are independent and run in parallel; results do not depend on the
// thread count.
std::vector<AblationResult> run_ablation_grid(const PreparedData& data, const std::vector<AblationRow>& rows,
                                              const std::shared_ptr<spdlog::logger>& log = nullptr,
                                              bool keep_checkpoints = false);

// One line per trial: row,seed,best_val_accuracy,test_accuracy,epochs_run,best_epoch.
// Accuracies are written with round-trip precision; wall time is left out
// so identical runs give identical files.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<AblationResult>& results);
std::vector<AblationResult> read_metrics_csv(const std::filesystem::path& path);
// Mean and 95% interval of test accuracy per row (display values clipped to [0, 1]).
std::string summary_text(const std::vector<AblationResult>& results);

}  // namespace egat::harness
