#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "egat/harness/config.hpp"
#include "egat/harness/pipeline.hpp"
#include "egat/model/egat_model.hpp"

namespace spdlog {
class logger;
}

namespace egat::harness {

struct TrialResult {
  std::uint64_t seed = 0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;  // filled by run_trial, never by train
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean over the epoch's optimizer steps
  double val_accuracy = 0.0;
};

struct TrainOutput {
  model::Checkpoint checkpoint;  // parameters of the best validation epoch
  TrialResult result;
  std::vector<EpochRecord> history;
};

// Whole-split batch: every node of the split graph, edge features included.
model::NodeBatch full_batch(const SplitData& s);

// Minibatch training on the training split. Each epoch partitions nothing
// new: the training graph is cut once per trial into parts of about
// cfg.part_size nodes, the parts are shuffled and grouped until each group
// covers cfg.batch_nodes nodes, and every group's induced subgraph is one
// Adagrad step. Validation accuracy is measured after every epoch; training
// stops when the epochs since the best one exceed the patience. Throws
// NumericalError on a non-finite loss.
TrainOutput train(const SplitData& train_split, const SplitData& val_split, const TrainConfig& cfg,
                  std::size_t n_classes, std::size_t d_max, std::uint64_t seed,
                  const std::shared_ptr<spdlog::logger>& log = nullptr);

// Fraction of labelled nodes whose prediction matches; unlabelled (-1) nodes
// are skipped. 0 when nothing is labelled.
double accuracy(std::span<const int> predicted, std::span<const int> labels);
// Accuracy of a trained model on a split. ConfigError when the split carries
// a label the model has no class for.
double evaluate(model::EgatModel& m, const SplitData& s);
double evaluate(const model::Checkpoint& ckpt, const SplitData& s);

// train + one evaluation of the selected checkpoint on the test split.
TrainOutput run_trial(const PreparedData& data, const TrainConfig& cfg, std::uint64_t seed,
                      const std::shared_ptr<spdlog::logger>& log = nullptr);

}  // namespace egat::harness
