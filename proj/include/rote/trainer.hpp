#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rote/backbone.hpp"
#include "rote/datasets.hpp"
#include "rote/metrics.hpp"

namespace rote::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;  // global-norm gradient clip
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_recall5 = 0.0, valid_recall10 = 0.0;
  double valid_ndcg5 = 0.0, valid_ndcg10 = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_valid_ndcg10 = 0.0;
  double wall_clock_seconds = 0.0;  // not written to deterministic artifacts
};

struct AdamState {
  std::vector<Tensor> m;  // first moments, named_params order
  std::vector<Tensor> v;  // second moments
  std::int64_t step = 0;
};

AdamState make_adam_state(const Model& model);

// One bias-corrected Adam update over named_params order.
void adam_step(Model& model, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg);

// Trains with next-item cross-entropy over all non-padding positions,
// early-stops on validation NDCG@10, and returns the best-epoch model.
// Throws std::runtime_error with epoch/batch context if the loss diverges.
TrainReport train(Model& model, const data::Dataset& ds, const TrainConfig& cfg);

// Epoch TSV (deterministic; no timing column).
void write_report_tsv(const TrainReport& report, const std::string& path);

}  // namespace rote::train
