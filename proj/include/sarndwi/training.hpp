#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sarndwi/dataset.hpp"
#include "sarndwi/model.hpp"

namespace sarndwi {

struct TrainConfig {
  LossKind loss = LossKind::MeanSquaredError;
  AdamOptions optimizer;
  int batch_size = 32;
  int max_epochs = 50;
  // Epochs without a new best validation loss tolerated before stopping.
  int patience = 5;
  // Share of the train split held out for model selection.
  double validation_fraction = 0.1;
  std::uint64_t rng_seed = 1234;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int selected_epoch = 0;
  std::string stop_reason;
};

struct TrainResult {
  UNetParams<float> params;  // best-validation snapshot
  TrainReport report;
};

// Mean loss over every pixel served by `source` (one full epoch 0 pass).
double evaluate_loss(const UNet<float>& net, const UNetParams<float>& params,
                     BatchSource& source, LossKind kind);

// Adam on tc.loss. Each epoch the training source is restarted with its epoch
// index, then validation loss is measured; the lowest-validation parameters
// are returned. Without a (non-empty) validation source the training loss
// drives selection. Throws DivergenceError naming the epoch on a non-finite
// loss.
TrainResult train(UNetParams<float> initial, BatchSource& train_source,
                  BatchSource* val_source, const TrainConfig& tc,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace sarndwi
