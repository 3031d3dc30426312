#include "sarndwi/training.hpp"

#include <chrono>
#include <cmath>

#include "sarndwi/error.hpp"

namespace sarndwi {

double evaluate_loss(const UNet<float>& net, const UNetParams<float>& params,
                     BatchSource& source, LossKind kind) {
  source.start_epoch(0);
  double weighted = 0.0;
  std::size_t pixels = 0;
  while (auto batch = source.next()) {
    const Tensor<float> pred = net.forward(params, batch->inputs);
    weighted += loss_value(pred, batch->targets, kind) *
                static_cast<double>(pred.size());
    pixels += pred.size();
  }
  if (pixels == 0) throw EmptyDatasetError("loss evaluation over an empty source");
  return weighted / static_cast<double>(pixels);
}

TrainResult train(UNetParams<float> initial, BatchSource& train_source,
                  BatchSource* val_source, const TrainConfig& tc,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  audit_shapes(initial);
  if (tc.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (tc.patience < 0) throw ConfigError("patience must be >= 0");
  if (train_source.size() == 0) {
    throw EmptyDatasetError("training source holds no chips");
  }
  const bool has_val = val_source != nullptr && val_source->size() > 0;

  const UNet<float> net(initial.config);
  UNetParams<float> params = std::move(initial);
  UNetParams<float> grads;
  Adam<float> adam(params, tc.optimizer);

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    train_source.start_epoch(static_cast<std::uint64_t>(epoch));
    double weighted = 0.0;
    std::size_t pixels = 0;
    while (auto batch = train_source.next()) {
      const double loss = compute_gradients(net, params, batch->inputs,
                                            batch->targets, tc.loss, grads);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training loss became non-finite in epoch " +
                              std::to_string(epoch));
      }
      adam.step(params, grads);
      weighted += loss * static_cast<double>(batch->targets.size());
      pixels += batch->targets.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weighted / static_cast<double>(pixels);
    rec.val_loss = has_val ? evaluate_loss(net, params, *val_source, tc.loss)
                           : rec.train_loss;
    if (!std::isfinite(rec.val_loss)) {
      throw DivergenceError("validation loss became non-finite in epoch " +
                            std::to_string(epoch));
    }
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0).count();
    result.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < best) {
      best = rec.val_loss;
      since_best = 0;
      result.params = params;
      result.report.selected_epoch = epoch;
    } else if (++since_best > tc.patience) {
      result.report.stop_reason = "early_stopping";
      return result;
    }
  }
  result.report.stop_reason = "max_epochs";
  return result;
}

}  // namespace sarndwi
