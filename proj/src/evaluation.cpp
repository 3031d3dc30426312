#include "sarndwi/evaluation.hpp"

#include "sarndwi/error.hpp"

namespace sarndwi {

double chip_threshold(std::span<const float> unit_values, int bins) {
  const Histogram h = build_histogram(unit_values, bins, 0.0, 1.0);
  try {
    return otsu_threshold(h).threshold_value;
  } catch (const DegenerateHistogramError&) {
    return kDegenerateChipThreshold;
  }
}

void EvaluationAccumulator::add_chip(std::span<const float> pred,
                                     std::span<const float> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw DimensionError("prediction and truth chips differ in size");
  }
  const int n = static_cast<int>(pred.size());
  const WaterMask truth_mask = binarize(truth, 1, n, chip_threshold(truth, bins_));
  const WaterMask pred_mask = binarize(pred, 1, n, chip_threshold(pred, bins_));
  accumulate_confusion(pred_mask, truth_mask, counts_);
  r2_.add(pred, truth);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - truth[i];
    squared_error_ += d * d;
  }
  std::size_t positives = 0;
  for (auto v : truth_mask.values) positives += v;
  if (positives > 0 && positives < truth_mask.values.size()) {
    auc_.add(pred, truth_mask.values);
    ++auc_chips_;
  }
  ++chips_;
}

void EvaluationAccumulator::merge(const EvaluationAccumulator& other) {
  counts_ += other.counts_;
  r2_.merge(other.r2_);
  auc_.merge(other.auc_);
  squared_error_ += other.squared_error_;
  chips_ += other.chips_;
  auc_chips_ += other.auc_chips_;
}

MetricsReport EvaluationAccumulator::report() const {
  if (chips_ == 0) throw EmptyDatasetError("no chips were evaluated");
  MetricsReport r;
  r.counts = counts_;
  r.pixel_count = counts_.total();
  r.chip_count = chips_;
  r.auc_chip_count = auc_chips_;
  r.accuracy = accuracy(counts_);
  r.mean_iou = mean_iou(counts_);
  r.r2 = r2_.value();
  r.auc = auc_.size() > 0 ? auc_.value() : std::numeric_limits<double>::quiet_NaN();
  r.loss = squared_error_ / static_cast<double>(r.pixel_count);
  return r;
}

MetricsReport evaluate_model(const UNet<float>& net, const UNetParams<float>& params,
                             BatchSource& source, int bins) {
  EvaluationAccumulator acc(bins);
  source.start_epoch(0);
  while (auto batch = source.next()) {
    const Tensor<float> pred = net.forward(params, batch->inputs);
    const std::size_t per_chip = pred.image_size();
    for (int i = 0; i < pred.n; ++i) {
      acc.add_chip(std::span(pred.image(i), per_chip),
                   std::span(batch->targets.image(i), per_chip));
    }
  }
  return acc.report();
}

}  // namespace sarndwi
