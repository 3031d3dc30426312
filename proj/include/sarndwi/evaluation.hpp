#pragma once

#include <span>

#include "sarndwi/metrics.hpp"
#include "sarndwi/model.hpp"
#include "sarndwi/dataset.hpp"

namespace sarndwi {

// Threshold used when a chip's histogram has fewer than two populated bins
// and Otsu is undefined: unit-scale 0.5, i.e. signed NDWI 0.
inline constexpr double kDegenerateChipThreshold = 0.5;

// Otsu threshold of a unit-scale map, falling back to
// kDegenerateChipThreshold for constant chips.
double chip_threshold(std::span<const float> unit_values, int bins);

// Pools the four metrics over chips. Truth labels come from per-chip Otsu on
// the reference NDWI, predicted labels from per-chip Otsu on the predicted
// NDWI; AUC scores are the raw predictions and skip single-class chips.
class EvaluationAccumulator {
 public:
  explicit EvaluationAccumulator(int bins = kDefaultHistogramBins) : bins_(bins) {}

  void add_chip(std::span<const float> pred, std::span<const float> truth);
  void merge(const EvaluationAccumulator& other);
  MetricsReport report() const;

 private:
  int bins_;
  ConfusionCounts counts_;
  R2Accumulator r2_;
  AucAccumulator auc_;
  double squared_error_ = 0.0;
  std::uint64_t chips_ = 0;
  std::uint64_t auc_chips_ = 0;
};

// Runs the network over every chip of `source` and scores it.
MetricsReport evaluate_model(const UNet<float>& net, const UNetParams<float>& params,
                             BatchSource& source, int bins = kDefaultHistogramBins);

}  // namespace sarndwi
