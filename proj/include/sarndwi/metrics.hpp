#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sarndwi/otsu.hpp"

namespace sarndwi {

// Pixel confusion counts, water = positive class. Pooled over a dataset.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  bool operator==(const ConfusionCounts&) const = default;
};

void accumulate_confusion(std::span<const std::uint8_t> pred,
                          std::span<const std::uint8_t> truth,
                          ConfusionCounts& counts);
void accumulate_confusion(const WaterMask& pred, const WaterMask& truth,
                          ConfusionCounts& counts);

double accuracy(const ConfusionCounts& c);
// Mean of water and non-water IoU; a class absent from prediction and truth
// scores 1.
double mean_iou(const ConfusionCounts& c);

// Area under the ROC curve as the rank statistic
// P(s+ > s-) + 0.5 * P(s+ = s-), exact for ties.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

class AucAccumulator {
 public:
  void add(std::span<const float> scores, std::span<const std::uint8_t> labels);
  void merge(const AucAccumulator& other);
  std::size_t size() const noexcept { return scores_.size(); }
  double value() const;

 private:
  std::vector<float> scores_;
  std::vector<std::uint8_t> labels_;
};

// Pooled coefficient of determination, 1 - SS_res / SS_tot. Partial
// accumulators merge exactly in the sense of Chan's pairwise update.
class R2Accumulator {
 public:
  void add(std::span<const float> pred, std::span<const float> truth);
  void merge(const R2Accumulator& other);
  std::uint64_t count() const noexcept { return n_; }
  double value() const;

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double sse_ = 0.0;
};

double r2_score(std::span<const double> pred, std::span<const double> truth);

struct MetricsReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double r2 = 0.0;
  double mean_iou = 0.0;
  double loss = 0.0;
  std::uint64_t pixel_count = 0;
  std::uint64_t chip_count = 0;
  std::uint64_t auc_chip_count = 0;
  ConfusionCounts counts;
};

}  // namespace sarndwi
