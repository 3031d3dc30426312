#include "sarndwi/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "sarndwi/error.hpp"

namespace sarndwi {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

void accumulate_confusion(std::span<const std::uint8_t> pred,
                          std::span<const std::uint8_t> truth,
                          ConfusionCounts& counts) {
  if (pred.size() != truth.size()) {
    throw DimensionError("prediction and truth masks differ in size (" +
                         std::to_string(pred.size()) + " vs " +
                         std::to_string(truth.size()) + ")");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++counts.tp;
    else if (p) ++counts.fp;
    else if (t) ++counts.fn;
    else ++counts.tn;
  }
}

void accumulate_confusion(const WaterMask& pred, const WaterMask& truth,
                          ConfusionCounts& counts) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw DimensionError("prediction and truth masks differ in shape");
  }
  accumulate_confusion(pred.values, truth.values, counts);
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw InvalidArgumentError("accuracy over zero pixels");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

namespace {

double class_iou(std::uint64_t hit, std::uint64_t miss_a, std::uint64_t miss_b) {
  const std::uint64_t uni = hit + miss_a + miss_b;
  return uni == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(uni);
}

}  // namespace

double mean_iou(const ConfusionCounts& c) {
  return 0.5 * (class_iou(c.tp, c.fp, c.fn) + class_iou(c.tn, c.fn, c.fp));
}

namespace {

template <typename Score>
double auc_sorted(std::span<const Score> scores,
                  std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Twice the Mann-Whitney U statistic, kept integral for exact ties.
  unsigned __int128 twice_u = 0;
  std::uint64_t negatives_below = 0;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] != 0) ++pos;
      else ++neg;
      ++j;
    }
    twice_u += static_cast<unsigned __int128>(pos) * (2 * negatives_below + neg);
    negatives_below += neg;
    positives += pos;
    i = j;
  }
  if (positives == 0 || negatives_below == 0) {
    throw SingleClassError("AUC needs both positive and negative labels");
  }
  const long double pairs = static_cast<long double>(positives) *
                            static_cast<long double>(negatives_below);
  return static_cast<double>(static_cast<long double>(twice_u) / (2.0L * pairs));
}

}  // namespace

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return auc_sorted<double>(scores, labels);
}

void AucAccumulator::add(std::span<const float> scores,
                         std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores and labels differ in length");
  }
  scores_.insert(scores_.end(), scores.begin(), scores.end());
  labels_.insert(labels_.end(), labels.begin(), labels.end());
}

void AucAccumulator::merge(const AucAccumulator& other) {
  add(other.scores_, other.labels_);
}

double AucAccumulator::value() const {
  return auc_sorted<float>(scores_, labels_);
}

void R2Accumulator::add(std::span<const float> pred, std::span<const float> truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError("prediction and truth differ in length");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = truth[i];
    const double r = t - static_cast<double>(pred[i]);
    sse_ += r * r;
    ++n_;
    const double delta = t - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (t - mean_);
  }
}

void R2Accumulator::merge(const R2Accumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double delta = other.mean_ - mean_;
  const double n = na + nb;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  sse_ += other.sse_;
  n_ += other.n_;
}

double R2Accumulator::value() const {
  if (n_ == 0 || m2_ <= 0.0) {
    throw ZeroVarianceError("R2 undefined: truth values have zero variance");
  }
  return 1.0 - sse_ / m2_;
}

double r2_score(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError("prediction and truth differ in length");
  }
  if (truth.empty()) throw ZeroVarianceError("R2 over zero values");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (ss_tot <= 0.0) {
    throw ZeroVarianceError("R2 undefined: truth values have zero variance");
  }
  return 1.0 - ss_res / ss_tot;
}

}  // namespace sarndwi
