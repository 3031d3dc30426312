#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sarndwi/indices.hpp"

namespace sarndwi {

inline constexpr int kDefaultHistogramBins = 256;

// L bins spread uniformly over the closed interval [lo, hi]. Bin i covers
// [lo + i*(hi-lo)/L, lo + (i+1)*(hi-lo)/L); the last bin also takes hi.
struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::uint64_t> counts;

  int bin_count() const noexcept { return static_cast<int>(counts.size()); }
  std::uint64_t total() const noexcept;
  double upper_edge(int bin) const noexcept;
  int bin_of(double value) const noexcept;
};

struct OtsuResult {
  int t_star = 0;
  double threshold_value = 0.0;
  // Between-class variance for every candidate t; NaN where the class split
  // is empty on one side (omega(t) in {0, 1}).
  std::vector<double> variance_curve;
};

// Water where value > threshold.
struct WaterMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;
};

Histogram build_histogram(std::span<const float> values, int bins = kDefaultHistogramBins,
                          double lo = 0.0, double hi = 1.0);
Histogram build_histogram(const NdwiMap& m, int bins = kDefaultHistogramBins);

// Cumulative class probability omega(t) and first moment mu(t) over bin
// indices, plus the total mean mu_T = mu(L-1).
struct CumulativeMoments {
  std::vector<double> omega;
  std::vector<double> mu;
  double mu_total = 0.0;
};
CumulativeMoments cumulative_moments(const Histogram& h);

// Exact argmax, ties to the lowest bin. DegenerateHistogramError with fewer
// than two populated bins; DomainError if N*N*L outgrows 128-bit scoring
// (far beyond any chip or scene).
OtsuResult otsu_threshold(const Histogram& h);

WaterMask binarize(std::span<const float> values, int height, int width,
                   double threshold_value);
WaterMask binarize(const NdwiMap& m, double threshold_value);

}  // namespace sarndwi
