#include "sarndwi/otsu.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sarndwi/error.hpp"

namespace sarndwi {

std::uint64_t Histogram::total() const noexcept {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

double Histogram::upper_edge(int bin) const noexcept {
  return lo + (hi - lo) * static_cast<double>(bin + 1) / bin_count();
}

int Histogram::bin_of(double value) const noexcept {
  const int bins = bin_count();
  const int b = static_cast<int>(std::floor((value - lo) / (hi - lo) * bins));
  return b >= bins ? bins - 1 : (b < 0 ? 0 : b);
}

Histogram build_histogram(std::span<const float> values, int bins, double lo,
                          double hi) {
  if (bins < 2) {
    throw BinCountError("histogram needs at least 2 bins, got " +
                        std::to_string(bins));
  }
  if (!(hi > lo)) throw DomainError("histogram domain is empty");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v >= lo && v <= hi)) {
      throw DomainError("value " + std::to_string(v) + " at pixel " +
                        std::to_string(i) + " outside histogram domain");
    }
    ++h.counts[static_cast<std::size_t>(h.bin_of(v))];
  }
  return h;
}

Histogram build_histogram(const NdwiMap& m, int bins) {
  if (m.scale != NdwiScale::Unit) {
    throw ScaleError("histogram expects unit-scale NDWI");
  }
  return build_histogram(m.values, bins, 0.0, 1.0);
}

CumulativeMoments cumulative_moments(const Histogram& h) {
  const std::uint64_t n = h.total();
  const int bins = h.bin_count();
  CumulativeMoments m;
  m.omega.resize(static_cast<std::size_t>(bins));
  m.mu.resize(static_cast<std::size_t>(bins));
  std::uint64_t w = 0;
  unsigned __int128 s = 0;
  for (int t = 0; t < bins; ++t) {
    w += h.counts[t];
    s += static_cast<unsigned __int128>(h.counts[t]) * static_cast<unsigned>(t);
    m.omega[t] = static_cast<double>(w) / static_cast<double>(n);
    m.mu[t] = static_cast<double>(s) / static_cast<double>(n);
  }
  m.mu_total = m.mu.back();
  return m;
}

namespace {

using u128 = unsigned __int128;

struct U256 {
  u128 hi = 0;
  u128 lo = 0;
  auto operator<=>(const U256&) const = default;
};

U256 mul_wide(u128 a, u128 b) {
  const u128 mask = ~std::uint64_t{0};
  const u128 a0 = a & mask, a1 = a >> 64, b0 = b & mask, b1 = b >> 64;
  const u128 p00 = a0 * b0, p01 = a0 * b1, p10 = a1 * b0, p11 = a1 * b1;
  const u128 mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
  U256 r;
  r.lo = (mid << 64) | (p00 & mask);
  r.hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
  return r;
}

// Candidate score as the fraction num / den with num = D^2, den = W(N-W).
struct Score {
  u128 num = 0;
  u128 den = 1;
};

bool greater(const Score& a, const Score& b) {
  return mul_wide(a.num, b.den) > mul_wide(b.num, a.den);
}

}  // namespace

OtsuResult otsu_threshold(const Histogram& h) {
  const int bins = h.bin_count();
  int populated = 0;
  for (auto c : h.counts) populated += c > 0 ? 1 : 0;
  if (populated < 2) {
    throw DegenerateHistogramError(
        "Otsu needs at least two populated bins, found " +
        std::to_string(populated));
  }

  // With integer class count W = N*omega and moment S = N*mu,
  //   (mu_T*omega - mu)^2 / (omega*(1-omega)) = D^2 / (N^2 * W * (N - W))
  // where D = S_T*W - S*N. The argmax compares D^2 / (W(N-W)) exactly.
  using i128 = __int128;
  const std::uint64_t n = h.total();
  i128 s_total = 0;
  for (int i = 0; i < bins; ++i) {
    s_total += static_cast<i128>(h.counts[i]) * i;
  }

  OtsuResult r;
  r.variance_curve.assign(static_cast<std::size_t>(bins),
                          std::numeric_limits<double>::quiet_NaN());
  const double n_sq = static_cast<double>(n) * static_cast<double>(n);
  Score best{0, 1};
  bool have_best = false;
  std::uint64_t w = 0;
  i128 s = 0;
  for (int t = 0; t < bins; ++t) {
    w += h.counts[t];
    s += static_cast<i128>(h.counts[t]) * t;
    if (w == 0 || w == n) continue;
    const i128 d = s_total * static_cast<i128>(w) - s * static_cast<i128>(n);
    const u128 ad = static_cast<u128>(d < 0 ? -d : d);
    if (ad >> 64) throw DomainError("histogram too large for exact Otsu scoring");
    const Score score{ad * ad, static_cast<u128>(w) * (n - w)};
    const double dd = static_cast<double>(d);
    r.variance_curve[t] = dd * dd / (n_sq * static_cast<double>(w) *
                                     static_cast<double>(n - w));
    if (!have_best || greater(score, best)) {
      best = score;
      have_best = true;
      r.t_star = t;
    }
  }
  r.threshold_value = h.upper_edge(r.t_star);
  return r;
}

WaterMask binarize(std::span<const float> values, int height, int width,
                   double threshold_value) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("mask dimensions do not match value count");
  }
  WaterMask mask;
  mask.height = height;
  mask.width = width;
  mask.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    mask.values[i] = values[i] > threshold_value ? 1 : 0;
  }
  return mask;
}

WaterMask binarize(const NdwiMap& m, double threshold_value) {
  return binarize(m.values, m.height, m.width, threshold_value);
}

}  // namespace sarndwi
