#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "sarndwi/error.hpp"

namespace sarndwi {

// Batch x height x width x channels, channel-last.
template <std::floating_point T>
struct Tensor {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_, T fill = T(0))
      : n(n_), h(h_), w(w_), c(c_),
        data(static_cast<std::size_t>(n_) * h_ * w_ * c_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t image_size() const noexcept {
    return static_cast<std::size_t>(h) * w * c;
  }
  std::array<int, 4> shape() const noexcept { return {n, h, w, c}; }

  T* image(int i) noexcept { return data.data() + image_size() * i; }
  const T* image(int i) const noexcept { return data.data() + image_size() * i; }

  T& at(int b, int y, int x, int ch) noexcept {
    return data[((static_cast<std::size_t>(b) * h + y) * w + x) * c + ch];
  }
  T at(int b, int y, int x, int ch) const noexcept {
    return data[((static_cast<std::size_t>(b) * h + y) * w + x) * c + ch];
  }

  template <std::floating_point U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.n = n;
    out.h = h;
    out.w = w;
    out.c = c;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

inline std::string shape_string(const std::array<int, 4>& s) {
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," +
         std::to_string(s[2]) + "," + std::to_string(s[3]) + ")";
}

}  // namespace sarndwi
