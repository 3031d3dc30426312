#include "sarndwi/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "byte_io.hpp"
#include "json_io.hpp"
#include "sarndwi/rng.hpp"

namespace sarndwi {

// ---------------------------------------------------------------------------
// Configuration and parameter layout

void UNetConfig::validate() const {
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (encoder_filters.empty()) throw ConfigError("encoder_filters is empty");
  if (convs_per_block < 1) throw ConfigError("convs_per_block must be >= 1");
  if (bottleneck_filters < 1) throw ConfigError("bottleneck_filters must be >= 1");
  for (int f : encoder_filters) {
    if (f < 1) throw ConfigError("encoder filter counts must be >= 1");
  }
  if (!std::equal(encoder_filters.rbegin(), encoder_filters.rend(),
                  decoder_filters.begin(), decoder_filters.end())) {
    throw ConfigError("decoder_filters must be the reverse of encoder_filters");
  }
  if (encoder_filters.size() > 15) throw ConfigError("too many encoder stages");
}

std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(
    const UNetConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, std::vector<int>>> layout;
  auto add_conv = [&](const std::string& prefix, int cin, int cout) {
    layout.push_back({prefix + ".weight", {3, 3, cin, cout}});
    layout.push_back({prefix + ".bias", {cout}});
  };
  auto add_block = [&](const std::string& stage, int cin, int cout) {
    for (int k = 0; k < config.convs_per_block; ++k) {
      add_conv(stage + ".conv" + std::to_string(k + 1), k == 0 ? cin : cout, cout);
    }
  };

  int channels = config.input_channels;
  for (std::size_t s = 0; s < config.encoder_filters.size(); ++s) {
    add_block("enc" + std::to_string(s + 1), channels, config.encoder_filters[s]);
    channels = config.encoder_filters[s];
  }
  add_block("bottleneck", channels, config.bottleneck_filters);
  channels = config.bottleneck_filters;
  for (std::size_t d = 0; d < config.decoder_filters.size(); ++d) {
    const std::string stage = "dec" + std::to_string(d + 1);
    const int f = config.decoder_filters[d];
    // Transposed-convolution weights are stored input-channel-major.
    layout.push_back({stage + ".up.weight", {channels, 2, 2, f}});
    layout.push_back({stage + ".up.bias", {f}});
    add_block(stage, 2 * f, f);
    channels = f;
  }
  add_conv("head", channels, 1);
  return layout;
}

template <std::floating_point T>
std::size_t UNetParams<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.values.size();
  return n;
}

template <std::floating_point T>
const ParamTensor<T>& UNetParams<T>::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw InvalidArgumentError("no parameter named " + name);
}

template <std::floating_point T>
ParamTensor<T>& UNetParams<T>::find(const std::string& name) {
  return const_cast<ParamTensor<T>&>(std::as_const(*this).find(name));
}

namespace {

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_text(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Inputs feeding one output unit.
int fan_in(const std::string& name, const std::vector<int>& shape) {
  if (name.find(".up.") != std::string::npos) return shape[0];
  return shape[0] * shape[1] * shape[2];
}

bool is_weight(const std::string& name) {
  return name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
}

}  // namespace

template <std::floating_point T>
void audit_shapes(const UNetParams<T>& params) {
  const auto layout = parameter_layout(params.config);
  if (layout.size() != params.entries.size()) {
    throw ShapeError("parameter count mismatch: expected " +
                     std::to_string(layout.size()) + " entries, found " +
                     std::to_string(params.entries.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& e = params.entries[i];
    if (e.name != layout[i].first || e.shape != layout[i].second ||
        e.values.size() != element_count(e.shape)) {
      throw ShapeError("parameter " + std::to_string(i) + " is " + e.name +
                       shape_text(e.shape) + ", expected " + layout[i].first +
                       shape_text(layout[i].second));
    }
  }
}

template <std::floating_point T>
UNetParams<T> build_unet(const UNetConfig& config, std::uint64_t seed) {
  UNetParams<T> params;
  params.config = config;
  Rng rng(seed);
  for (auto& [name, shape] : parameter_layout(config)) {
    ParamTensor<T> e{name, shape, std::vector<T>(element_count(shape), T(0))};
    if (is_weight(name)) {
      const double stddev = std::sqrt(2.0 / fan_in(name, shape));
      for (T& v : e.values) v = static_cast<T>(stddev * rng.normal());
    }
    params.entries.push_back(std::move(e));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Layer kernels

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ConstRowVecMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

// 3x3 same-padded patches: row y*W+x, column (ky*3+kx)*C+ch.
template <typename T>
void im2col3x3(const T* img, int h, int w, int c, T* col) {
  const std::size_t row_len = 9 * static_cast<std::size_t>(c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T* dst = col + (static_cast<std::size_t>(y) * w + x) * row_len;
      for (int ky = 0; ky < 3; ++ky) {
        const int yy = y + ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int xx = x + kx - 1;
          T* cell = dst + (ky * 3 + kx) * c;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
            std::fill(cell, cell + c, T(0));
          } else {
            const T* src = img + (static_cast<std::size_t>(yy) * w + xx) * c;
            std::copy(src, src + c, cell);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3x3(const T* col, int h, int w, int c, T* img) {
  const std::size_t row_len = 9 * static_cast<std::size_t>(c);
  std::fill(img, img + static_cast<std::size_t>(h) * w * c, T(0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T* src = col + (static_cast<std::size_t>(y) * w + x) * row_len;
      for (int ky = 0; ky < 3; ++ky) {
        const int yy = y + ky - 1;
        if (yy < 0 || yy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int xx = x + kx - 1;
          if (xx < 0 || xx >= w) continue;
          T* dst = img + (static_cast<std::size_t>(yy) * w + xx) * c;
          const T* cell = src + (ky * 3 + kx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += cell[ch];
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& in, const ParamTensor<T>& weight,
                          const ParamTensor<T>& bias, bool relu) {
  const int cout = weight.shape[3];
  const int hw = in.h * in.w;
  const int k = 9 * in.c;
  Tensor<T> out(in.n, in.h, in.w, cout);
  std::vector<T> col(static_cast<std::size_t>(hw) * k);
  ConstMatMap<T> wm(weight.values.data(), k, cout);
  ConstRowVecMap<T> b(bias.values.data(), cout);
  for (int i = 0; i < in.n; ++i) {
    im2col3x3(in.image(i), in.h, in.w, in.c, col.data());
    MatMap<T> o(out.image(i), hw, cout);
    o.noalias() = ConstMatMap<T>(col.data(), hw, k) * wm;
    o.rowwise() += b;
  }
  if (relu) {
    for (T& v : out.data) v = v > T(0) ? v : T(0);
  }
  return out;
}

// dout is the gradient at the convolution output (post any ReLU masking).
template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& in, const ParamTensor<T>& weight,
                           const Tensor<T>& dout, ParamTensor<T>& dweight,
                           ParamTensor<T>& dbias, bool need_input_grad) {
  const int cout = weight.shape[3];
  const int hw = in.h * in.w;
  const int k = 9 * in.c;
  std::vector<T> col(static_cast<std::size_t>(hw) * k);
  ConstMatMap<T> wm(weight.values.data(), k, cout);
  MatMap<T> dw(dweight.values.data(), k, cout);
  Tensor<T> din;
  if (need_input_grad) din = Tensor<T>(in.n, in.h, in.w, in.c);
  for (int i = 0; i < in.n; ++i) {
    im2col3x3(in.image(i), in.h, in.w, in.c, col.data());
    ConstMatMap<T> d(dout.image(i), hw, cout);
    dw.noalias() += ConstMatMap<T>(col.data(), hw, k).transpose() * d;
    const T* g = dout.image(i);
    for (int p = 0; p < hw; ++p)
      for (int co = 0; co < cout; ++co) dbias.values[co] += g[static_cast<std::size_t>(p) * cout + co];
    if (need_input_grad) {
      MatMap<T>(col.data(), hw, k).noalias() = d * wm.transpose();
      col2im3x3(col.data(), in.h, in.w, in.c, din.image(i));
    }
  }
  return din;
}

template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& in, std::vector<std::uint32_t>& argmax) {
  Tensor<T> out(in.n, in.h / 2, in.w / 2, in.c);
  argmax.resize(out.size());
  std::size_t o = 0;
  for (int b = 0; b < in.n; ++b) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        for (int ch = 0; ch < in.c; ++ch, ++o) {
          std::uint32_t best_idx = 0;
          T best = -std::numeric_limits<T>::infinity();
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx = static_cast<std::uint32_t>(
                  ((static_cast<std::size_t>(2 * y + dy)) * in.w + 2 * x + dx) *
                      in.c + ch);
              const T v = in.image(b)[idx];
              // First maximum in scan order wins ties.
              if (v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          out.data[o] = best;
          argmax[o] = best_idx;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& dout,
                            const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& in) {
  Tensor<T> din(in.n, in.h, in.w, in.c);
  const std::size_t per_image = dout.image_size();
  for (int b = 0; b < dout.n; ++b) {
    T* dst = din.image(b);
    for (std::size_t j = 0; j < per_image; ++j) {
      const std::size_t o = b * per_image + j;
      dst[argmax[o]] += dout.data[o];
    }
  }
  return din;
}

// 2x2 stride-2 transposed convolution; weight shape [cin, 2, 2, cout].
template <typename T>
Tensor<T> upconv2_forward(const Tensor<T>& in, const ParamTensor<T>& weight,
                          const ParamTensor<T>& bias) {
  const int cout = weight.shape[3];
  const int hw = in.h * in.w;
  Tensor<T> out(in.n, 2 * in.h, 2 * in.w, cout);
  RowMat<T> y(hw, 4 * cout);
  ConstMatMap<T> wm(weight.values.data(), in.c, 4 * cout);
  for (int i = 0; i < in.n; ++i) {
    y.noalias() = ConstMatMap<T>(in.image(i), hw, in.c) * wm;
    T* dst = out.image(i);
    for (int py = 0; py < in.h; ++py) {
      for (int px = 0; px < in.w; ++px) {
        const T* src = y.data() + (static_cast<std::size_t>(py) * in.w + px) * 4 * cout;
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            T* cell = dst + ((static_cast<std::size_t>(2 * py + a)) * out.w +
                             2 * px + b) * cout;
            const T* s = src + (a * 2 + b) * cout;
            for (int co = 0; co < cout; ++co) cell[co] = s[co] + bias.values[co];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> upconv2_backward(const Tensor<T>& in, const ParamTensor<T>& weight,
                           const Tensor<T>& dout, ParamTensor<T>& dweight,
                           ParamTensor<T>& dbias) {
  const int cout = weight.shape[3];
  const int hw = in.h * in.w;
  RowMat<T> g(hw, 4 * cout);
  ConstMatMap<T> wm(weight.values.data(), in.c, 4 * cout);
  MatMap<T> dw(dweight.values.data(), in.c, 4 * cout);
  Tensor<T> din(in.n, in.h, in.w, in.c);
  for (int i = 0; i < in.n; ++i) {
    const T* src = dout.image(i);
    for (int py = 0; py < in.h; ++py) {
      for (int px = 0; px < in.w; ++px) {
        T* row = g.data() + (static_cast<std::size_t>(py) * in.w + px) * 4 * cout;
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const T* cell = src + ((static_cast<std::size_t>(2 * py + a)) * dout.w +
                                   2 * px + b) * cout;
            std::copy(cell, cell + cout, row + (a * 2 + b) * cout);
            for (int co = 0; co < cout; ++co) dbias.values[co] += cell[co];
          }
        }
      }
    }
    ConstMatMap<T> x(in.image(i), hw, in.c);
    dw.noalias() += x.transpose() * g;
    MatMap<T>(din.image(i), hw, in.c).noalias() = g * wm.transpose();
  }
  return din;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out(a.n, a.h, a.w, a.c + b.c);
  const std::size_t pixels = static_cast<std::size_t>(a.n) * a.h * a.w;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(a.data.data() + p * a.c, a.c, out.data.data() + p * out.c);
    std::copy_n(b.data.data() + p * b.c, b.c, out.data.data() + p * out.c + a.c);
  }
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& d, int ca, Tensor<T>& da, Tensor<T>& db) {
  const int cb = d.c - ca;
  da = Tensor<T>(d.n, d.h, d.w, ca);
  db = Tensor<T>(d.n, d.h, d.w, cb);
  const std::size_t pixels = static_cast<std::size_t>(d.n) * d.h * d.w;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(d.data.data() + p * d.c, ca, da.data.data() + p * ca);
    std::copy_n(d.data.data() + p * d.c + ca, cb, db.data.data() + p * cb);
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
T sigmoid(T z) {
  // Split by sign so exp never overflows.
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Network graph

template <std::floating_point T>
struct UNet<T>::Op {
  enum class Kind { Conv, Pool, Up, Concat, SaveSkip } kind;
  int weight = -1;  // entry index
  int bias = -1;
  bool relu = false;
  int slot = -1;     // skip slot for SaveSkip / Concat
  int channels = 0;  // Concat: channels of the upsampled half
};

template <std::floating_point T>
UNet<T>::UNet(const UNetConfig& config) : config_(config) {
  config_.validate();
  using Kind = typename Op::Kind;
  int entry = 0;
  auto conv = [&](bool relu) {
    ops_.push_back(Op{Kind::Conv, entry, entry + 1, relu});
    entry += 2;
  };
  const int stages = static_cast<int>(config_.encoder_filters.size());
  for (int s = 0; s < stages; ++s) {
    for (int k = 0; k < config_.convs_per_block; ++k) conv(true);
    ops_.push_back(Op{Kind::SaveSkip, -1, -1, false, s});
    ops_.push_back(Op{Kind::Pool});
  }
  for (int k = 0; k < config_.convs_per_block; ++k) conv(true);
  for (int d = 0; d < stages; ++d) {
    ops_.push_back(Op{Kind::Up, entry, entry + 1});
    entry += 2;
    ops_.push_back(Op{Kind::Concat, -1, -1, false, stages - 1 - d,
                      config_.decoder_filters[d]});
    for (int k = 0; k < config_.convs_per_block; ++k) conv(true);
  }
  conv(false);
  skip_slots_ = stages;
}

template <std::floating_point T>
UNet<T>::~UNet() = default;
template <std::floating_point T>
UNet<T>::UNet(UNet&&) noexcept = default;
template <std::floating_point T>
UNet<T>& UNet<T>::operator=(UNet&&) noexcept = default;

template <std::floating_point T>
void UNet<T>::check_input(const UNetParams<T>& params,
                          const Tensor<T>& inputs) const {
  if (!(params.config == config_)) {
    throw ShapeError("parameters were built for a different configuration");
  }
  const int div = config_.spatial_divisor();
  if (inputs.h <= 0 || inputs.w <= 0 || inputs.h % div != 0 ||
      inputs.w % div != 0) {
    throw ShapeError("input spatial dims " + std::to_string(inputs.h) + "x" +
                     std::to_string(inputs.w) + " must be positive multiples of " +
                     std::to_string(div));
  }
  if (inputs.c != config_.input_channels) {
    throw ShapeError("input has " + std::to_string(inputs.c) +
                     " channels, network expects " +
                     std::to_string(config_.input_channels));
  }
}

template <std::floating_point T>
Tensor<T> UNet<T>::forward(const UNetParams<T>& params,
                           const Tensor<T>& inputs) const {
  check_input(params, inputs);
  using Kind = typename Op::Kind;
  std::vector<Tensor<T>> skips(static_cast<std::size_t>(skip_slots_));
  Tensor<T> cur = inputs;
  for (const Op& op : ops_) {
    switch (op.kind) {
      case Kind::Conv:
        cur = conv3x3_forward(cur, params.entries[op.weight],
                              params.entries[op.bias], op.relu);
        break;
      case Kind::Pool: {
        std::vector<std::uint32_t> argmax;
        cur = maxpool2_forward(cur, argmax);
        break;
      }
      case Kind::Up:
        cur = upconv2_forward(cur, params.entries[op.weight],
                              params.entries[op.bias]);
        break;
      case Kind::Concat:
        cur = concat_channels(cur, skips[op.slot]);
        skips[op.slot] = Tensor<T>();
        break;
      case Kind::SaveSkip:
        skips[op.slot] = cur;
        break;
    }
  }
  for (T& v : cur.data) v = sigmoid(v);
  return cur;
}

template <std::floating_point T>
Tensor<T> UNet<T>::forward(const UNetParams<T>& params, const Tensor<T>& inputs,
                           ForwardTape<T>& tape) const {
  check_input(params, inputs);
  using Kind = typename Op::Kind;
  tape.inputs.clear();
  tape.pool_argmax.assign(ops_.size(), {});
  std::vector<int> skip_op(static_cast<std::size_t>(skip_slots_), -1);
  Tensor<T> cur = inputs;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    tape.inputs.push_back(std::move(cur));
    const Tensor<T>& in = tape.inputs.back();
    switch (op.kind) {
      case Kind::Conv:
        cur = conv3x3_forward(in, params.entries[op.weight],
                              params.entries[op.bias], op.relu);
        break;
      case Kind::Pool:
        cur = maxpool2_forward(in, tape.pool_argmax[i]);
        break;
      case Kind::Up:
        cur = upconv2_forward(in, params.entries[op.weight],
                              params.entries[op.bias]);
        break;
      case Kind::Concat:
        cur = concat_channels(in, tape.inputs[skip_op[op.slot]]);
        break;
      case Kind::SaveSkip:
        skip_op[op.slot] = static_cast<int>(i);
        cur = in;
        break;
    }
  }
  tape.logits = cur;
  for (T& v : cur.data) v = sigmoid(v);
  tape.probs = cur;
  return cur;
}

template <std::floating_point T>
void UNet<T>::backward(const UNetParams<T>& params, const ForwardTape<T>& tape,
                       const Tensor<T>& dlogits, UNetParams<T>& grads) const {
  using Kind = typename Op::Kind;
  if (tape.inputs.size() != ops_.size()) {
    throw InvalidArgumentError("backward called without a matching forward tape");
  }
  std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(skip_slots_));
  Tensor<T> d = dlogits;
  for (std::size_t idx = ops_.size(); idx-- > 0;) {
    const Op& op = ops_[idx];
    const Tensor<T>& in = tape.inputs[idx];
    switch (op.kind) {
      case Kind::Conv: {
        if (op.relu) {
          const Tensor<T>& out = tape.inputs[idx + 1];
          for (std::size_t j = 0; j < d.data.size(); ++j) {
            if (!(out.data[j] > T(0))) d.data[j] = T(0);
          }
        }
        d = conv3x3_backward(in, params.entries[op.weight], d,
                             grads.entries[op.weight], grads.entries[op.bias],
                             idx > 0);
        break;
      }
      case Kind::Pool:
        d = maxpool2_backward(d, tape.pool_argmax[idx], in);
        break;
      case Kind::Up:
        d = upconv2_backward(in, params.entries[op.weight], d,
                             grads.entries[op.weight], grads.entries[op.bias]);
        break;
      case Kind::Concat: {
        Tensor<T> d_up;
        split_channels(d, op.channels, d_up, skip_grads[op.slot]);
        d = std::move(d_up);
        break;
      }
      case Kind::SaveSkip:
        add_into(d, skip_grads[op.slot]);
        skip_grads[op.slot] = Tensor<T>();
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Loss

LossKind parse_loss_kind(const std::string& name) {
  if (name == "mse" || name == "mean_squared_error") {
    return LossKind::MeanSquaredError;
  }
  if (name == "bce" || name == "binary_cross_entropy") {
    return LossKind::BinaryCrossEntropy;
  }
  throw ConfigError("unknown loss '" + name +
                    "' (expected mean_squared_error or binary_cross_entropy)");
}

std::string loss_kind_name(LossKind kind) {
  return kind == LossKind::MeanSquaredError ? "mean_squared_error"
                                            : "binary_cross_entropy";
}

namespace {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("prediction " + shape_string(a.shape()) + " vs target " +
                     shape_string(b.shape()));
  }
}

constexpr double kBceClamp = 1e-7;

double bce_term(double p, double t) {
  p = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
  return -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
}

}  // namespace

template <std::floating_point T>
double loss_value(const Tensor<T>& pred, const Tensor<T>& target, LossKind kind) {
  check_same_shape(pred, target);
  if (pred.data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double p = pred.data[i];
    const double t = target.data[i];
    sum += kind == LossKind::MeanSquaredError ? (p - t) * (p - t) : bce_term(p, t);
  }
  return sum / static_cast<double>(pred.data.size());
}

template <std::floating_point T>
double loss_and_logit_grad(const Tensor<T>& pred, const Tensor<T>& target,
                           LossKind kind, Tensor<T>& dlogits) {
  const double loss = loss_value(pred, target, kind);
  dlogits = Tensor<T>(pred.n, pred.h, pred.w, pred.c);
  const T inv_n = T(1) / static_cast<T>(pred.data.size());
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const T p = pred.data[i];
    const T t = target.data[i];
    dlogits.data[i] = kind == LossKind::MeanSquaredError
                          ? T(2) * (p - t) * p * (T(1) - p) * inv_n
                          : (p - t) * inv_n;
  }
  return loss;
}

template <std::floating_point T>
double compute_gradients(const UNet<T>& net, const UNetParams<T>& params,
                         const Tensor<T>& inputs, const Tensor<T>& targets,
                         LossKind kind, UNetParams<T>& grads) {
  grads.config = params.config;
  grads.entries.resize(params.entries.size());
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    grads.entries[i].name = params.entries[i].name;
    grads.entries[i].shape = params.entries[i].shape;
    grads.entries[i].values.assign(params.entries[i].values.size(), T(0));
  }
  ForwardTape<T> tape;
  const Tensor<T> probs = net.forward(params, inputs, tape);
  Tensor<T> dlogits;
  const double loss = loss_and_logit_grad(probs, targets, kind, dlogits);
  net.backward(params, tape, dlogits, grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Prediction

RadarChip::RadarChip(Raster values) : values_(std::move(values)) {
  if (values_.height() != kSize || values_.width() != kSize ||
      values_.channels() != kChannels) {
    throw ShapeError("radar chip must be 128x128x2, got " +
                     std::to_string(values_.height()) + "x" +
                     std::to_string(values_.width()) + "x" +
                     std::to_string(values_.channels()));
  }
  for (float v : values_.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DomainError("radar chip values must lie in [0, 1]");
    }
  }
}

NdwiMap predict_raster(const UNet<float>& net, const UNetParams<float>& params,
                       const Raster& radar) {
  Tensor<float> in(1, radar.height(), radar.width(), radar.channels());
  std::copy(radar.values().begin(), radar.values().end(), in.data.begin());
  Tensor<float> out = net.forward(params, in);
  NdwiMap m;
  m.height = out.h;
  m.width = out.w;
  m.scale = NdwiScale::Unit;
  m.values = std::move(out.data);
  return m;
}

NdwiMap predict(const UNet<float>& net, const UNetParams<float>& params,
                const RadarChip& chip) {
  return predict_raster(net, params, chip.raster());
}

// ---------------------------------------------------------------------------
// Optimizer

template <std::floating_point T>
Adam<T>::Adam(const UNetParams<T>& params, AdamOptions options)
    : options_(options) {
  for (const auto& e : params.entries) {
    m_.emplace_back(e.values.size(), T(0));
    v_.emplace_back(e.values.size(), T(0));
  }
}

template <std::floating_point T>
void Adam<T>::step(UNetParams<T>& params, const UNetParams<T>& grads) {
  ++t_;
  const T b1 = static_cast<T>(options_.beta1);
  const T b2 = static_cast<T>(options_.beta2);
  const T eps = static_cast<T>(options_.epsilon);
  const T c1 = static_cast<T>(1.0 - std::pow(options_.beta1, static_cast<double>(t_)));
  const T c2 = static_cast<T>(1.0 - std::pow(options_.beta2, static_cast<double>(t_)));
  const T lr = static_cast<T>(options_.learning_rate);
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    auto& p = params.entries[i].values;
    const auto& g = grads.entries[i].values;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T mhat = m[j] / c1;
      const T vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Weights file

namespace {
constexpr char kWeightsMagic[4] = {'C', 'B', 'W', 'T'};
}

void save_weights(const UNetParams<float>& params,
                  const std::filesystem::path& path) {
  audit_shapes(params);
  detail::ByteWriter out;
  out.raw(std::string_view(kWeightsMagic, 4));
  out.u16(kWeightsFormatVersion);
  const std::string header = nlohmann::json(params.config).dump();
  out.u32(static_cast<std::uint32_t>(header.size()));
  out.raw(header);
  out.u32(static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& e : params.entries) {
    out.u16(static_cast<std::uint16_t>(e.name.size()));
    out.raw(e.name);
    out.u8(static_cast<std::uint8_t>(e.shape.size()));
    for (int d : e.shape) out.u32(static_cast<std::uint32_t>(d));
    out.f32s(e.values);
  }
  detail::write_file(path, out.bytes());
}

UNetParams<float> load_weights(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string what = "weights " + path.string();
  detail::ByteReader in(bytes, what);
  if (in.raw(4) != std::string_view(kWeightsMagic, 4)) {
    throw FormatError(what + ": bad magic bytes");
  }
  const std::uint16_t version = in.u16();
  if (version != kWeightsFormatVersion) {
    throw FormatError(what + ": unsupported format version " +
                      std::to_string(version));
  }
  UNetParams<float> params;
  try {
    const std::string header = in.raw(in.u32());
    params.config = nlohmann::json::parse(header).get<UNetConfig>();
    params.config.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(what + ": bad configuration header: " + e.what());
  }
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamTensor<float> e;
    e.name = in.raw(in.u16());
    const int rank = in.u8();
    for (int r = 0; r < rank; ++r) e.shape.push_back(static_cast<int>(in.u32()));
    const std::size_t n = element_count(e.shape);
    if (n * 4 > in.remaining()) {
      throw FormatError(what + ": entry " + e.name + " truncated");
    }
    e.values.resize(n);
    in.f32s(e.values);
    params.entries.push_back(std::move(e));
  }
  if (in.remaining() != 0) throw FormatError(what + ": trailing bytes");
  try {
    audit_shapes(params);
  } catch (const ShapeError& e) {
    throw FormatError(what + ": " + e.what());
  }
  return params;
}

UNetParams<float> load_weights(const std::filesystem::path& path,
                               const UNetConfig& expected) {
  UNetParams<float> params = load_weights(path);
  if (!(params.config == expected)) {
    throw FormatError("weights " + path.string() +
                      ": stored configuration " +
                      nlohmann::json(params.config).dump() +
                      " does not match expected " +
                      nlohmann::json(expected).dump());
  }
  return params;
}

// ---------------------------------------------------------------------------

#define SARNDWI_INSTANTIATE(T)                                                  \
  template struct UNetParams<T>;                                                \
  template void audit_shapes<T>(const UNetParams<T>&);                          \
  template UNetParams<T> build_unet<T>(const UNetConfig&, std::uint64_t);       \
  template struct ForwardTape<T>;                                               \
  template class UNet<T>;                                                       \
  template double loss_value<T>(const Tensor<T>&, const Tensor<T>&, LossKind);  \
  template double loss_and_logit_grad<T>(const Tensor<T>&, const Tensor<T>&,    \
                                         LossKind, Tensor<T>&);                 \
  template double compute_gradients<T>(const UNet<T>&, const UNetParams<T>&,    \
                                       const Tensor<T>&, const Tensor<T>&,      \
                                       LossKind, UNetParams<T>&);               \
  template class Adam<T>;

SARNDWI_INSTANTIATE(float)
SARNDWI_INSTANTIATE(double)

#undef SARNDWI_INSTANTIATE

}  // namespace sarndwi
