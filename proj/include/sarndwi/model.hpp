#pragma once

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sarndwi/indices.hpp"
#include "sarndwi/raster.hpp"
#include "sarndwi/tensor.hpp"

namespace sarndwi {

// Encoder/decoder layout. Kernels are fixed: 3x3 same-padded convolutions
// with ReLU, 2x2 max-pooling, 2x2 stride-2 transposed convolutions for
// upsampling, and a 3x3 convolution + sigmoid head producing one channel.
struct UNetConfig {
  int input_channels = 2;
  std::vector<int> encoder_filters{64, 128, 256, 512};
  int bottleneck_filters = 1024;
  std::vector<int> decoder_filters{512, 256, 128, 64};
  int convs_per_block = 2;

  // Throws ConfigError when the filter lists are inconsistent.
  void validate() const;
  // Spatial dims must be multiples of this.
  int spatial_divisor() const noexcept { return 1 << encoder_filters.size(); }

  bool operator==(const UNetConfig&) const = default;
};

// One named weight or bias array.
template <std::floating_point T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;
};

// Every learnable array of a U-Net in declaration order (encoder stages,
// bottleneck, decoder stages, head). Names look like "enc1.conv2.weight",
// "bottleneck.conv1.bias", "dec3.up.weight", "head.weight".
template <std::floating_point T>
struct UNetParams {
  UNetConfig config;
  std::vector<ParamTensor<T>> entries;

  std::size_t parameter_count() const noexcept;
  const ParamTensor<T>& find(const std::string& name) const;
  ParamTensor<T>& find(const std::string& name);

  template <std::floating_point U>
  UNetParams<U> cast() const {
    UNetParams<U> out;
    out.config = config;
    for (const auto& e : entries) {
      out.entries.push_back({e.name, e.shape, {e.values.begin(), e.values.end()}});
    }
    return out;
  }
};

// Expected (name, shape) list for a configuration.
std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(
    const UNetConfig& config);

// Compares names and shapes against the layout; throws ShapeError.
template <std::floating_point T>
void audit_shapes(const UNetParams<T>& params);

// He-normal weights (std = sqrt(2 / fan_in)) and zero biases; deterministic
// in seed. fan_in counts the inputs feeding one output unit: 9 * C_in for the
// 3x3 convolutions, C_in for the stride-2 transposed convolutions.
template <std::floating_point T>
UNetParams<T> build_unet(const UNetConfig& config, std::uint64_t seed);

// Intermediate values retained by a training forward pass. inputs[i] is the
// input of graph op i, so the output of op i is inputs[i+1].
template <std::floating_point T>
struct ForwardTape {
  std::vector<Tensor<T>> inputs;
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  Tensor<T> logits;
  Tensor<T> probs;
};

template <std::floating_point T>
class UNet {
 public:
  explicit UNet(const UNetConfig& config);
  ~UNet();
  UNet(UNet&&) noexcept;
  UNet& operator=(UNet&&) noexcept;

  const UNetConfig& config() const noexcept { return config_; }

  // Inference: inputs (B,H,W,C_in) -> probabilities (B,H,W,1).
  Tensor<T> forward(const UNetParams<T>& params, const Tensor<T>& inputs) const;

  // Training forward pass; keeps what backward needs.
  Tensor<T> forward(const UNetParams<T>& params, const Tensor<T>& inputs,
                    ForwardTape<T>& tape) const;

  // Given dLoss/dlogit at the head (pre-sigmoid), accumulates parameter
  // gradients into grads (same layout as params; zeroed by the caller).
  void backward(const UNetParams<T>& params, const ForwardTape<T>& tape,
                const Tensor<T>& dlogits, UNetParams<T>& grads) const;

 private:
  struct Op;
  UNetConfig config_;
  std::vector<Op> ops_;
  int skip_slots_ = 0;

  void check_input(const UNetParams<T>& params, const Tensor<T>& inputs) const;
};

enum class LossKind { MeanSquaredError, BinaryCrossEntropy };

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind kind);

// Mean loss over every pixel of every batch entry.
template <std::floating_point T>
double loss_value(const Tensor<T>& pred, const Tensor<T>& target, LossKind kind);

// Loss and its gradient with respect to the pre-sigmoid logits.
template <std::floating_point T>
double loss_and_logit_grad(const Tensor<T>& pred, const Tensor<T>& target,
                           LossKind kind, Tensor<T>& dlogits);

// Loss and gradients for one batch; grads is resized/zeroed here.
template <std::floating_point T>
double compute_gradients(const UNet<T>& net, const UNetParams<T>& params,
                         const Tensor<T>& inputs, const Tensor<T>& targets,
                         LossKind kind, UNetParams<T>& grads);

// 128x128x2 radar chip, channel 0 = VV, 1 = VH, values in [0, 1].
class RadarChip {
 public:
  static constexpr int kSize = 128;
  static constexpr int kChannels = 2;

  explicit RadarChip(Raster values);
  const Raster& raster() const noexcept { return values_; }

 private:
  Raster values_;
};

// Single-chip forward pass; output squeezed to an H x W unit-scale map.
NdwiMap predict(const UNet<float>& net, const UNetParams<float>& params,
                const RadarChip& chip);
// Same for any H x W x C_in raster whose dims fit the network.
NdwiMap predict_raster(const UNet<float>& net, const UNetParams<float>& params,
                       const Raster& radar);

// Adaptive-moment optimizer with bias correction.
struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

template <std::floating_point T>
class Adam {
 public:
  Adam(const UNetParams<T>& params, AdamOptions options);
  void step(UNetParams<T>& params, const UNetParams<T>& grads);
  std::int64_t steps() const noexcept { return t_; }

 private:
  AdamOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::int64_t t_ = 0;
};

// Weights file: "CBWT", u16 version, u32-length-prefixed JSON header holding
// the UNetConfig, u32 entry count, then per entry a u16-prefixed name, u8
// rank, u32 dims, and float32 data. Little-endian throughout.
inline constexpr std::uint16_t kWeightsFormatVersion = 1;

void save_weights(const UNetParams<float>& params,
                  const std::filesystem::path& path);
UNetParams<float> load_weights(const std::filesystem::path& path);
// Also requires the stored configuration to equal `expected`.
UNetParams<float> load_weights(const std::filesystem::path& path,
                               const UNetConfig& expected);

}  // namespace sarndwi
