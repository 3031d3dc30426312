#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "sarndwi/error.hpp"
#include "sarndwi/model.hpp"
#include "support.hpp"

using namespace sarndwi;
using testing_support::TempDir;

namespace {

UNetConfig tiny_config() {
  UNetConfig c;
  c.encoder_filters = {2, 4};
  c.bottleneck_filters = 8;
  c.decoder_filters = {4, 2};
  return c;
}

template <typename T>
Tensor<T> random_tensor(int n, int h, int w, int c, std::uint64_t seed, double lo = 0.0,
                        double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(n, h, w, c);
  for (auto& v : t.data) v = static_cast<T>(u(gen));
  return t;
}

std::vector<double> as_double(const std::vector<double>& v) { return v; }
std::vector<double> as_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

// Direct-loop forward pass built from the oracle primitives.
template <typename T>
oracle::Image oracle_forward(const UNetParams<T>& p, const oracle::Image& input) {
  const UNetConfig& c = p.config;
  auto w = [&](const std::string& name) { return as_double(p.find(name).values); };
  auto block = [&](oracle::Image x, const std::string& stage, int f) {
    for (int k = 1; k <= c.convs_per_block; ++k) {
      const std::string pre = stage + ".conv" + std::to_string(k);
      x = oracle::conv3x3(x, w(pre + ".weight"), w(pre + ".bias"), f, true);
    }
    return x;
  };
  std::vector<oracle::Image> skips;
  oracle::Image x = input;
  for (std::size_t s = 0; s < c.encoder_filters.size(); ++s) {
    x = block(x, "enc" + std::to_string(s + 1), c.encoder_filters[s]);
    skips.push_back(x);
    x = oracle::maxpool2(x);
  }
  x = block(x, "bottleneck", c.bottleneck_filters);
  for (std::size_t d = 0; d < c.decoder_filters.size(); ++d) {
    const std::string stage = "dec" + std::to_string(d + 1);
    const int f = c.decoder_filters[d];
    x = oracle::upconv2(x, w(stage + ".up.weight"), w(stage + ".up.bias"), f);
    x = oracle::concat(x, skips[skips.size() - 1 - d]);
    x = block(x, stage, f);
  }
  x = oracle::conv3x3(x, w("head.weight"), w("head.bias"), 1, false);
  for (double& v : x.v) v = 1.0 / (1.0 + std::exp(-v));
  return x;
}

template <typename T>
void randomize_biases(UNetParams<T>& p, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& e : p.entries)
    if (e.shape.size() == 1)
      for (auto& v : e.values) v = static_cast<T>(u(gen));
}

}  // namespace

TEST(UNetConfig, DefaultsAndValidation) {
  const UNetConfig c;
  EXPECT_EQ(c.encoder_filters, (std::vector<int>{64, 128, 256, 512}));
  EXPECT_EQ(c.bottleneck_filters, 1024);
  EXPECT_EQ(c.decoder_filters, (std::vector<int>{512, 256, 128, 64}));
  EXPECT_EQ(c.spatial_divisor(), 16);
  EXPECT_NO_THROW(c.validate());
  UNetConfig bad = c;
  bad.decoder_filters = {64, 128, 256, 512};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.decoder_filters.pop_back();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.encoder_filters[1] = 0;
  bad.decoder_filters[2] = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(build_unet<float>(bad, 1), ConfigError);
}

TEST(UNetParams, LayoutNamesAndShapes) {
  const auto layout = parameter_layout(UNetConfig{});
  auto shape_of = [&](const std::string& name) {
    for (const auto& [n, s] : layout)
      if (n == name) return s;
    return std::vector<int>{};
  };
  EXPECT_EQ(shape_of("enc1.conv1.weight"), (std::vector<int>{3, 3, 2, 64}));
  EXPECT_EQ(shape_of("enc4.conv2.weight"), (std::vector<int>{3, 3, 512, 512}));
  EXPECT_EQ(shape_of("bottleneck.conv1.weight"), (std::vector<int>{3, 3, 512, 1024}));
  EXPECT_EQ(shape_of("dec1.up.weight"), (std::vector<int>{1024, 2, 2, 512}));
  EXPECT_EQ(shape_of("dec1.conv1.weight"), (std::vector<int>{3, 3, 1024, 512}));
  EXPECT_EQ(shape_of("dec4.conv2.weight"), (std::vector<int>{3, 3, 64, 64}));
  EXPECT_EQ(shape_of("head.weight"), (std::vector<int>{3, 3, 64, 1}));
  EXPECT_EQ(shape_of("head.bias"), (std::vector<int>{1}));

  const auto p = build_unet<float>(UNetConfig{}, 1);
  EXPECT_NO_THROW(audit_shapes(p));
  EXPECT_EQ(p.parameter_count(), 31031681u);
}

TEST(UNetParams, AuditCatchesShapeDrift) {
  auto p = build_unet<float>(tiny_config(), 1);
  p.entries[3].shape[0] += 1;
  EXPECT_THROW(audit_shapes(p), ShapeError);
  auto q = build_unet<float>(tiny_config(), 1);
  q.entries.pop_back();
  EXPECT_THROW(audit_shapes(q), ShapeError);
}

TEST(UNetParams, SameSeedBitIdenticalDifferentSeedDiffers) {
  const auto a = build_unet<float>(UNetConfig{}, 42);
  const auto b = build_unet<float>(UNetConfig{}, 42);
  const auto c = build_unet<float>(UNetConfig{}, 43);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    ASSERT_EQ(std::memcmp(a.entries[i].values.data(), b.entries[i].values.data(),
                          a.entries[i].values.size() * sizeof(float)),
              0);
  }
  EXPECT_NE(a.find("enc1.conv1.weight").values, c.find("enc1.conv1.weight").values);
}

TEST(UNetParams, HeInitVarianceAndZeroBiases) {
  const auto p = build_unet<float>(UNetConfig{}, 7);
  int checked = 0;
  for (const auto& e : p.entries) {
    if (e.shape.size() == 1) {
      for (float v : e.values) ASSERT_EQ(v, 0.0f) << e.name;
      continue;
    }
    if (e.values.size() < 10000) continue;
    // conv [3,3,cin,cout]: fan_in = 9*cin; transposed conv [cin,2,2,cout]: fan_in = cin.
    const bool up = e.name.find(".up.") != std::string::npos;
    const double fan_in = up ? e.shape[0] : 9.0 * e.shape[2];
    double mean = 0.0;
    for (float v : e.values) mean += v;
    mean /= static_cast<double>(e.values.size());
    double var = 0.0;
    for (float v : e.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(e.values.size() - 1);
    EXPECT_NEAR(var / (2.0 / fan_in), 1.0, 0.1) << e.name;
    EXPECT_NEAR(mean, 0.0, 5.0 * std::sqrt(2.0 / fan_in / e.values.size())) << e.name;
    ++checked;
  }
  EXPECT_GT(checked, 15);
}

TEST(Forward, DefaultNetworkShapeAndRange) {
  const UNetConfig cfg;
  const auto p = build_unet<float>(cfg, 3);
  const UNet<float> net(cfg);
  const auto x = random_tensor<float>(2, 128, 128, 2, 5);
  const auto y = net.forward(p, x);
  EXPECT_EQ(y.shape(), (std::array<int, 4>{2, 128, 128, 1}));
  for (float v : y.data) {
    ASSERT_GT(v, 0.0f);
    ASSERT_LT(v, 1.0f);
  }
}

TEST(Forward, ZeroHeadGivesOneHalf) {
  const UNetConfig cfg = tiny_config();
  auto p = build_unet<float>(cfg, 3);
  for (auto& v : p.find("head.weight").values) v = 0.0f;
  const UNet<float> net(cfg);
  const auto y = net.forward(p, random_tensor<float>(3, 16, 16, 2, 1));
  for (float v : y.data) ASSERT_EQ(v, 0.5f);
}

TEST(Forward, MatchesDirectLoopOracle) {
  const UNetConfig cfg = tiny_config();
  auto p = build_unet<double>(cfg, 11);
  randomize_biases(p, 12);
  const UNet<double> net(cfg);
  const auto x = random_tensor<double>(2, 16, 16, 2, 13);
  const auto y = net.forward(p, x);
  for (int b = 0; b < 2; ++b) {
    oracle::Image img(16, 16, 2);
    std::copy(x.image(b), x.image(b) + x.image_size(), img.v.begin());
    const oracle::Image ref = oracle_forward(p, img);
    for (std::size_t i = 0; i < ref.v.size(); ++i) {
      ASSERT_NEAR(y.image(b)[i], ref.v[i], 1e-12) << "batch " << b << " pixel " << i;
    }
  }
}

TEST(Forward, TrainingPassMatchesInference) {
  const UNetConfig cfg = tiny_config();
  const auto p = build_unet<float>(cfg, 2);
  const UNet<float> net(cfg);
  const auto x = random_tensor<float>(2, 16, 16, 2, 3);
  ForwardTape<float> tape;
  EXPECT_EQ(net.forward(p, x).data, net.forward(p, x, tape).data);
}

TEST(Forward, ShapeErrors) {
  const UNetConfig cfg;
  const auto p = build_unet<float>(cfg, 3);
  const UNet<float> net(cfg);
  EXPECT_THROW(net.forward(p, Tensor<float>(1, 120, 128, 2)), ShapeError);
  EXPECT_THROW(net.forward(p, Tensor<float>(1, 128, 128, 3)), ShapeError);
  const auto other = build_unet<float>(tiny_config(), 3);
  EXPECT_THROW(net.forward(other, Tensor<float>(1, 128, 128, 2)), ShapeError);
  EXPECT_THROW(RadarChip(Raster(128, 128, 1)), ShapeError);
  EXPECT_THROW(RadarChip(Raster(128, 128, 2, 1.5f)), DomainError);
}

TEST(Predict, BatchOfOneMatchesPredict) {
  const UNetConfig cfg = tiny_config();
  const auto p = build_unet<float>(cfg, 4);
  const UNet<float> net(cfg);
  const auto x = random_tensor<float>(1, 128, 128, 2, 6);
  const RadarChip chip(Raster(128, 128, 2, x.data));
  const NdwiMap m = predict(net, p, chip);
  EXPECT_EQ(m.scale, NdwiScale::Unit);
  EXPECT_EQ(m.height, 128);
  EXPECT_EQ(m.values, net.forward(p, x).data);
}

TEST(Loss, WorkedValuesAndOracle) {
  Tensor<double> half(1, 4, 4, 1, 0.5);
  Tensor<double> ones(1, 4, 4, 1, 1.0);
  EXPECT_EQ(loss_value(half, half, LossKind::MeanSquaredError), 0.0);
  EXPECT_DOUBLE_EQ(loss_value(half, ones, LossKind::MeanSquaredError), 0.25);

  const auto p = random_tensor<double>(3, 8, 8, 1, 21, 0.01, 0.99);
  const auto t = random_tensor<double>(3, 8, 8, 1, 22);
  const double mse = loss_value(p, t, LossKind::MeanSquaredError);
  const double bce = loss_value(p, t, LossKind::BinaryCrossEntropy);
  EXPECT_NEAR(mse, oracle::mse(p.data, t.data), 1e-9 * oracle::mse(p.data, t.data));
  EXPECT_NEAR(bce, oracle::bce(p.data, t.data), 1e-9 * oracle::bce(p.data, t.data));
  EXPECT_EQ(parse_loss_kind("mse"), LossKind::MeanSquaredError);
  EXPECT_EQ(parse_loss_kind("binary_cross_entropy"), LossKind::BinaryCrossEntropy);
  EXPECT_THROW(parse_loss_kind("hinge"), ConfigError);
}

TEST(Loss, LogitGradientMatchesFiniteDifference) {
  const auto z = random_tensor<double>(1, 4, 4, 1, 31, -2.0, 2.0);
  const auto t = random_tensor<double>(1, 4, 4, 1, 32);
  auto sigmoid = [](const Tensor<double>& logits) {
    Tensor<double> p = logits;
    for (auto& v : p.data) v = 1.0 / (1.0 + std::exp(-v));
    return p;
  };
  for (LossKind kind : {LossKind::MeanSquaredError, LossKind::BinaryCrossEntropy}) {
    Tensor<double> g;
    loss_and_logit_grad(sigmoid(z), t, kind, g);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      auto zp = z, zm = z;
      zp.data[i] += 1e-6;
      zm.data[i] -= 1e-6;
      const double fd = (loss_value(sigmoid(zp), t, kind) - loss_value(sigmoid(zm), t, kind)) / 2e-6;
      EXPECT_NEAR(g.data[i], fd, 1e-7);
    }
  }
}

TEST(Gradient, ReducedNetworkMatchesCentralDifferences) {
  const UNetConfig cfg = tiny_config();
  auto p = build_unet<double>(cfg, 5);
  randomize_biases(p, 6);
  const UNet<double> net(cfg);
  const auto x = random_tensor<double>(2, 8, 8, 2, 7);
  const auto t = random_tensor<double>(2, 8, 8, 1, 8);
  UNetParams<double> grads;
  compute_gradients(net, p, x, t, LossKind::MeanSquaredError, grads);

  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t e = 0; e < p.entries.size(); ++e) {
    for (std::size_t i = 0; i < p.entries[e].values.size(); ++i) {
      double& w = p.entries[e].values[i];
      const double saved = w;
      w = saved + h;
      const double lp = loss_value(net.forward(p, x), t, LossKind::MeanSquaredError);
      w = saved - h;
      const double lm = loss_value(net.forward(p, x), t, LossKind::MeanSquaredError);
      w = saved;
      const double fd = (lp - lm) / (2 * h);
      const double an = grads.entries[e].values[i];
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
      const double rel = std::abs(fd - an) / scale;
      worst = std::max(worst, rel);
      ASSERT_LT(rel, 1e-3) << p.entries[e].name << "[" << i << "] analytic " << an
                           << " numeric " << fd;
    }
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  UNetParams<double> p;
  p.entries.push_back({"w", {2}, {1.0, -1.0}});
  UNetParams<double> g = p;
  g.entries[0].values = {0.5, -3.0};
  Adam<double> opt(p, AdamOptions{});
  opt.step(p, g);
  // The bias-corrected first step is lr * g / (|g| + eps), about lr * sign(g).
  EXPECT_NEAR(p.entries[0].values[0], 1.0 - 1e-3, 1e-9);
  EXPECT_NEAR(p.entries[0].values[1], -1.0 + 1e-3, 1e-9);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Weights, SaveLoadBitExact) {
  TempDir dir("weights");
  const auto p = build_unet<float>(tiny_config(), 9);
  save_weights(p, dir / "w.cbwt");
  const auto back = load_weights(dir / "w.cbwt");
  EXPECT_EQ(back.config, p.config);
  ASSERT_EQ(back.entries.size(), p.entries.size());
  for (std::size_t i = 0; i < p.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].name, p.entries[i].name);
    EXPECT_EQ(back.entries[i].shape, p.entries[i].shape);
    ASSERT_EQ(std::memcmp(back.entries[i].values.data(), p.entries[i].values.data(),
                          p.entries[i].values.size() * sizeof(float)),
              0);
  }
  EXPECT_NO_THROW(load_weights(dir / "w.cbwt", tiny_config()));
}

TEST(Weights, MismatchedConfigAndCorruptionAreFormatErrors) {
  TempDir dir("weights_bad");
  const auto p = build_unet<float>(tiny_config(), 9);
  save_weights(p, dir / "w.cbwt");
  EXPECT_THROW(load_weights(dir / "w.cbwt", UNetConfig{}), FormatError);

  std::vector<char> bytes;
  {
    std::ifstream in(dir / "w.cbwt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::vector<char>& b) {
    std::ofstream out(dir / "x.cbwt", std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  write(bad_magic);
  EXPECT_THROW(load_weights(dir / "x.cbwt"), FormatError);

  auto bad_version = bytes;
  bad_version[4] = 9;
  write(bad_version);
  EXPECT_THROW(load_weights(dir / "x.cbwt"), FormatError);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  write(truncated);
  EXPECT_THROW(load_weights(dir / "x.cbwt"), FormatError);

  auto trailing = bytes;
  trailing.push_back(0);
  write(trailing);
  EXPECT_THROW(load_weights(dir / "x.cbwt"), FormatError);

  EXPECT_THROW(load_weights(dir / "absent.cbwt"), IoError);
}
