#include <gtest/gtest.h>

#include <random>

#include "sarndwi/error.hpp"
#include "sarndwi/indices.hpp"

using namespace sarndwi;

TEST(Ndwi, WorkedValues) {
  EXPECT_DOUBLE_EQ(ndwi_value(0.3, 0.1), 0.5);
  EXPECT_DOUBLE_EQ(ndwi_value(0.2, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(ndwi_value(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(ndwi_value(1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(ndwi_value(0.0, 1.0), -1.0);
}

TEST(Ndwi, RescaleEndpoints) {
  EXPECT_DOUBLE_EQ(signed_to_unit(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(signed_to_unit(0.0), 0.5);
  EXPECT_DOUBLE_EQ(signed_to_unit(0.5), 0.75);
  EXPECT_DOUBLE_EQ(signed_to_unit(1.0), 1.0);
}

TEST(Ndwi, RandomPairsAntisymmetryRangeRoundTrip) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> g(100000), n(100000);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = dist(gen);
    n[i] = dist(gen);
  }
  g[0] = n[0] = 0.0;
  const auto fwd = compute_ndwi<double>(g, n);
  const auto rev = compute_ndwi<double>(n, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_NEAR(fwd[i], -rev[i], 1e-12);
    ASSERT_GE(fwd[i], -1.0);
    ASSERT_LE(fwd[i], 1.0);
    ASSERT_NEAR(unit_to_signed(signed_to_unit(fwd[i])), fwd[i], 1e-12);
  }
  EXPECT_EQ(fwd[0], 0.0);
}

TEST(Ndwi, RejectsMismatchAndNegativeInput) {
  const std::vector<double> a{0.1, 0.2};
  const std::vector<double> b{0.1};
  EXPECT_THROW(compute_ndwi<double>(a, b), DimensionError);
  const std::vector<double> neg{0.1, -0.01};
  EXPECT_THROW(compute_ndwi<double>(a, neg), NegativeRadianceError);
  const std::vector<double> nan{0.1, std::nan("")};
  EXPECT_THROW(compute_ndwi<double>(a, nan), NegativeRadianceError);

  EXPECT_THROW(compute_ndwi(Raster(2, 2, 1, 0.1f), Raster(2, 3, 1, 0.1f)), DimensionError);
}

TEST(Ndwi, MapScalesAndScaleErrors) {
  const Raster green(1, 3, 1, std::vector<float>{0.3f, 0.2f, 0.0f});
  const Raster nir(1, 3, 1, std::vector<float>{0.1f, 0.2f, 0.0f});
  const NdwiMap s = compute_ndwi(green, nir);
  EXPECT_EQ(s.scale, NdwiScale::Signed);
  EXPECT_NEAR(s.values[0], 0.5f, 1e-6f);
  const NdwiMap u = rescale_to_unit(s);
  EXPECT_EQ(u.scale, NdwiScale::Unit);
  EXPECT_NEAR(u.values[0], 0.75f, 1e-6f);
  EXPECT_FLOAT_EQ(u.values[2], 0.5f);
  EXPECT_THROW(rescale_to_unit(u), ScaleError);
  EXPECT_THROW(rescale_to_signed(s), ScaleError);
  const NdwiMap back = rescale_to_signed(u);
  EXPECT_EQ(back.scale, NdwiScale::Signed);
  for (std::size_t i = 0; i < s.values.size(); ++i) EXPECT_NEAR(back.values[i], s.values[i], 1e-7f);
}
