#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sarndwi {

// Dense height x width x channels raster, row-major and channel-last. This is
// the in-memory counterpart of the chip file format.
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels, float fill = 0.0f);
  Raster(int height, int width, int channels, std::vector<float> values);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  float& at(int y, int x, int c = 0) noexcept {
    return values_[index(y, x, c)];
  }
  float at(int y, int x, int c = 0) const noexcept {
    return values_[index(y, x, c)];
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }
  std::vector<float>& storage() noexcept { return values_; }

  // Copies one channel out as a single-channel raster.
  Raster channel(int c) const;
  // Copies a window [y0, y0+h) x [x0, x0+w) with all channels.
  Raster crop(int y0, int x0, int h, int w) const;
  void paste(const Raster& tile, int y0, int x0);

  bool operator==(const Raster& other) const = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> values_;
};

// Interleaves single-channel rasters of equal size into one multi-channel one.
Raster stack_channels(std::span<const Raster> bands);

// Chip file: "CBCH", u16 version (=1), u16 height, u16 width, u16 channels,
// then float32 samples; every field little-endian.
inline constexpr char kChipMagic[4] = {'C', 'B', 'C', 'H'};
inline constexpr std::uint16_t kChipFormatVersion = 1;

std::vector<std::byte> encode_chip(const Raster& raster);
Raster decode_chip(std::span<const std::byte> bytes);

void write_chip(const std::filesystem::path& path, const Raster& raster);
Raster read_chip(const std::filesystem::path& path);

}  // namespace sarndwi
