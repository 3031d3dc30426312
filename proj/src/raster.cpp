#include "sarndwi/raster.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "byte_io.hpp"
#include "sarndwi/error.hpp"

namespace sarndwi {

Raster::Raster(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    throw DimensionError("raster dimensions must be non-negative");
  }
  values_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Raster::Raster(int height, int width, int channels, std::vector<float> values)
    : height_(height), width_(width), channels_(channels),
      values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw DimensionError("raster value count " + std::to_string(values_.size()) +
                         " does not match " + std::to_string(height) + "x" +
                         std::to_string(width) + "x" + std::to_string(channels));
  }
}

Raster Raster::channel(int c) const {
  if (c < 0 || c >= channels_) {
    throw DimensionError("channel index " + std::to_string(c) + " out of range");
  }
  Raster out(height_, width_, 1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out.at(y, x) = at(y, x, c);
  }
  return out;
}

Raster Raster::crop(int y0, int x0, int h, int w) const {
  if (y0 < 0 || x0 < 0 || y0 + h > height_ || x0 + w > width_) {
    throw DimensionError("crop window exceeds raster bounds");
  }
  Raster out(h, w, channels_);
  const std::size_t row = static_cast<std::size_t>(w) * channels_;
  for (int y = 0; y < h; ++y) {
    const float* src = &values_[index(y0 + y, x0, 0)];
    std::copy(src, src + row, &out.values_[out.index(y, 0, 0)]);
  }
  return out;
}

void Raster::paste(const Raster& tile, int y0, int x0) {
  if (tile.channels_ != channels_ || y0 < 0 || x0 < 0 ||
      y0 + tile.height_ > height_ || x0 + tile.width_ > width_) {
    throw DimensionError("tile does not fit at the requested offset");
  }
  const std::size_t row = static_cast<std::size_t>(tile.width_) * channels_;
  for (int y = 0; y < tile.height_; ++y) {
    const float* src = &tile.values_[tile.index(y, 0, 0)];
    std::copy(src, src + row, &values_[index(y0 + y, x0, 0)]);
  }
}

Raster stack_channels(std::span<const Raster> bands) {
  if (bands.empty()) throw DimensionError("no bands to stack");
  const int h = bands[0].height();
  const int w = bands[0].width();
  int channels = 0;
  for (const Raster& b : bands) {
    if (b.height() != h || b.width() != w) {
      throw DimensionError("bands differ in size");
    }
    channels += b.channels();
  }
  Raster out(h, w, channels);
  int offset = 0;
  for (const Raster& b : bands) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < b.channels(); ++c) {
          out.at(y, x, offset + c) = b.at(y, x, c);
        }
      }
    }
    offset += b.channels();
  }
  return out;
}

std::vector<std::byte> encode_chip(const Raster& raster) {
  constexpr int kMax = std::numeric_limits<std::uint16_t>::max();
  if (raster.height() > kMax || raster.width() > kMax ||
      raster.channels() > kMax) {
    throw DimensionError("raster too large for the chip format");
  }
  detail::ByteWriter out;
  out.raw(std::string_view(kChipMagic, 4));
  out.u16(kChipFormatVersion);
  out.u16(static_cast<std::uint16_t>(raster.height()));
  out.u16(static_cast<std::uint16_t>(raster.width()));
  out.u16(static_cast<std::uint16_t>(raster.channels()));
  out.f32s(raster.values());
  return std::move(out.bytes());
}

Raster decode_chip(std::span<const std::byte> bytes) {
  detail::ByteReader in(bytes, "chip");
  if (in.raw(4) != std::string_view(kChipMagic, 4)) {
    throw FormatError("chip: bad magic bytes");
  }
  const std::uint16_t version = in.u16();
  if (version != kChipFormatVersion) {
    throw FormatError("chip: unsupported format version " +
                      std::to_string(version));
  }
  const int h = in.u16();
  const int w = in.u16();
  const int c = in.u16();
  const std::size_t n = static_cast<std::size_t>(h) * w * c;
  if (in.remaining() != n * 4) {
    throw FormatError("chip: payload holds " + std::to_string(in.remaining()) +
                      " bytes, header implies " + std::to_string(n * 4));
  }
  std::vector<float> values(n);
  in.f32s(values);
  return Raster(h, w, c, std::move(values));
}

void write_chip(const std::filesystem::path& path, const Raster& raster) {
  detail::write_file(path, encode_chip(raster));
}

Raster read_chip(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_chip(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace detail {

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(size));
  if (!in) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path,
                std::span<const std::byte> bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

}  // namespace sarndwi
