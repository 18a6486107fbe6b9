#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace jtanet {

/// 8-bit RGB image, rows top to bottom, pixels interleaved R,G,B.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t channel) const {
    return pixels[(y * width + x) * 3 + channel];
  }
};

/// Reads uncompressed 24/32-bit BMP or any PNG; dispatches on the extension.
RgbImage read_image(const std::filesystem::path& path);
RgbImage read_bmp(const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

/// 24-bit bottom-up BMP.
void write_bmp(const std::filesystem::path& path, const RgbImage& image);

}  // namespace jtanet
