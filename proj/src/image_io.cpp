#include "jtanet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "jtanet/container.hpp"

namespace jtanet {
namespace {

std::uint32_t u32_at(const std::string& b, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

std::uint16_t u16_at(const std::string& b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    static_cast<unsigned char>(b[off + 1]) << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

RgbImage read_bmp(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path.string());
  const std::string b((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') throw FormatError(path.string() + ": not a BMP file");
  const std::uint32_t data_offset = u32_at(b, 10);
  const auto width = static_cast<std::int32_t>(u32_at(b, 18));
  const auto height = static_cast<std::int32_t>(u32_at(b, 22));
  const std::uint16_t bpp = u16_at(b, 28);
  const std::uint32_t compression = u32_at(b, 30);
  if (width <= 0 || height == 0) throw FormatError(path.string() + ": bad BMP dimensions");
  if ((bpp != 24 && bpp != 32) || (compression != 0 && !(compression == 3 && bpp == 32))) {
    throw FormatError(path.string() + ": only uncompressed 24/32-bit BMP is supported");
  }
  const bool top_down = height < 0;
  RgbImage img;
  img.width = static_cast<std::size_t>(width);
  img.height = static_cast<std::size_t>(top_down ? -height : height);
  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (img.width * bytes_pp + 3) / 4 * 4;
  if (data_offset + stride * img.height > b.size()) throw FormatError(path.string() + ": truncated BMP");
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t row = 0; row < img.height; ++row) {
    const std::size_t y = top_down ? row : img.height - 1 - row;
    const std::size_t base = data_offset + row * stride;
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t p = base + x * bytes_pp;
      for (std::size_t c = 0; c < 3; ++c) {
        img.pixels[(y * img.width + x) * 3 + c] = static_cast<std::uint8_t>(b[p + 2 - c]);
      }
    }
  }
  return img;
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage img;
  img.width = image.width;
  img.height = image.height;
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw FormatError(path.string() + ": " + message);
  }
  return img;
}

RgbImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such image " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".bmp") return read_bmp(path);
  if (ext == ".png") return read_png(path);
  throw FormatError(path.string() + ": unsupported image type (expected .bmp or .png)");
}

void write_bmp(const std::filesystem::path& path, const RgbImage& image) {
  const std::size_t stride = (image.width * 3 + 3) / 4 * 4;
  const std::size_t data_size = stride * image.height;
  std::string out;
  out += "BM";
  put_u32(out, static_cast<std::uint32_t>(54 + data_size));
  put_u32(out, 0);
  put_u32(out, 54);
  put_u32(out, 40);
  put_u32(out, static_cast<std::uint32_t>(image.width));
  put_u32(out, static_cast<std::uint32_t>(image.height));
  put_u16(out, 1);
  put_u16(out, 24);
  put_u32(out, 0);
  put_u32(out, static_cast<std::uint32_t>(data_size));
  put_u32(out, 2835);
  put_u32(out, 2835);
  put_u32(out, 0);
  put_u32(out, 0);
  for (std::size_t row = 0; row < image.height; ++row) {
    const std::size_t y = image.height - 1 - row;
    for (std::size_t x = 0; x < image.width; ++x) {
      for (int c = 2; c >= 0; --c) out.push_back(static_cast<char>(image.at(x, y, static_cast<std::size_t>(c))));
    }
    out.append(stride - image.width * 3, '\0');
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace jtanet
