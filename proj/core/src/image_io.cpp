#include "msinr/image_io.hpp"

#include "msinr/error.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace msinr {
namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm header: magic, width, height, maxval separated by whitespace with
// '#' comments, then exactly one whitespace byte before the raster.
Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_int = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw DataError(name + ": malformed PNM header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw DataError(name + ": PNM header value too large");
      ++pos;
    }
    return v;
  };
  Image img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  img.width = next_int();
  img.height = next_int();
  const std::size_t maxval = next_int();
  if (img.width == 0 || img.height == 0) throw DataError(name + ": zero image dimension");
  if (maxval == 0 || maxval > 65535) throw DataError(name + ": invalid PNM maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw DataError(name + ": malformed PNM header");
  ++pos;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t n = img.width * img.height * img.channels;
  if (bytes.size() - pos < n * bps) throw DataError(name + ": truncated PNM raster");
  img.data.resize(n);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t v = bytes[pos + i * bps];
    if (bps == 2) v = (v << 8) | bytes[pos + i * bps + 1];
    img.data[i] = std::min(1.0, static_cast<double>(v) * scale);
  }
  return img;
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw DataError(name + ": " + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raster.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw DataError(name + ": " + msg);
  }
  Image img;
  img.width = png.width;
  img.height = png.height;
  img.channels = color ? 3 : 1;
  img.data.resize(raster.size());
  for (std::size_t i = 0; i < raster.size(); ++i) img.data[i] = raster[i] / 255.0;
  return img;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin())) return decode_png(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5'))
    return decode_pnm(bytes, name);
  throw DataError(name + ": unsupported image format (expected binary PPM/PGM or PNG)");
}

void write_image(const Image& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3) throw DataError("can only write 1- or 3-channel images");
  std::vector<std::uint8_t> raster(image.data.size());
  std::transform(image.data.begin(), image.data.end(), raster.begin(), quantize);

  if (path.extension() == ".png") {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, raster.data(), 0, nullptr))
      throw DataError("cannot write " + path.string() + ": " + png.message);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Image center_crop(const Image& image, std::size_t size) {
  if (size == 0 || size > image.width || size > image.height)
    throw DataError("center crop of " + std::to_string(size) + " does not fit a " +
                    std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
  const std::size_t top = (image.height - size) / 2;
  const std::size_t left = (image.width - size) / 2;
  Image out{size, size, image.channels, std::vector<double>(size * size * image.channels)};
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c)
      for (std::size_t ch = 0; ch < image.channels; ++ch) out.at(r, c, ch) = image.at(top + r, left + c, ch);
  return out;
}

Image resize_short_side(const Image& image, std::size_t short_side) {
  if (short_side == 0) throw DataError("resize target must be >= 1");
  const std::size_t cur = std::min(image.width, image.height);
  if (cur == short_side) return image;
  const double s = static_cast<double>(short_side) / static_cast<double>(cur);
  const auto ow = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(image.width * s)));
  const auto oh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(image.height * s)));
  Image out{ow, oh, image.channels, std::vector<double>(ow * oh * image.channels)};
  const double sx = static_cast<double>(image.width) / static_cast<double>(ow);
  const double sy = static_cast<double>(image.height) / static_cast<double>(oh);
  for (std::size_t r = 0; r < oh; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const auto y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t c = 0; c < ow; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const auto x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < image.channels; ++ch) {
        const double top = (1 - wx) * image.at(y0, x0, ch) + wx * image.at(y0, x1, ch);
        const double bot = (1 - wx) * image.at(y1, x0, ch) + wx * image.at(y1, x1, ch);
        out.at(r, c, ch) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

Image to_rgb(const Image& image) {
  if (image.channels == 3) return image;
  if (image.channels != 1 && image.channels != 4) throw DataError("unsupported channel count");
  Image out{image.width, image.height, 3, std::vector<double>(image.width * image.height * 3)};
  for (std::size_t p = 0; p < image.width * image.height; ++p)
    for (std::size_t ch = 0; ch < 3; ++ch)
      out.data[p * 3 + ch] = image.channels == 1 ? image.data[p] : image.data[p * 4 + ch];
  return out;
}

}  // namespace msinr
