#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace msinr {

// Interleaved row-major image with samples in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  double& at(std::size_t row, std::size_t col, std::size_t ch) {
    return data[(row * width + col) * channels + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data[(row * width + col) * channels + ch];
  }
};

// Decodes binary PPM (P6), binary PGM (P5) or PNG, chosen by file content.
// Throws DataError on malformed input.
Image read_image(const std::filesystem::path& path);

// Writes 8-bit samples (clamped, rounded). Format chosen by extension:
// ".png" -> PNG, anything else -> PPM (P6) / PGM (P5) for one channel.
void write_image(const Image& image, const std::filesystem::path& path);

Image center_crop(const Image& image, std::size_t size);

// Bilinear resize so that the shorter side equals `short_side`.
Image resize_short_side(const Image& image, std::size_t short_side);

// Grayscale -> RGB by replication; RGBA -> RGB by dropping alpha.
Image to_rgb(const Image& image);

}  // namespace msinr
