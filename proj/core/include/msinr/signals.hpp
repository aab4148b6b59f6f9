#pragma once

#include "msinr/image_io.hpp"
#include "msinr/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace msinr {

// Row-major pixel grid in [0,1]^2 as a 2 x (height*width) matrix; row 0 is
// x = col / (width - 1), row 1 is y = row / (height - 1). A one-pixel axis
// maps to 0.
Eigen::MatrixXd make_grid(std::size_t height, std::size_t width);

Signal signal_from_image(const Image& image, std::string id);

// Inverse of signal_from_image for network outputs (channels x points).
Image image_from_values(const Eigen::MatrixXd& values, std::size_t height, std::size_t width);

struct LoadOptions {
  std::size_t size = 178;         // side of the square center crop
  std::size_t resize_short = 0;   // intermediate short side; 0 = only upscale when smaller than size
  std::size_t channels = 3;       // 3: grayscale is replicated; 1: RGB is rejected
  double split_ratio = 0.9;       // fraction of images in the train split
  std::uint64_t seed = 0;         // split shuffle
};

// One image resized (short side to resize_short, or up to size when smaller),
// center-cropped to size x size and scaled to [0,1].
Signal load_image(const std::filesystem::path& path, const LoadOptions& options);

// Loads every .ppm/.pgm/.png in `dir` in alphabetical order. Undecodable
// files are skipped with a warning on stderr; a directory without any usable
// image is a DataError.
SignalSet load_image_dir(const std::filesystem::path& dir, const LoadOptions& options);

// Deterministic smooth synthetic RGB images: a few low-frequency 2D Fourier
// components plus a radial gradient per channel, clamped to [0,1]. Produces
// `n` training and `n` validation signals of size x size.
SignalSet synth_set(std::uint64_t seed, std::size_t n, std::size_t size);

// The training or validation split by name ("train" / "val").
const std::vector<Signal>& split_by_name(const SignalSet& set, const std::string& split);

}  // namespace msinr
