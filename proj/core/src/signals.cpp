#include "msinr/signals.hpp"

#include "msinr/error.hpp"
#include "msinr/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace msinr {

Eigen::MatrixXd make_grid(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DataError("grid dimensions must be >= 1");
  Eigen::MatrixXd g(2, static_cast<Eigen::Index>(height * width));
  const double dx = width > 1 ? static_cast<double>(width - 1) : 1.0;
  const double dy = height > 1 ? static_cast<double>(height - 1) : 1.0;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const auto p = static_cast<Eigen::Index>(i * width + j);
      g(0, p) = width > 1 ? static_cast<double>(j) / dx : 0.0;
      g(1, p) = height > 1 ? static_cast<double>(i) / dy : 0.0;
    }
  }
  return g;
}

Signal signal_from_image(const Image& image, std::string id) {
  Signal s;
  s.id = std::move(id);
  s.height = image.height;
  s.width = image.width;
  s.coords = make_grid(image.height, image.width);
  const auto n = static_cast<Eigen::Index>(image.width * image.height);
  s.targets.resize(static_cast<Eigen::Index>(image.channels), n);
  for (Eigen::Index p = 0; p < n; ++p)
    for (std::size_t c = 0; c < image.channels; ++c)
      s.targets(static_cast<Eigen::Index>(c), p) = image.data[static_cast<std::size_t>(p) * image.channels + c];
  return s;
}

Image image_from_values(const Eigen::MatrixXd& values, std::size_t height, std::size_t width) {
  if (static_cast<std::size_t>(values.cols()) != height * width)
    throw DimensionError("value count does not match image size");
  Image img{width, height, static_cast<std::size_t>(values.rows()), {}};
  img.data.resize(width * height * img.channels);
  for (Eigen::Index p = 0; p < values.cols(); ++p)
    for (Eigen::Index c = 0; c < values.rows(); ++c)
      img.data[static_cast<std::size_t>(p) * img.channels + static_cast<std::size_t>(c)] =
          std::clamp(values(c, p), 0.0, 1.0);
  return img;
}

Signal load_image(const std::filesystem::path& path, const LoadOptions& options) {
  Image img = read_image(path);
  if (options.channels == 3) {
    img = to_rgb(img);
  } else if (img.channels != 1) {
    throw DataError("expected a grayscale image");
  }
  std::size_t target_short = options.resize_short;
  if (target_short == 0 && std::min(img.width, img.height) < options.size) target_short = options.size;
  if (target_short != 0) img = resize_short_side(img, target_short);
  return signal_from_image(center_crop(img, options.size), path.stem().string());
}

SignalSet load_image_dir(const std::filesystem::path& dir, const LoadOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  if (options.split_ratio < 0.0 || options.split_ratio > 1.0)
    throw ConfigError("split_ratio must lie in [0, 1]");
  if (options.channels != 1 && options.channels != 3) throw ConfigError("channels must be 1 or 3");

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm" || ext == ".pgm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Signal> all;
  for (const auto& f : files) {
    try {
      all.push_back(load_image(f, options));
    } catch (const DataError& e) {
      std::fprintf(stderr, "warning: skipping %s: %s\n", f.string().c_str(), e.what());
    }
  }
  if (all.empty()) throw DataError("no decodable images in " + dir.string());

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(options.seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(std::llround(options.split_ratio * static_cast<double>(all.size())));
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  SignalSet set;
  set.source = dir.string();
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? set.train : set.val).push_back(std::move(all[order[i]]));
  return set;
}

namespace {

struct Wave {
  double fx, fy, phase;
};

// Components shared by every image of one set, so that the set has common
// structure to learn (the way aligned photos share layout).
constexpr std::size_t kSharedWaves = 12;
constexpr double kSharedFreq = 5.0;
constexpr double kSharedAmp = 0.1;
constexpr std::size_t kPrivateWaves = 2;
constexpr double kPrivateFreq = 3.0;
constexpr double kPrivateAmp = 0.06;

std::vector<Wave> shared_bank(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x62616e6bULL));
  std::vector<Wave> bank(kSharedWaves);
  for (auto& w : bank) w = {rng.uniform(-kSharedFreq, kSharedFreq), rng.uniform(-kSharedFreq, kSharedFreq),
                            rng.uniform(0.0, 2.0 * std::numbers::pi)};
  return bank;
}

Image synth_image(const std::vector<Wave>& bank, std::uint64_t stream, std::size_t size) {
  Rng rng(stream);
  std::vector<Wave> waves = bank;
  std::vector<std::array<double, 3>> amps;
  for (std::size_t k = 0; k < bank.size(); ++k)
    amps.push_back({rng.uniform(-kSharedAmp, kSharedAmp), rng.uniform(-kSharedAmp, kSharedAmp),
                    rng.uniform(-kSharedAmp, kSharedAmp)});
  for (std::size_t k = 0; k < kPrivateWaves; ++k) {
    waves.push_back({rng.uniform(-kPrivateFreq, kPrivateFreq), rng.uniform(-kPrivateFreq, kPrivateFreq),
                     rng.uniform(0.0, 2.0 * std::numbers::pi)});
    amps.push_back({rng.uniform(-kPrivateAmp, kPrivateAmp), rng.uniform(-kPrivateAmp, kPrivateAmp),
                    rng.uniform(-kPrivateAmp, kPrivateAmp)});
  }
  const double cx = rng.uniform(0.0, 1.0);
  const double cy = rng.uniform(0.0, 1.0);
  double radial[3], base[3];
  for (int c = 0; c < 3; ++c) {
    radial[c] = rng.uniform(-0.5, 0.5);
    base[c] = rng.uniform(0.3, 0.7);
  }

  Image img{size, size, 3, std::vector<double>(size * size * 3)};
  const double step = 1.0 / static_cast<double>(size - 1);
  for (std::size_t i = 0; i < size; ++i) {
    const double y = static_cast<double>(i) * step;
    for (std::size_t j = 0; j < size; ++j) {
      const double x = static_cast<double>(j) * step;
      const double r = std::hypot(x - cx, y - cy) - 0.5;
      double v[3] = {base[0] + radial[0] * r, base[1] + radial[1] * r, base[2] + radial[2] * r};
      for (std::size_t k = 0; k < waves.size(); ++k) {
        const double wave = std::cos(2.0 * std::numbers::pi * (waves[k].fx * x + waves[k].fy * y) + waves[k].phase);
        for (std::size_t c = 0; c < 3; ++c) v[c] += amps[k][c] * wave;
      }
      for (std::size_t c = 0; c < 3; ++c) img.at(i, j, c) = std::clamp(v[c], 0.0, 1.0);
    }
  }
  return img;
}

std::string synth_id(const char* split, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "synth-%s-%04zu", split, i);
  return buf;
}

}  // namespace

SignalSet synth_set(std::uint64_t seed, std::size_t n, std::size_t size) {
  if (n < 2) throw ConfigError("synth_set needs n >= 2");
  if (size < 8) throw ConfigError("synth_set needs size >= 8");
  SignalSet set;
  set.source = "synth(seed=" + std::to_string(seed) + ",n=" + std::to_string(n) +
               ",size=" + std::to_string(size) + ")";
  const auto bank = shared_bank(seed);
  for (std::size_t i = 0; i < n; ++i) {
    set.train.push_back(signal_from_image(synth_image(bank, mix_seed(seed, 2 * i), size), synth_id("train", i)));
    set.val.push_back(signal_from_image(synth_image(bank, mix_seed(seed, 2 * i + 1), size), synth_id("val", i)));
  }
  return set;
}

const std::vector<Signal>& split_by_name(const SignalSet& set, const std::string& split) {
  if (split == "train") return set.train;
  if (split == "val") return set.val;
  throw ConfigError("unknown split '" + split + "' (expected train or val)");
}

}  // namespace msinr
