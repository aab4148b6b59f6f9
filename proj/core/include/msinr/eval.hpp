#pragma once

#include "msinr/metrics.hpp"
#include "msinr/models.hpp"
#include "msinr/pruning.hpp"
#include "msinr/signal.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace msinr {

// Candidate widths for Dense-Narrow / Scratch, strictly decreasing and even.
struct WidthTable {
  std::vector<std::size_t> widths;

  // {256, 230, 206, ..., 28}
  static WidthTable standard();
  void validate() const;
};

// Smallest candidate width whose dense parameter count is >= target_params.
// Throws ConfigError when even the widest candidate is too small.
std::size_t dense_narrow_width_for(const WidthTable& table, const ArchSpec& arch, std::size_t target_params);

// (#parameters x bits per parameter) / #pixels; half_precision halves the bits.
double bits_per_pixel(std::size_t params, double bits_per_param, std::size_t height, std::size_t width,
                      bool half_precision = false);

struct FitResult {
  Eigen::VectorXd params;
  std::vector<double> psnr;  // budget + 1 entries, step 0 first
};

// Full-batch Adam for `budget` steps from `init`, recording PSNR every step.
FitResult fit_signal(const Network& net, const Eigen::VectorXd& init, const Mask& mask, const Signal& signal,
                     std::size_t budget, double lr, Precision precision = Precision::f64);

struct SignalTrace {
  std::string id;
  std::vector<double> psnr;
};

struct EvalReport {
  std::string method;
  std::string split;
  std::uint64_t seed = 0;
  std::size_t surviving_params = 0;
  std::size_t total_params = 0;
  std::size_t frozen_params = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double bpp = 0.0;    // 32-bit parameters
  double bpp16 = 0.0;  // 16-bit parameters
  std::vector<SignalTrace> signals;
  std::vector<double> mean_psnr;  // per step
  std::vector<double> std_psnr;   // per step, population std over signals

  double final_mean() const { return mean_psnr.back(); }
  double final_std() const { return std_psnr.back(); }
  std::size_t budget() const { return mean_psnr.size() - 1; }
};

struct EvalOptions {
  std::string method = "meta_sparse";
  std::string split = "val";
  std::size_t n_signals = 100;
  std::size_t budget = 100;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  Precision precision = Precision::f64;
};

// Seeded draw of min(n, available) distinct indices. Depends only on
// (available, n, seed), so every method evaluated with one seed sees the same
// signals.
std::vector<std::size_t> draw_signals(std::size_t available, std::size_t n, std::uint64_t seed);

// Fits every drawn signal independently from the same (params, mask).
EvalReport evaluate(const ArchSpec& arch, const ParamVector& params, const Mask& mask, const SignalSet& set,
                    const EvalOptions& options);

// Per-signal methods (MAML+OneShot, MAML+IMP): `fitter` returns the losses and
// final mask for one signal.
using SignalFitter = std::function<PerSignalFit(const Signal&)>;
EvalReport evaluate_per_signal(const ArchSpec& arch, const SignalSet& set, const EvalOptions& options,
                               const SignalFitter& fitter);

// Columns: method,seed,surviving_params,total_params,step,mean_psnr,std_psnr.
void write_report_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path,
                      const std::string& config_echo = {});

// Per-signal final and peak PSNR: method,seed,signal_id,final_psnr,peak_psnr.
void write_signal_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

// JSON summary of the reports with `config_json` (a JSON document) embedded.
std::string summary_json(const std::vector<EvalReport>& reports, const std::string& config_json);

// Renders the network over a height x width grid to PPM or PNG (by extension).
void render(const ArchSpec& arch, const ParamVector& params, const Mask& mask, std::size_t height,
            std::size_t width, const std::filesystem::path& out_path, Precision precision = Precision::f64);

}  // namespace msinr
