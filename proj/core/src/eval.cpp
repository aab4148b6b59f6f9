#include "msinr/eval.hpp"

#include "msinr/error.hpp"
#include "msinr/grad_engine.hpp"
#include "msinr/image_io.hpp"
#include "msinr/parallel.hpp"
#include "msinr/random.hpp"
#include "msinr/signals.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace msinr {

double psnr(double mse, double max_val) {
  if (!(mse >= 0.0)) throw ConfigError("mse must be >= 0");
  return 10.0 * std::log10(max_val * max_val / std::max(mse, kMinMse));
}

double psnr_of(const LossValue& loss, std::size_t channels, double max_val) {
  return psnr(loss.mse(channels), max_val);
}

std::vector<double> psnr_trajectory(const std::vector<LossValue>& losses, std::size_t channels) {
  std::vector<double> out;
  out.reserve(losses.size());
  for (const auto& l : losses) out.push_back(psnr_of(l, channels));
  return out;
}

WidthTable WidthTable::standard() {
  return {{256, 230, 206, 184, 164, 148, 132, 118, 106, 94, 84, 76, 68, 60, 54, 48, 44, 38, 34, 32, 28}};
}

void WidthTable::validate() const {
  if (widths.empty()) throw ConfigError("width table is empty");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i] % 2 != 0) throw ConfigError("width table entries must be even and positive");
    if (i > 0 && widths[i] >= widths[i - 1]) throw ConfigError("width table must be strictly decreasing");
  }
}

std::size_t dense_narrow_width_for(const WidthTable& table, const ArchSpec& arch, std::size_t target_params) {
  table.validate();
  std::size_t best = 0;
  for (auto w : table.widths)
    if (param_count(arch.with_width(w)) >= target_params) best = w;
  if (best == 0)
    throw ConfigError("no candidate width reaches " + std::to_string(target_params) + " parameters");
  return best;
}

double bits_per_pixel(std::size_t params, double bits_per_param, std::size_t height, std::size_t width,
                      bool half_precision) {
  const double bits = half_precision ? bits_per_param / 2.0 : bits_per_param;
  return static_cast<double>(params) * bits / (static_cast<double>(height) * static_cast<double>(width));
}

FitResult fit_signal(const Network& net, const Eigen::VectorXd& init, const Mask& mask, const Signal& signal,
                     std::size_t budget, double lr, Precision precision) {
  auto r = train_adam(net, init, mask, signal, budget, lr, precision);
  return {std::move(r.params), psnr_trajectory(r.losses, signal.channels())};
}

std::vector<std::size_t> draw_signals(std::size_t available, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(available);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x6576616cULL));
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(std::min(n, available));
  return idx;
}

namespace {

const std::vector<Signal>& nonempty_split(const SignalSet& set, const std::string& split) {
  const auto& s = split_by_name(set, split);
  if (s.empty()) throw DataError("cannot evaluate on the empty '" + split + "' split");
  return s;
}

void aggregate(EvalReport& r) {
  const std::size_t steps = r.signals.front().psnr.size();
  for (const auto& s : r.signals)
    if (s.psnr.size() != steps) throw DimensionError("trajectories differ in length");
  r.mean_psnr.assign(steps, 0.0);
  r.std_psnr.assign(steps, 0.0);
  const double n = static_cast<double>(r.signals.size());
  for (std::size_t k = 0; k < steps; ++k) {
    double sum = 0.0;
    for (const auto& s : r.signals) sum += s.psnr[k];
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& s : r.signals) var += (s.psnr[k] - mean) * (s.psnr[k] - mean);
    r.mean_psnr[k] = mean;
    r.std_psnr[k] = std::sqrt(var / n);
  }
}

EvalReport make_report(const Mask& mask, const EvalOptions& o, const Signal& first) {
  EvalReport r;
  r.method = o.method;
  r.split = o.split;
  r.seed = o.seed;
  const auto counts = report_counts(mask);
  r.surviving_params = counts.surviving;
  r.total_params = counts.total;
  r.frozen_params = counts.frozen;
  r.height = first.height;
  r.width = first.width;
  r.bpp = bits_per_pixel(r.surviving_params, 32.0, first.height, first.width);
  r.bpp16 = bits_per_pixel(r.surviving_params, 32.0, first.height, first.width, true);
  return r;
}

}  // namespace

EvalReport evaluate(const ArchSpec& arch, const ParamVector& params, const Mask& mask, const SignalSet& set,
                    const EvalOptions& o) {
  const auto& split = nonempty_split(set, o.split);
  const Network net = build_network(arch);
  const auto picks = draw_signals(split.size(), o.n_signals, o.seed);
  EvalReport r = make_report(mask, o, split[picks.front()]);
  r.signals.resize(picks.size());
  parallel_for(picks.size(), o.workers, [&](std::size_t i) {
    const Signal& s = split[picks[i]];
    r.signals[i] = {s.id, fit_signal(net, params.values, mask, s, o.budget, o.lr, o.precision).psnr};
  });
  aggregate(r);
  return r;
}

EvalReport evaluate_per_signal(const ArchSpec& arch, const SignalSet& set, const EvalOptions& o,
                               const SignalFitter& fitter) {
  const auto& split = nonempty_split(set, o.split);
  const auto picks = draw_signals(split.size(), o.n_signals, o.seed);
  std::vector<PerSignalFit> fits(picks.size());
  parallel_for(picks.size(), o.workers, [&](std::size_t i) { fits[i] = fitter(split[picks[i]]); });
  if (fits.front().mask.param_count() != param_count(arch))
    throw DimensionError("fitted mask does not match architecture");
  EvalReport r = make_report(fits.front().mask, o, split[picks.front()]);
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const Signal& s = split[picks[i]];
    r.signals.push_back({s.id, psnr_trajectory(fits[i].losses, s.channels())});
  }
  aggregate(r);
  return r;
}

void write_report_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path,
                      const std::string& config_echo) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  if (!config_echo.empty()) out << "# config: " << config_echo << '\n';
  out << "method,seed,surviving_params,total_params,step,mean_psnr,std_psnr\n";
  out.precision(10);
  for (const auto& r : reports)
    for (std::size_t k = 0; k < r.mean_psnr.size(); ++k)
      out << r.method << ',' << r.seed << ',' << r.surviving_params << ',' << r.total_params << ',' << k << ','
          << r.mean_psnr[k] << ',' << r.std_psnr[k] << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

void write_signal_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "method,seed,signal_id,final_psnr,peak_psnr\n";
  out.precision(10);
  for (const auto& r : reports)
    for (const auto& s : r.signals)
      out << r.method << ',' << r.seed << ',' << s.id << ',' << s.psnr.back() << ','
          << *std::max_element(s.psnr.begin(), s.psnr.end()) << '\n';
}

std::string summary_json(const std::vector<EvalReport>& reports, const std::string& config_json) {
  nlohmann::json doc;
  doc["config"] = config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(config_json);
  auto& arr = doc["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["method"] = r.method;
    j["split"] = r.split;
    j["seed"] = r.seed;
    j["surviving_params"] = r.surviving_params;
    j["total_params"] = r.total_params;
    j["frozen_params"] = r.frozen_params;
    j["bpp"] = r.bpp;
    j["bpp16"] = r.bpp16;
    j["budget"] = r.budget();
    j["n_signals"] = r.signals.size();
    j["mean_psnr"] = r.mean_psnr;
    j["std_psnr"] = r.std_psnr;
    j["final_mean_psnr"] = r.final_mean();
    j["final_std_psnr"] = r.final_std();
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& s : r.signals) ids.push_back(s.id);
    j["signal_ids"] = ids;
    arr.push_back(j);
  }
  return doc.dump(2);
}

void render(const ArchSpec& arch, const ParamVector& params, const Mask& mask, std::size_t height,
            std::size_t width, const std::filesystem::path& out_path, Precision precision) {
  const auto values = forward(arch, params, mask, make_grid(height, width), precision);
  write_image(image_from_values(values, height, width), out_path);
}

}  // namespace msinr
