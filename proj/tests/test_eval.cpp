#include "support.hpp"

#include "msinr/error.hpp"
#include "msinr/eval.hpp"
#include "msinr/image_io.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace msinr;
using namespace msinr::testing;
namespace fs = std::filesystem;

namespace {

ArchSpec small_siren(std::size_t width = 16) {
  ArchSpec a;
  a.width = width;
  a.hidden_layers = 2;
  a.seed = 2;
  return a;
}

Signal constant_signal(double value, std::size_t size) {
  Image img{size, size, 3, std::vector<double>(size * size * 3, value)};
  return signal_from_image(img, "const");
}

}  // namespace

TEST(Psnr, Examples) {
  EXPECT_NEAR(psnr(0.01), 20.0, 1e-12);
  EXPECT_NEAR(psnr(1.0), 0.0, 1e-12);
  EXPECT_NEAR(psnr(0.0), 120.0, 1e-12);
  EXPECT_NEAR(psnr(0.25, 2.0), 10.0 * std::log10(16.0), 1e-12);
  EXPECT_THROW(psnr(-1e-3), ConfigError);
}

TEST(Psnr, MonotoneAndClampedOnlyBelowFloor) {
  double prev = psnr(1e-13);
  EXPECT_EQ(prev, psnr(1e-12));
  for (double mse = 2e-12; mse < 10.0; mse *= 1.7) {
    const double p = psnr(mse);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Psnr, OfSummedLoss) {
  // 4 points x 3 channels, total squared error 0.12 -> mse 0.01.
  EXPECT_NEAR(psnr_of(LossValue{0.12, 4}, 3), 20.0, 1e-12);
}

TEST(WidthTable, StandardAndValidation) {
  const auto t = WidthTable::standard();
  EXPECT_EQ(t.widths.front(), 256u);
  EXPECT_EQ(t.widths.back(), 28u);
  EXPECT_EQ(t.widths.size(), 21u);
  EXPECT_NO_THROW(t.validate());
  EXPECT_THROW((WidthTable{{}}.validate()), ConfigError);
  EXPECT_THROW((WidthTable{{10, 9}}.validate()), ConfigError);
  EXPECT_THROW((WidthTable{{10, 12}}.validate()), ConfigError);
}

TEST(DenseNarrow, FullCountGivesWidestAndTooLargeThrows) {
  ArchSpec a;
  a.width = 256;
  a.hidden_layers = 4;
  const auto t = WidthTable::standard();
  EXPECT_EQ(dense_narrow_width_for(t, a, param_count(a)), 256u);
  EXPECT_THROW(dense_narrow_width_for(t, a, param_count(a) + 1), ConfigError);
}

TEST(DenseNarrow, SmallestAdequateWidthProperty) {
  ArchSpec a;
  a.width = 256;
  a.hidden_layers = 4;
  const auto t = WidthTable::standard();
  Rng rng(31);
  std::vector<std::size_t> targets{8704, 1};
  for (int i = 0; i < 50; ++i) targets.push_back(1 + rng.below(param_count(a)));
  for (auto target : targets) {
    const std::size_t w = dense_narrow_width_for(t, a, target);
    EXPECT_GE(param_count(a.with_width(w)), target);
    const auto it = std::find(t.widths.begin(), t.widths.end(), w);
    ASSERT_NE(it, t.widths.end());
    if (std::next(it) != t.widths.end()) EXPECT_LT(param_count(a.with_width(*std::next(it))), target);
  }
}

TEST(DenseNarrow, DeskWidths) {
  ArchSpec a;
  a.width = 64;
  a.hidden_layers = 2;
  const auto t = WidthTable::standard();
  EXPECT_EQ(dense_narrow_width_for(t, a, 2329), 48u);
  EXPECT_EQ(dense_narrow_width_for(t, a, 1864), 44u);
  EXPECT_EQ(dense_narrow_width_for(t, a, 1492), 38u);
}

TEST(Bpp, Examples) {
  EXPECT_NEAR(bits_per_pixel(8704, 32, 178, 178), 8704.0 * 32.0 / 31684.0, 1e-9);
  EXPECT_EQ(bits_per_pixel(8704, 32, 178, 178, true), bits_per_pixel(8704, 32, 178, 178) / 2.0);
  EXPECT_EQ(bits_per_pixel(1, 1, 1, 1), 1.0);
}

TEST(FitSignal, ZeroBudgetReturnsInit) {
  const ArchSpec a = small_siren();
  const SignalSet s = synth_set(1, 2, 8);
  const auto p = init(a);
  const auto fit = fit_signal(build_network(a), p.values, full_mask(a), s.train[0], 0, 1e-3);
  EXPECT_EQ(fit.params, p.values);
  ASSERT_EQ(fit.psnr.size(), 1u);
  EXPECT_NEAR(fit.psnr[0], psnr_of(forward_loss(build_network(a), p.values, full_mask(a), s.train[0]), 3), 1e-12);
}

TEST(FitSignal, ConstantImageReachesFortyDecibels) {
  const ArchSpec a = small_siren(32);
  const auto fit = fit_signal(build_network(a), init(a).values, full_mask(a), constant_signal(0.5, 16), 100, 1e-3);
  EXPECT_GT(*std::max_element(fit.psnr.begin(), fit.psnr.end()), 40.0);
}

TEST(FitSignal, FiniteTrajectoriesOnSynth) {
  const ArchSpec a = small_siren(32);
  const SignalSet s = synth_set(2, 3, 16);
  for (const auto& sig : s.train) {
    Mask m = full_mask(a);
    Rng rng(sig.targets.size());
    for (std::size_t k = 0; k < m.prunable_count(); ++k) m.set(k, rng.uniform() < 0.5);
    Eigen::VectorXd p = init(a).values;
    zero_pruned(m, p);
    const auto fit = fit_signal(build_network(a), p, m, sig, 50, 1e-3);
    for (double v : fit.psnr) EXPECT_TRUE(std::isfinite(v));
    EXPECT_TRUE(pruned_are_zero(m, fit.params));
  }
}

TEST(DrawSignals, DistinctSeededAndPrefixFree) {
  const auto a = draw_signals(20, 5, 7);
  EXPECT_EQ(a, draw_signals(20, 5, 7));
  EXPECT_NE(a, draw_signals(20, 5, 8));
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(draw_signals(3, 10, 1).size(), 3u);
}

TEST(Evaluate, SingleSignalEqualsFitSignal) {
  const ArchSpec a = small_siren();
  const SignalSet s = synth_set(3, 3, 8);
  EvalOptions o;
  o.n_signals = 1;
  o.budget = 20;
  o.seed = 4;
  const auto r = evaluate(a, init(a), full_mask(a), s, o);
  const std::size_t idx = draw_signals(s.val.size(), 1, 4)[0];
  const auto fit = fit_signal(build_network(a), init(a).values, full_mask(a), s.val[idx], 20, 1e-3);
  ASSERT_EQ(r.signals.size(), 1u);
  EXPECT_EQ(r.signals[0].id, s.val[idx].id);
  EXPECT_EQ(r.mean_psnr, fit.psnr);
  for (double sd : r.std_psnr) EXPECT_EQ(sd, 0.0);
}

TEST(Evaluate, DeterministicAndMeanConsistent) {
  const ArchSpec a = small_siren();
  const SignalSet s = synth_set(5, 6, 8);
  EvalOptions o;
  o.n_signals = 4;
  o.budget = 10;
  o.seed = 1;
  const auto r1 = evaluate(a, init(a), full_mask(a), s, o);
  o.workers = 3;
  const auto r2 = evaluate(a, init(a), full_mask(a), s, o);
  EXPECT_EQ(r1.mean_psnr, r2.mean_psnr);
  EXPECT_EQ(r1.std_psnr, r2.std_psnr);
  ASSERT_EQ(r1.signals.size(), 4u);
  for (std::size_t k = 0; k <= o.budget; ++k) {
    double sum = 0.0, sq = 0.0;
    for (const auto& sig : r1.signals) sum += sig.psnr[k];
    const double mean = sum / 4.0;
    for (const auto& sig : r1.signals) sq += (sig.psnr[k] - mean) * (sig.psnr[k] - mean);
    EXPECT_NEAR(r1.mean_psnr[k], mean, 1e-9 * std::abs(mean));
    EXPECT_NEAR(r1.std_psnr[k], std::sqrt(sq / 4.0), 1e-9);
  }
  EXPECT_EQ(r1.budget(), 10u);
}

TEST(Evaluate, SameSeedSameSignalsAcrossMethods) {
  const SignalSet s = synth_set(6, 8, 8);
  EvalOptions o;
  o.n_signals = 3;
  o.budget = 1;
  o.seed = 9;
  const ArchSpec wide = small_siren(16);
  const ArchSpec narrow = small_siren(8);
  o.method = "meta_sparse";
  const auto r1 = evaluate(wide, init(wide), full_mask(wide), s, o);
  o.method = "dense_narrow";
  const auto r2 = evaluate(narrow, init(narrow), full_mask(narrow), s, o);
  ASSERT_EQ(r1.signals.size(), r2.signals.size());
  for (std::size_t i = 0; i < r1.signals.size(); ++i) EXPECT_EQ(r1.signals[i].id, r2.signals[i].id);
}

TEST(Evaluate, ReportsCountsAndBpp) {
  const ArchSpec a = small_siren();
  const SignalSet s = synth_set(7, 2, 8);
  Mask m = full_mask(a);
  for (std::size_t k = 0; k < 40; ++k) m.set(k, false);
  EvalOptions o;
  o.budget = 0;
  const auto r = evaluate(a, init(a), m, s, o);
  EXPECT_EQ(r.total_params, param_count(a));
  EXPECT_EQ(r.surviving_params, param_count(a) - 40);
  EXPECT_EQ(r.height, 8u);
  EXPECT_DOUBLE_EQ(r.bpp, bits_per_pixel(r.surviving_params, 32, 8, 8));
  EXPECT_DOUBLE_EQ(r.bpp16, r.bpp / 2.0);
}

TEST(Evaluate, WrongSplitOrEmptySplitThrows) {
  const ArchSpec a = small_siren();
  SignalSet s = synth_set(8, 2, 8);
  EvalOptions o;
  o.split = "test";
  EXPECT_THROW(evaluate(a, init(a), full_mask(a), s, o), ConfigError);
  s.val.clear();
  o.split = "val";
  EXPECT_THROW(evaluate(a, init(a), full_mask(a), s, o), DataError);
}

TEST(EvaluatePerSignal, UsesFitterLosses) {
  const ArchSpec a = small_siren();
  const SignalSet s = synth_set(9, 3, 8);
  const auto net = build_network(a);
  EvalOptions o;
  o.n_signals = 2;
  o.budget = 10;
  const auto r = evaluate_per_signal(a, s, o, [&](const Signal& sig) {
    return per_signal_oneshot(net, init(a).values, full_mask(a), sig, 200, 1e-3, 5);
  });
  EXPECT_EQ(r.surviving_params, param_count(a) - (full_mask(a).survivors() - 200));
  EXPECT_EQ(r.mean_psnr.size(), 11u);
  EXPECT_THROW(evaluate_per_signal(a, s, o,
                                   [&](const Signal& sig) {
                                     PerSignalFit f = per_signal_oneshot(net, init(a).values, full_mask(a), sig,
                                                                         200, 1e-3, 5);
                                     f.mask = Mask::dense(3);
                                     return f;
                                   }),
               DimensionError);
}

TEST(Reports, CsvAndJson) {
  const ArchSpec a = small_siren();
  const SignalSet s = synth_set(10, 2, 8);
  EvalOptions o;
  o.budget = 2;
  const auto r = evaluate(a, init(a), full_mask(a), s, o);
  const fs::path dir = fs::temp_directory_path() / "msinr_reports";
  fs::create_directories(dir);
  write_report_csv({r}, dir / "eval.csv", "{}");
  write_signal_csv({r}, dir / "signals.csv");
  std::ifstream in(dir / "eval.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 2u + 3u);
  const auto j = nlohmann::json::parse(summary_json({r}, R"({"name":"x"})"));
  EXPECT_EQ(j["config"]["name"], "x");
  EXPECT_EQ(j["reports"][0]["budget"], 2);
  EXPECT_EQ(j["reports"][0]["signal_ids"].size(), 2u);
  fs::remove_all(dir);
}

TEST(Render, ZeroNetworkIsBlackAndDeterministic) {
  const ArchSpec a = small_siren();
  ParamVector p = init(a);
  p.values.setZero();
  const fs::path dir = fs::temp_directory_path() / "msinr_render";
  fs::create_directories(dir);
  render(a, p, full_mask(a), 5, 7, dir / "z.ppm");
  const Image img = read_image(dir / "z.ppm");
  EXPECT_EQ(img.width, 7u);
  for (double v : img.data) EXPECT_EQ(v, 0.0);

  const ParamVector q = init(a);
  render(a, q, full_mask(a), 6, 6, dir / "a.png");
  render(a, q, full_mask(a), 6, 6, dir / "b.png");
  EXPECT_EQ(read_image(dir / "a.png").data, read_image(dir / "b.png").data);
  EXPECT_THROW(render(a, q, full_mask(a), 6, 6, dir / "missing" / "x.png"), DataError);
  fs::remove_all(dir);
}

TEST(Render, FittedImageMatchesReportedPsnr) {
  const ArchSpec a = small_siren(32);
  const SignalSet s = synth_set(11, 2, 16);
  const Signal& sig = s.train[0];
  const auto fit = fit_signal(build_network(a), init(a).values, full_mask(a), sig, 200, 1e-3);
  ParamVector p = init(a);
  p.values = fit.params;
  const fs::path path = fs::temp_directory_path() / "msinr_fit.png";
  render(a, p, full_mask(a), 16, 16, path);
  const Image img = read_image(path);
  const Signal back = signal_from_image(img, "back");
  const double mse = (back.targets - sig.targets).squaredNorm() / static_cast<double>(sig.targets.size());
  // 8-bit quantization adds at most (1/510)^2 per entry on top of the fit error.
  const double fit_mse = std::pow(10.0, -fit.psnr.back() / 10.0);
  EXPECT_LE(std::sqrt(mse), std::sqrt(fit_mse) + 1.0 / 510.0 + 1e-12);
  EXPECT_NEAR(psnr(mse), fit.psnr.back(), 1.0);
  fs::remove(path);
}
