#include "msinr/app/config.hpp"
#include "msinr/app/experiments.hpp"
#include "msinr/checkpoint.hpp"
#include "msinr/error.hpp"
#include "msinr/eval.hpp"
#include "msinr/image_io.hpp"
#include "msinr/runtime.hpp"
#include "msinr/signals.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace msinr;
using namespace msinr::app;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> precision;
  std::optional<std::string> out;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON experiment config");
  sub->add_option("--preset", c.preset, "start from a named preset (full, ticket, desk, desk-reptile)");
  sub->add_option("--seed", c.seed, "seed for initialization, sampling, pruning and evaluation");
  sub->add_option("--workers", c.workers, "worker threads for per-signal work");
  sub->add_option("--precision", c.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  sub->add_option("--out", c.out, "output directory");
  sub->add_flag("-q,--quiet", c.quiet, "no progress output");
}

ExperimentConfig resolve(const Common& c) {
  if (!c.config.empty() && !c.preset.empty()) throw ConfigError("use either --config or --preset, not both");
  ExperimentConfig cfg = !c.config.empty() ? load_config(c.config) : preset(c.preset.empty() ? "desk" : c.preset);
  if (c.seed) {
    cfg.arch.seed = cfg.meta.seed = cfg.eval.seed = cfg.prune.prune_seed = *c.seed;
    cfg.data.synth_seed = cfg.data.split_seed = *c.seed;
  }
  if (c.workers) cfg.meta.workers = *c.workers;
  if (c.precision) cfg.meta.precision = parse_precision(*c.precision);
  if (c.out) cfg.out_dir = *c.out;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  std::ofstream(fs::path(cfg.out_dir) / "config.json") << to_json(cfg) << '\n';
  return cfg;
}

std::string echo(const ExperimentConfig& cfg) { return to_json(cfg, -1); }

Progress progress(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& s) { std::cerr << s << std::endl; };
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& name) { return fs::path(cfg.out_dir) / name; }

Checkpoint checkpoint_for(const ExperimentConfig& cfg, const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.arch == cfg.arch))
    std::cerr << "note: using the architecture stored in " << path << " instead of the config's\n";
  return ck;
}

void write_json(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text << '\n';
}

// ---- synth-data --------------------------------------------------------------

int cmd_synth(const Common& common, const std::string& format) {
  auto cfg = resolve(common);
  const auto set = synth_set(cfg.data.synth_seed, cfg.data.synth_n, cfg.data.size);
  for (const auto* split : {"train", "val"}) {
    const auto dir = out_path(cfg, split);
    fs::create_directories(dir);
    for (const auto& s : split_by_name(set, split))
      write_image(image_from_values(s.targets, s.height, s.width), dir / (s.id + "." + format));
  }
  std::cout << "wrote " << set.train.size() << " + " << set.val.size() << " images to " << cfg.out_dir << '\n';
  return 0;
}

// ---- meta-train --------------------------------------------------------------

int cmd_meta_train(const Common& common, const std::string& init_path) {
  auto cfg = resolve(common);
  const auto data = load_data(cfg.data);
  Checkpoint ck{cfg.arch, init(cfg.arch), full_mask(cfg.arch)};
  if (!init_path.empty()) ck = checkpoint_for(cfg, init_path);
  const Network net = build_network(ck.arch);

  std::ofstream log(out_path(cfg, "meta_loss.csv"));
  log << "# config: " << echo(cfg) << "\nstep,mean_post_loss\n";
  log.precision(10);
  MetaRunOptions run;
  run.steps = cfg.meta.outer_steps;
  run.log_every = cfg.log_every == 0 ? std::max<std::size_t>(1, cfg.meta.outer_steps / 100) : cfg.log_every;
  auto say = progress(common);
  run.on_log = [&](std::size_t step, double loss) {
    log << step << ',' << loss << '\n';
    if (say) say("step " + std::to_string(step) + " loss " + std::to_string(loss));
  };
  ck.params.values = run_meta(net, ck.params.values, ck.mask, data.train, cfg.meta, run);
  save_checkpoint(ck, out_path(cfg, "meta.ckpt"));
  std::cout << "wrote " << out_path(cfg, "meta.ckpt").string() << '\n';
  return 0;
}

// ---- prune-loop --------------------------------------------------------------

int cmd_prune_loop(const Common& common, const std::string& init_path) {
  auto cfg = resolve(common);
  if (cfg.prune.method != Method::meta_sparse && cfg.prune.method != Method::random)
    throw ConfigError("prune-loop runs prune.method meta_sparse or random");
  const auto data = load_data(cfg.data);
  Checkpoint start = checkpoint_for(cfg, init_path);
  cfg.arch = start.arch;

  PruneLoopOptions opt;
  opt.criterion = cfg.prune.method == Method::random ? PruneCriterion::random : PruneCriterion::magnitude;
  opt.prune_seed = cfg.prune.prune_seed;
  opt.probe_signals = cfg.prune.probe_signals;
  opt.log_every = cfg.log_every;
  auto say = progress(common);
  if (say)
    opt.on_log = [&](std::size_t round, std::size_t step, double loss) {
      say("round " + std::to_string(round) + " step " + std::to_string(step) + " loss " + std::to_string(loss));
    };
  opt.on_round = [&](const PruneRecord& rec, const Eigen::VectorXd& theta, const Mask& mask) {
    char name[32];
    std::snprintf(name, sizeof(name), "round_%02zu.ckpt", rec.round);
    save_checkpoint({cfg.arch, {theta, {}}, mask}, out_path(cfg, name));
    if (say) say(std::string(name) + ": " + std::to_string(rec.survivors) + " survivors");
  };
  auto model = prune_loop(cfg.arch, start.params, start.mask, data.train, cfg.meta, cfg.schedule(), opt);
  write_trace_csv(model.trace, out_path(cfg, "trace.csv"), echo(cfg));
  std::cout << model.trace.records.size() << " rounds, " << model.mask.survivors() << " survivors\n";
  return 0;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string data;
  std::string split;
  std::vector<std::size_t> targets;
  bool render = false;
};

void render_extremes(const ExperimentConfig& cfg, const ArchSpec& arch, const ParamVector& params, const Mask& mask,
                     const SignalSet& data, const EvalReport& report, const std::string& tag) {
  const auto& split = split_by_name(data, report.split);
  const auto net = build_network(arch);
  std::size_t best = 0, worst = 0;
  for (std::size_t i = 0; i < report.signals.size(); ++i) {
    if (report.signals[i].psnr.back() > report.signals[best].psnr.back()) best = i;
    if (report.signals[i].psnr.back() < report.signals[worst].psnr.back()) worst = i;
  }
  for (auto [i, label] : {std::pair{best, "best"}, std::pair{worst, "worst"}}) {
    const auto& id = report.signals[i].id;
    for (const auto& s : split) {
      if (s.id != id) continue;
      auto fit = fit_signal(net, params.values, mask, s, report.budget(), cfg.eval.lr, cfg.meta.precision);
      render(arch, {fit.params, {}}, mask, s.height, s.width, out_path(cfg, tag + "_" + label + ".png"),
             cfg.meta.precision);
    }
  }
}

int cmd_eval(const Common& common, const EvalArgs& args) {
  auto cfg = resolve(common);
  if (!args.data.empty()) cfg.data.source = args.data;  // cross-dataset evaluation
  if (!args.split.empty()) cfg.eval.split = args.split;
  cfg.validate();
  const auto data = load_data(cfg.data);
  const std::string method = to_string(cfg.prune.method);
  auto say = progress(common);
  std::vector<EvalReport> reports;

  switch (cfg.prune.method) {
    case Method::meta_sparse:
    case Method::random:
    case Method::ticket:
      if (args.checkpoints.empty()) throw ConfigError("eval of " + method + " needs at least one checkpoint");
      for (std::size_t i = 0; i < args.checkpoints.size(); ++i) {
        const auto ck = load_checkpoint(args.checkpoints[i]);
        reports.push_back(evaluate(ck.arch, ck.params, ck.mask, data, cfg.eval_options(method)));
        if (say) say(args.checkpoints[i] + ": " + std::to_string(reports.back().final_mean()) + " dB");
        if (args.render)
          render_extremes(cfg, ck.arch, ck.params, ck.mask, data, reports.back(), "ckpt" + std::to_string(i));
      }
      break;
    case Method::dense_narrow:
    case Method::scratch: {
      // One run per table width, or per width matched to the given targets /
      // checkpoints' surviving counts.
      std::vector<std::size_t> widths;
      auto targets = args.targets;
      for (const auto& p : args.checkpoints) targets.push_back(report_counts(load_checkpoint(p).mask).surviving);
      for (auto t : targets) widths.push_back(dense_narrow_width_for(WidthTable{cfg.widths}, cfg.arch, t));
      if (targets.empty()) widths = cfg.widths;
      for (auto w : widths) {
        const std::size_t steps = cfg.prune.method == Method::scratch ? 0 : cfg.meta.outer_steps;
        auto m = narrow_model(cfg, data, param_count(cfg.arch.with_width(w)), steps);
        reports.push_back(evaluate(m.arch, m.params, m.mask, data, cfg.eval_options(method)));
        if (say) say("width " + std::to_string(w) + ": " + std::to_string(reports.back().final_mean()) + " dB");
      }
      break;
    }
    case Method::oneshot:
    case Method::imp: {
      if (args.checkpoints.size() != 1) throw ConfigError(method + " needs exactly one dense meta-trained checkpoint");
      const auto ck = load_checkpoint(args.checkpoints.front());
      const auto net = build_network(ck.arch);
      const auto kappa = cfg.prune.target(ck.mask.prunable_count());
      const auto imp_rounds = cfg.prune.imp_rounds;
      const auto lr = cfg.eval.lr;
      const auto budget = cfg.eval.budget;
      const auto gamma = cfg.prune.gamma;
      const auto prec = cfg.meta.precision;
      SignalFitter fitter;
      if (cfg.prune.method == Method::oneshot)
        fitter = [&](const Signal& s) {
          return per_signal_oneshot(net, ck.params.values, ck.mask, s, kappa, lr, budget / 2, prec);
        };
      else
        fitter = [&](const Signal& s) {
          return per_signal_imp(net, ck.params.values, ck.mask, s, imp_rounds, lr, budget, gamma, prec);
        };
      reports.push_back(evaluate_per_signal(ck.arch, data, cfg.eval_options(method), fitter));
      if (say) say(method + ": " + std::to_string(reports.back().final_mean()) + " dB");
      break;
    }
  }
  write_report_csv(reports, out_path(cfg, "eval.csv"), echo(cfg));
  write_signal_csv(reports, out_path(cfg, "signals.csv"));
  write_json(out_path(cfg, "summary.json"), summary_json(reports, to_json(cfg)));
  for (const auto& r : reports)
    std::cout << r.method << " params " << r.surviving_params << ": " << r.final_mean() << " +- " << r.final_std()
              << " dB (" << r.bpp << " bpp)\n";
  return 0;
}

// ---- fit ---------------------------------------------------------------------

Signal pick_image(const ExperimentConfig& cfg, const std::string& image) {
  if (image.empty()) return load_data(cfg.data).train.front();
  LoadOptions o;
  o.size = cfg.data.size;
  o.resize_short = cfg.data.resize_short;
  return load_image(image, o);
}

int cmd_fit(const Common& common, const std::string& ckpt, const std::string& image, std::size_t steps) {
  auto cfg = resolve(common);
  const Signal s = pick_image(cfg, image);
  Checkpoint ck{cfg.arch, init(cfg.arch), full_mask(cfg.arch)};
  if (!ckpt.empty()) ck = load_checkpoint(ckpt);
  const auto fit = fit_signal(build_network(ck.arch), ck.params.values, ck.mask, s, steps == 0 ? cfg.eval.budget : steps,
                              cfg.eval.lr, cfg.meta.precision);
  std::ofstream out(out_path(cfg, "fit.csv"));
  out << "# config: " << echo(cfg) << "\nstep,psnr\n";
  out.precision(10);
  for (std::size_t k = 0; k < fit.psnr.size(); ++k) out << k << ',' << fit.psnr[k] << '\n';
  render(ck.arch, {fit.params, {}}, ck.mask, s.height, s.width, out_path(cfg, "fit.png"), cfg.meta.precision);
  save_checkpoint({ck.arch, {fit.params, {}}, ck.mask}, out_path(cfg, "fit.ckpt"));
  std::cout << s.id << ": " << fit.psnr.back() << " dB after " << fit.psnr.size() - 1 << " steps\n";
  return 0;
}

// ---- ticket ------------------------------------------------------------------

int cmd_ticket(const Common& common, const std::string& image) {
  auto cfg = resolve(common);
  if (!image.empty()) cfg.ticket.image = image;
  const Signal s = pick_image(cfg, cfg.ticket.image);
  const auto rows = run_ticket(cfg, s, progress(common));
  write_tradeoff_csv(rows, out_path(cfg, "tradeoff.csv").string(), echo(cfg));
  for (const auto& r : rows)
    std::cout << r.method << " " << r.surviving_params << " params: peak " << r.peak_psnr << " dB\n";
  return 0;
}

// ---- report ------------------------------------------------------------------

int cmd_report(const Common& common, const std::vector<std::uint64_t>& seeds) {
  auto cfg = resolve(common);
  std::ofstream csv(out_path(cfg, "ordering.csv"));
  csv << "# config: " << echo(cfg) << '\n'
      << "seed,round,survivors,fraction,narrow_width,narrow_params,meta_sparse,random,dense_narrow,scratch\n";
  csv.precision(10);
  nlohmann::json runs = nlohmann::json::array();
  std::vector<EvalReport> all;
  for (auto seed : seeds) {
    const auto r = run_ordering(cfg, seed, {}, progress(common));
    for (const auto& l : r.levels)
      csv << seed << ',' << l.round << ',' << l.survivors << ',' << l.fraction << ',' << l.narrow_width << ','
          << l.narrow_params << ',' << l.meta_sparse << ',' << l.random << ',' << l.dense_narrow << ',' << l.scratch
          << '\n';
    runs.push_back({{"seed", seed}, {"sparsest_train_psnr", r.sparsest_train}, {"sparsest_val_psnr", r.sparsest_val}});
    all.insert(all.end(), r.reports.begin(), r.reports.end());
  }
  auto doc = nlohmann::json::parse(summary_json(all, to_json(cfg)));
  doc["runs"] = runs;
  write_json(out_path(cfg, "summary.json"), doc.dump(2));
  std::cout << "wrote " << out_path(cfg, "ordering.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  keep_heap_resident();
  CLI::App app{"Meta-learned sparse implicit neural representations"};
  app.require_subcommand(1);

  Common common;
  std::string format = "png", init_path, image, ckpt;
  std::size_t fit_steps = 0;
  EvalArgs eval_args;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  auto* synth = app.add_subcommand("synth-data", "write the synthetic image set");
  add_common(synth, common);
  synth->add_option("--format", format, "png or ppm")->check(CLI::IsMember({"png", "ppm"}));

  auto* meta = app.add_subcommand("meta-train", "meta-learn a dense initialization");
  add_common(meta, common);
  meta->add_option("--init", init_path, "resume from a checkpoint");

  auto* prune = app.add_subcommand("prune-loop", "iterative prune and meta-retrain from a checkpoint");
  add_common(prune, common);
  prune->add_option("--init", init_path, "pretrained checkpoint")->required();

  auto* eval = app.add_subcommand("eval", "per-signal fitting under the step budget");
  add_common(eval, common);
  eval->add_option("checkpoints", eval_args.checkpoints, "checkpoints to evaluate");
  eval->add_option("--data", eval_args.data, "evaluate on another dataset (directory or 'synth')");
  eval->add_option("--split", eval_args.split, "train or val");
  eval->add_option("--target-params", eval_args.targets, "dense_narrow/scratch: match these parameter counts");
  eval->add_flag("--render", eval_args.render, "render the best and worst fitted signal");

  auto* fit = app.add_subcommand("fit", "fit one image from a checkpoint or a fresh initialization");
  add_common(fit, common);
  fit->add_option("--ckpt", ckpt, "initialization checkpoint");
  fit->add_option("--image", image, "image file (default: first training signal)");
  fit->add_option("--steps", fit_steps, "Adam steps (default: eval.budget)");

  auto* ticket = app.add_subcommand("ticket", "winning ticket vs dense-narrow on one image");
  add_common(ticket, common);
  ticket->add_option("--image", image, "image file (default: first training signal)");

  auto* report = app.add_subcommand("report", "method comparison across seeds");
  add_common(report, common);
  report->add_option("--seeds", seeds, "data/model seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(common, format);
    if (*meta) return cmd_meta_train(common, init_path);
    if (*prune) return cmd_prune_loop(common, init_path);
    if (*eval) return cmd_eval(common, eval_args);
    if (*fit) return cmd_fit(common, ckpt, image, fit_steps);
    if (*ticket) return cmd_ticket(common, image);
    if (*report) return cmd_report(common, seeds);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
