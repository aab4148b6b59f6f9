#include "msinr/app/experiments.hpp"

#include "msinr/error.hpp"
#include "msinr/grad_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace msinr::app {
namespace {

void say(const Progress& p, const std::string& msg) {
  if (p) p(msg);
}

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

}  // namespace

ParamVector meta_pretrain(const ExperimentConfig& cfg, const SignalSet& data, const Progress& progress) {
  const Network net = build_network(cfg.arch);
  ParamVector p = init(cfg.arch);
  MetaRunOptions run;
  run.steps = cfg.meta.outer_steps;
  run.log_every = cfg.log_every;
  if (progress)
    run.on_log = [&](std::size_t step, double loss) {
      progress("pretrain step " + std::to_string(step) + " loss " + fmt(loss, 6));
    };
  p.values = run_meta(net, p.values, full_mask(cfg.arch), data.train, cfg.meta, run);
  return p;
}

std::vector<Level> prune_levels(const ExperimentConfig& cfg, const SignalSet& data, const ParamVector& pretrained,
                                PruneCriterion criterion, PruneTrace* trace, const Progress& progress) {
  PruneLoopOptions opt;
  opt.criterion = criterion;
  opt.prune_seed = cfg.prune.prune_seed;
  opt.probe_signals = cfg.prune.probe_signals;
  opt.log_every = cfg.log_every;
  if (progress)
    opt.on_log = [&](std::size_t round, std::size_t step, double loss) {
      progress("round " + std::to_string(round) + " step " + std::to_string(step) + " loss " + fmt(loss, 6));
    };
  std::vector<Level> levels;
  opt.on_round = [&](const PruneRecord& rec, const Eigen::VectorXd& theta, const Mask& mask) {
    levels.push_back({rec.round, theta, mask});
    say(progress, (criterion == PruneCriterion::magnitude ? "magnitude" : "random") + std::string(" round ") +
                      std::to_string(rec.round) + ": " + std::to_string(rec.survivors) + " survivors, loss " +
                      fmt(rec.loss_before, 6) + " -> " + fmt(rec.loss_after, 6));
  };
  auto model = prune_loop(cfg.arch, pretrained, full_mask(cfg.arch), data.train, cfg.meta, cfg.schedule(), opt);
  if (trace) *trace = std::move(model.trace);
  return levels;
}

NarrowModel narrow_model(const ExperimentConfig& cfg, const SignalSet& data, std::size_t target_params,
                         std::size_t steps) {
  const std::size_t w = dense_narrow_width_for(WidthTable{cfg.widths}, cfg.arch, target_params);
  NarrowModel m{cfg.arch.with_width(w), {}, {}};
  m.params = init(m.arch);
  m.mask = full_mask(m.arch);
  if (steps > 0) {
    MetaRunOptions run;
    run.steps = steps;
    m.params.values = run_meta(build_network(m.arch), m.params.values, m.mask, data.train, cfg.meta, run);
  }
  return m;
}

OrderingResult run_ordering(ExperimentConfig cfg, std::uint64_t seed, const OrderingOptions& options,
                            const Progress& progress) {
  cfg.data.synth_seed = seed;
  cfg.arch.seed = seed;
  cfg.meta.seed = seed;
  cfg.prune.prune_seed = seed;
  cfg.eval.seed = seed;
  const SignalSet data = load_data(cfg.data);
  const std::size_t d = param_count(cfg.arch);

  say(progress, "seed " + std::to_string(seed) + ": pretraining");
  const ParamVector pretrained = meta_pretrain(cfg, data, progress);
  auto magnitude = prune_levels(cfg, data, pretrained, PruneCriterion::magnitude, nullptr, progress);
  std::vector<Level> random;
  if (options.random) random = prune_levels(cfg, data, pretrained, PruneCriterion::random, nullptr, progress);

  const std::size_t n_eval =
      cfg.eval.levels == 0 ? magnitude.size() : std::min(cfg.eval.levels, magnitude.size());
  OrderingResult out;
  out.seed = seed;
  for (std::size_t k = magnitude.size() - n_eval; k < magnitude.size(); ++k) {
    const Level& lv = magnitude[k];
    OrderingLevel row;
    row.round = lv.round;
    row.survivors = report_counts(lv.mask).surviving;
    row.fraction = static_cast<double>(row.survivors) / static_cast<double>(d);

    auto ms = evaluate(cfg.arch, {lv.params, {}}, lv.mask, data, cfg.eval_options("meta_sparse"));
    row.meta_sparse = ms.final_mean();
    out.reports.push_back(std::move(ms));
    if (options.random) {
      const Level& rv = random[k];
      auto rr = evaluate(cfg.arch, {rv.params, {}}, rv.mask, data, cfg.eval_options("random"));
      row.random = rr.final_mean();
      out.reports.push_back(std::move(rr));
    }
    if (options.dense_narrow || options.scratch) {
      // Dense-Narrow gets as many outer steps as the sparse model has seen.
      const std::size_t steps = cfg.meta.outer_steps + lv.round * cfg.meta.retrain_steps;
      if (options.scratch) {
        auto sc = narrow_model(cfg, data, row.survivors, 0);
        auto sr = evaluate(sc.arch, sc.params, sc.mask, data, cfg.eval_options("scratch"));
        row.scratch = sr.final_mean();
        row.narrow_width = sc.arch.width;
        row.narrow_params = param_count(sc.arch);
        out.reports.push_back(std::move(sr));
      }
      if (options.dense_narrow) {
        auto dn = narrow_model(cfg, data, row.survivors, steps);
        auto dr = evaluate(dn.arch, dn.params, dn.mask, data, cfg.eval_options("dense_narrow"));
        row.dense_narrow = dr.final_mean();
        row.narrow_width = dn.arch.width;
        row.narrow_params = param_count(dn.arch);
        out.reports.push_back(std::move(dr));
      }
    }
    say(progress, "level " + std::to_string(row.round) + " (" + std::to_string(row.survivors) +
                      " params): meta_sparse " + fmt(row.meta_sparse) + " random " + fmt(row.random) +
                      " dense_narrow " + fmt(row.dense_narrow) + " scratch " + fmt(row.scratch) + " [width " +
                      std::to_string(row.narrow_width) + "]");
    out.levels.push_back(row);
  }

  const Level& last = magnitude.back();
  out.sparsest_val = out.levels.back().meta_sparse;
  if (options.train_split) {
    auto o = cfg.eval_options("meta_sparse");
    o.split = "train";
    auto tr = evaluate(cfg.arch, {last.params, {}}, last.mask, data, o);
    out.sparsest_train = tr.final_mean();
    out.reports.push_back(std::move(tr));
  }
  return out;
}

std::vector<TradeoffRow> run_ticket(const ExperimentConfig& cfg, const Signal& image, const Progress& progress) {
  const auto rounds = winning_ticket(cfg.arch, image, cfg.ticket.train_steps, cfg.prune.gamma, cfg.ticket.rounds,
                                     cfg.ticket.lr, cfg.meta.precision);
  std::vector<TradeoffRow> rows;
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const auto psnr = psnr_trajectory(rounds[r].losses, image.channels());
    TradeoffRow row{"ticket", r, cfg.arch.width, report_counts(rounds[r].mask).surviving, psnr.back(),
                    *std::max_element(psnr.begin(), psnr.end())};
    say(progress, "ticket round " + std::to_string(r) + ": " + std::to_string(row.surviving_params) +
                      " params, peak " + fmt(row.peak_psnr));
    rows.push_back(row);
  }
  // One dense-narrow run per distinct matched width.
  std::vector<std::size_t> seen;
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const std::size_t w = dense_narrow_width_for(WidthTable{cfg.widths}, cfg.arch, rows[r].surviving_params);
    if (std::find(seen.begin(), seen.end(), w) != seen.end()) continue;
    seen.push_back(w);
    const ArchSpec narrow = cfg.arch.with_width(w);
    const auto fit = train_adam(build_network(narrow), init(narrow).values, full_mask(narrow), image,
                                cfg.ticket.train_steps, cfg.ticket.lr, cfg.meta.precision);
    const auto psnr = psnr_trajectory(fit.losses, image.channels());
    TradeoffRow row{"dense_narrow", r, w, param_count(narrow), psnr.back(),
                    *std::max_element(psnr.begin(), psnr.end())};
    say(progress, "dense-narrow width " + std::to_string(w) + ": " + std::to_string(row.surviving_params) +
                      " params, peak " + fmt(row.peak_psnr));
    rows.push_back(row);
  }
  return rows;
}

void write_tradeoff_csv(const std::vector<TradeoffRow>& rows, const std::string& path, const std::string& config_echo) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  if (!config_echo.empty()) out << "# config: " << config_echo << '\n';
  out << "method,round,width,surviving_params,final_psnr,peak_psnr\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.method << ',' << r.round << ',' << r.width << ',' << r.surviving_params << ',' << r.final_psnr << ','
        << r.peak_psnr << '\n';
}

}  // namespace msinr::app
