#include "msinr/pruning.hpp"

#include "msinr/error.hpp"
#include "msinr/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace msinr {

std::size_t prune_count(std::size_t survivors, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("pruning ratio gamma must lie in (0, 1)");
  // The small offset keeps products such as 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(gamma * static_cast<double>(survivors) + 1e-9));
}

PruneResult magnitude_prune(const Eigen::VectorXd& params, const Mask& mask, double gamma) {
  const std::size_t n = mask.survivors();
  if (n < 2) throw ConfigError("magnitude pruning needs at least two surviving parameters");
  return magnitude_prune_to(params, mask, n - prune_count(n, gamma));
}

PruneResult magnitude_prune_to(const Eigen::VectorXd& params, const Mask& mask, std::size_t keep) {
  if (static_cast<std::size_t>(params.size()) != mask.param_count())
    throw DimensionError("mask and parameter vector differ in length");
  const std::size_t n = mask.survivors();
  if (keep > n) throw ConfigError("cannot keep more parameters than survive");

  PruneResult r{mask, std::numeric_limits<double>::quiet_NaN(), n - keep};
  if (r.pruned == 0) return r;

  // (score, flat index); the prunable map is sorted, so position order is
  // flat-index order.
  const auto& map = mask.prunable_map();
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(n);
  for (std::size_t k = 0; k < map.size(); ++k)
    if (mask.kept(k)) scored.emplace_back(std::abs(params[static_cast<Eigen::Index>(map[k])]), k);
  const auto cut = scored.begin() + static_cast<std::ptrdiff_t>(r.pruned);
  // Lexicographic (score, index) order: ties go to the lower index.
  std::nth_element(scored.begin(), cut - 1, scored.end());
  r.threshold = (cut - 1)->first;
  for (auto it = scored.begin(); it != cut; ++it) r.mask.set(it->second, false);
  return r;
}

Mask random_prune(const Mask& mask, double gamma, std::uint64_t seed) {
  const std::size_t n = mask.survivors();
  const std::size_t k = prune_count(n, gamma);
  std::vector<std::size_t> alive;
  alive.reserve(n);
  for (std::size_t i = 0; i < mask.prunable_count(); ++i)
    if (mask.kept(i)) alive.push_back(i);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(alive[i], alive[i + rng.below(n - i)]);
  Mask out = mask;
  for (std::size_t i = 0; i < k; ++i) out.set(alive[i], false);
  return out;
}

void SparsitySchedule::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("pruning ratio gamma must lie in (0, 1)");
  if (target_kappa < 1) throw ConfigError("target_kappa must be >= 1");
}

std::vector<std::size_t> SparsitySchedule::survivors(std::size_t start) const {
  validate();
  std::vector<std::size_t> seq{start};
  while (seq.back() > target_kappa) {
    const std::size_t p = prune_count(seq.back(), gamma);
    if (p == 0)
      throw ConfigError("pruning stalls at " + std::to_string(seq.back()) + " survivors before reaching " +
                        std::to_string(target_kappa));
    seq.push_back(seq.back() - p);
  }
  return seq;
}

void write_trace_csv(const PruneTrace& trace, const std::filesystem::path& path, const std::string& config_echo) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  if (!config_echo.empty()) out << "# config: " << config_echo << '\n';
  out << "round,survivors,threshold,loss_before,loss_after\n";
  out.precision(17);
  for (const auto& r : trace.records)
    out << r.round << ',' << r.survivors << ',' << r.threshold << ',' << r.loss_before << ','
        << r.loss_after << '\n';
}

SparseModel prune_loop(const ArchSpec& arch, const ParamVector& params, const Mask& mask,
                       const std::vector<Signal>& train, const MetaConfig& cfg,
                       const SparsitySchedule& schedule, const PruneLoopOptions& options) {
  const Network net = build_network(arch);
  if (params.size() != net.param_count) throw DimensionError("parameters do not match architecture");
  schedule.survivors(mask.survivors());
  if (train.empty()) throw DataError("pruning loop needs a non-empty training split");

  std::vector<const Signal*> probe;
  for (std::size_t i = 0; i < std::min(options.probe_signals, train.size()); ++i) probe.push_back(&train[i]);

  SparseModel out{params, mask, {}};
  Eigen::VectorXd& theta = out.params.values;
  zero_pruned(out.mask, theta);
  std::size_t round = 0;
  while (out.mask.survivors() > schedule.target_kappa) {
    ++round;
    PruneRecord rec;
    rec.round = round;
    if (options.criterion == PruneCriterion::magnitude) {
      auto pr = magnitude_prune(theta, out.mask, schedule.gamma);
      out.mask = std::move(pr.mask);
      rec.threshold = pr.threshold;
    } else {
      out.mask = random_prune(out.mask, schedule.gamma, mix_seed(options.prune_seed, round));
      rec.threshold = std::numeric_limits<double>::quiet_NaN();
    }
    zero_pruned(out.mask, theta);
    rec.survivors = out.mask.survivors();
    rec.loss_before = meta_loss(net, theta, out.mask, probe, cfg);

    MetaRunOptions run;
    run.steps = cfg.retrain_steps;
    run.stream = round;
    run.log_every = options.log_every;
    if (options.on_log) run.on_log = [&](std::size_t step, double l) { options.on_log(round, step, l); };
    theta = run_meta(net, theta, out.mask, train, cfg, run);

    rec.loss_after = meta_loss(net, theta, out.mask, probe, cfg);
    out.trace.records.push_back(rec);
    if (options.on_round) options.on_round(rec, theta, out.mask);
  }
  return out;
}

SparseModel run_meta_sparse_inr(const ArchSpec& arch, const std::vector<Signal>& train, const MetaConfig& cfg,
                                const SparsitySchedule& schedule, const PruneLoopOptions& options) {
  const Network net = build_network(arch);
  ParamVector p = init(arch);
  const Mask mask = full_mask(arch);
  MetaRunOptions run;
  run.steps = cfg.outer_steps;
  run.log_every = options.log_every;
  if (options.on_log) run.on_log = [&](std::size_t step, double l) { options.on_log(0, step, l); };
  p.values = run_meta(net, p.values, mask, train, cfg, run);
  return prune_loop(arch, p, mask, train, cfg, schedule, options);
}

std::vector<TicketRound> winning_ticket(const ArchSpec& arch, const Signal& signal, std::size_t train_steps,
                                        double gamma, std::size_t rounds, double lr, Precision precision) {
  if (rounds < 1) throw ConfigError("winning ticket needs rounds >= 1");
  const Network net = build_network(arch);
  const ParamVector theta0 = init(arch);
  Mask mask = full_mask(arch);
  std::vector<TicketRound> out;
  for (std::size_t r = 0; r <= rounds; ++r) {
    ParamVector start = theta0;
    zero_pruned(mask, start.values);
    auto trained = train_adam(net, start.values, mask, signal, train_steps, lr, precision);
    out.push_back({mask, start, std::move(trained.losses)});
    if (r < rounds) mask = magnitude_prune(trained.params, mask, gamma).mask;
  }
  return out;
}

namespace {

// Appends a segment's losses; the final entry is dropped unless `last`, since
// the next segment starts from the same (possibly re-pruned) parameters.
void append_segment(std::vector<LossValue>& into, std::vector<LossValue>&& seg, bool last) {
  if (!last) seg.pop_back();
  into.insert(into.end(), seg.begin(), seg.end());
}

}  // namespace

PerSignalFit per_signal_oneshot(const Network& net, const Eigen::VectorXd& meta_params, const Mask& mask,
                                const Signal& signal, std::size_t target_kappa, double lr,
                                std::size_t half_budget, Precision precision) {
  if (target_kappa < 1) throw ConfigError("target_kappa must be >= 1");
  PerSignalFit out{meta_params, mask, {}};
  AdamState adam = AdamState::zeros(static_cast<std::size_t>(meta_params.size()), lr);
  auto first = train_adam(net, out.params, out.mask, signal, half_budget, adam, precision);
  append_segment(out.losses, std::move(first.losses), false);
  out.params = std::move(first.params);
  if (target_kappa < out.mask.survivors()) {
    out.mask = magnitude_prune_to(out.params, out.mask, target_kappa).mask;
    zero_pruned(out.mask, out.params);
  }
  auto second = train_adam(net, out.params, out.mask, signal, half_budget, adam, precision);
  append_segment(out.losses, std::move(second.losses), true);
  out.params = std::move(second.params);
  return out;
}

PerSignalFit per_signal_imp(const Network& net, const Eigen::VectorXd& meta_params, const Mask& mask,
                            const Signal& signal, std::size_t rounds, double lr, std::size_t budget,
                            double gamma, Precision precision) {
  if (rounds < 1) throw ConfigError("IMP needs rounds >= 1");
  const std::size_t seg = budget / (rounds + 1);
  PerSignalFit out{meta_params, mask, {}};
  AdamState adam = AdamState::zeros(static_cast<std::size_t>(meta_params.size()), lr);
  for (std::size_t r = 0; r <= rounds; ++r) {
    auto part = train_adam(net, out.params, out.mask, signal, seg, adam, precision);
    append_segment(out.losses, std::move(part.losses), r == rounds);
    out.params = std::move(part.params);
    if (r < rounds) {
      out.mask = magnitude_prune(out.params, out.mask, gamma).mask;
      zero_pruned(out.mask, out.params);
    }
  }
  return out;
}

}  // namespace msinr
