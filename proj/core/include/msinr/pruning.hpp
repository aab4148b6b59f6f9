#pragma once

#include "msinr/models.hpp"
#include "msinr/optim.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace msinr {

// floor(gamma * survivors): the number of entries one pruning round removes.
// Throws ConfigError unless 0 < gamma < 1.
std::size_t prune_count(std::size_t survivors, double gamma);

struct PruneResult {
  Mask mask;
  double threshold = 0.0;  // largest pruned score (NaN when nothing was pruned)
  std::size_t pruned = 0;
};

// Global magnitude pruning: among surviving prunable entries, removes the
// floor(gamma * ||M||_0) with the smallest |theta|, lower flat index first on
// ties. Requires ||M||_0 >= 2. The caller zeroes the pruned parameters.
PruneResult magnitude_prune(const Eigen::VectorXd& params, const Mask& mask, double gamma);

// Same criterion, but removes survivors until exactly `keep` remain.
PruneResult magnitude_prune_to(const Eigen::VectorXd& params, const Mask& mask, std::size_t keep);

// Removes floor(gamma * ||M||_0) survivors chosen uniformly without replacement.
Mask random_prune(const Mask& mask, double gamma, std::uint64_t seed);

struct SparsitySchedule {
  double gamma = 0.2;
  std::size_t target_kappa = 1;

  void validate() const;
  // Survivor counts start, s_1, ..., s_r where s_r <= target_kappa < s_{r-1}.
  // Throws ConfigError if a round would prune nothing before reaching kappa.
  std::vector<std::size_t> survivors(std::size_t start) const;
  std::size_t rounds(std::size_t start) const { return survivors(start).size() - 1; }
};

struct PruneRecord {
  std::size_t round = 0;
  std::size_t survivors = 0;
  double threshold = 0.0;
  double loss_before = 0.0;  // meta-loss right after pruning
  double loss_after = 0.0;   // meta-loss after retraining
};

struct PruneTrace {
  std::vector<PruneRecord> records;
};

void write_trace_csv(const PruneTrace& trace, const std::filesystem::path& path,
                     const std::string& config_echo = {});

enum class PruneCriterion : std::uint8_t { magnitude, random };

struct PruneLoopOptions {
  PruneCriterion criterion = PruneCriterion::magnitude;
  std::uint64_t prune_seed = 0;       // random criterion only
  std::size_t probe_signals = 8;      // training signals used for trace meta-losses
  std::size_t log_every = 0;
  std::function<void(std::size_t round, std::size_t step, double loss)> on_log;
  // Called after each retraining phase with the round's parameters and mask.
  std::function<void(const PruneRecord&, const Eigen::VectorXd&, const Mask&)> on_round;
};

struct SparseModel {
  ParamVector params;
  Mask mask;
  PruneTrace trace;
};

// Prune-retrain loop from already meta-trained parameters: while
// ||M||_0 > kappa, prune a gamma fraction, zero the pruned entries and
// meta-train for cfg.retrain_steps.
SparseModel prune_loop(const ArchSpec& arch, const ParamVector& params, const Mask& mask,
                       const std::vector<Signal>& train, const MetaConfig& cfg,
                       const SparsitySchedule& schedule, const PruneLoopOptions& options = {});

// Full pipeline: init, meta-train for cfg.outer_steps, then prune_loop.
SparseModel run_meta_sparse_inr(const ArchSpec& arch, const std::vector<Signal>& train,
                                const MetaConfig& cfg, const SparsitySchedule& schedule,
                                const PruneLoopOptions& options = {});

// Lottery-ticket style iterative magnitude pruning with rewinding on one
// signal. Entry r holds the mask after r pruning rounds (r = 0 is dense), the
// rewound initialization theta_0 * M_r and the per-step losses of training it.
struct TicketRound {
  Mask mask;
  ParamVector init;
  std::vector<LossValue> losses;
};

std::vector<TicketRound> winning_ticket(const ArchSpec& arch, const Signal& signal,
                                        std::size_t train_steps, double gamma, std::size_t rounds,
                                        double lr, Precision precision = Precision::f64);

// Per-signal pruning baselines starting from meta-trained dense parameters.
// Losses cover every training step (steps + 1 entries); the entry at a
// pruning event is the loss of the freshly pruned model.
struct PerSignalFit {
  Eigen::VectorXd params;
  Mask mask;
  std::vector<LossValue> losses;
};

// Adam for `half_budget` steps, one-shot prune to `target_kappa` survivors,
// Adam for `half_budget` more.
PerSignalFit per_signal_oneshot(const Network& net, const Eigen::VectorXd& meta_params,
                                const Mask& mask, const Signal& signal, std::size_t target_kappa,
                                double lr, std::size_t half_budget = 50,
                                Precision precision = Precision::f64);

// `rounds` prunes of gamma interleaved with floor(budget / (rounds + 1))-step
// Adam segments (before, between and after the prunes).
PerSignalFit per_signal_imp(const Network& net, const Eigen::VectorXd& meta_params, const Mask& mask,
                            const Signal& signal, std::size_t rounds, double lr,
                            std::size_t budget = 100, double gamma = 0.2,
                            Precision precision = Precision::f64);

}  // namespace msinr
