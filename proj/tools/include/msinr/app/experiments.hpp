#pragma once

#include "msinr/app/config.hpp"
#include "msinr/eval.hpp"
#include "msinr/pruning.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace msinr::app {

using Progress = std::function<void(const std::string&)>;

// Meta-trains a fresh initialization of cfg.arch for cfg.meta.outer_steps.
ParamVector meta_pretrain(const ExperimentConfig& cfg, const SignalSet& data, const Progress& progress = {});

// One pruning level of a Meta-SparseINR (or random pruning) run.
struct Level {
  std::size_t round = 0;
  Eigen::VectorXd params;
  Mask mask;
};

// Runs the prune-retrain loop from pretrained parameters and keeps every level.
std::vector<Level> prune_levels(const ExperimentConfig& cfg, const SignalSet& data, const ParamVector& pretrained,
                                PruneCriterion criterion, PruneTrace* trace = nullptr,
                                const Progress& progress = {});

// Dense narrow baseline: width selected for `target_params` reported
// parameters, meta-trained for `steps` outer steps (Dense-Narrow) or left at
// its random initialization (Scratch, steps = 0).
struct NarrowModel {
  ArchSpec arch;
  ParamVector params;
  Mask mask;
};

NarrowModel narrow_model(const ExperimentConfig& cfg, const SignalSet& data, std::size_t target_params,
                         std::size_t steps);

// Mean PSNR at the budget for every method at each evaluated level, plus the
// train-split PSNR of the sparsest Meta-SparseINR model.
struct OrderingLevel {
  std::size_t round = 0;
  std::size_t survivors = 0;  // reported surviving parameters of the sparse models
  double fraction = 0.0;      // survivors / d
  std::size_t narrow_width = 0;
  std::size_t narrow_params = 0;
  double meta_sparse = 0.0;
  double random = 0.0;
  double dense_narrow = 0.0;
  double scratch = 0.0;
};

struct OrderingResult {
  std::uint64_t seed = 0;
  std::vector<OrderingLevel> levels;
  double sparsest_train = 0.0;
  double sparsest_val = 0.0;
  std::vector<EvalReport> reports;
};

struct OrderingOptions {
  bool random = true;
  bool dense_narrow = true;
  bool scratch = true;
  bool train_split = true;
};

// The full method comparison on one data seed: cfg.data.synth_seed,
// cfg.arch.seed and cfg.meta.seed are all set to `seed`.
OrderingResult run_ordering(ExperimentConfig cfg, std::uint64_t seed, const OrderingOptions& options = {},
                            const Progress& progress = {});

// Single-image lottery ticket sweep: one row per ticket round and per matched
// dense-narrow width, each with final and peak PSNR.
struct TradeoffRow {
  std::string method;
  std::size_t round = 0;
  std::size_t width = 0;
  std::size_t surviving_params = 0;
  double final_psnr = 0.0;
  double peak_psnr = 0.0;
};

std::vector<TradeoffRow> run_ticket(const ExperimentConfig& cfg, const Signal& image, const Progress& progress = {});

void write_tradeoff_csv(const std::vector<TradeoffRow>& rows, const std::string& path, const std::string& config_echo);

}  // namespace msinr::app
