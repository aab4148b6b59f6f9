#pragma once

#include "msinr/eval.hpp"
#include "msinr/models.hpp"
#include "msinr/optim.hpp"
#include "msinr/pruning.hpp"
#include "msinr/signal.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace msinr::app {

struct DataConfig {
  // "synth" or a directory of .ppm/.pgm/.png images.
  std::string source = "synth";
  std::uint64_t synth_seed = 0;
  std::size_t synth_n = 10;  // per split
  std::size_t size = 32;
  std::size_t resize_short = 0;
  double split_ratio = 0.9;
  std::uint64_t split_seed = 0;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

enum class Method : std::uint8_t { meta_sparse, random, dense_narrow, scratch, oneshot, imp, ticket };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct PruneConfig {
  Method method = Method::meta_sparse;
  double gamma = 0.2;
  // Target survivors: kappa when nonzero, otherwise kappa_fraction * prunable count.
  std::size_t kappa = 0;
  double kappa_fraction = 0.1;
  std::uint64_t prune_seed = 0;  // random pruning
  std::size_t imp_rounds = 1;    // MAML+IMP
  std::size_t probe_signals = 8;

  std::size_t target(std::size_t prunable) const;
  friend bool operator==(const PruneConfig&, const PruneConfig&) = default;
};

struct EvalConfig {
  std::size_t budget = 100;
  std::size_t n_signals = 100;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string split = "val";
  // How many of the sparsest levels the ordering experiment evaluates (0 = all).
  std::size_t levels = 3;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct TicketConfig {
  std::size_t train_steps = 50000;
  double lr = 1e-4;
  std::size_t rounds = 3;
  std::string image;  // empty: first training signal of the data block

  friend bool operator==(const TicketConfig&, const TicketConfig&) = default;
};

struct ExperimentConfig {
  std::string name = "custom";
  ArchSpec arch;
  DataConfig data;
  MetaConfig meta;
  PruneConfig prune;
  EvalConfig eval;
  TicketConfig ticket;
  std::vector<std::size_t> widths = WidthTable::standard().widths;
  std::string out_dir = "out";
  std::size_t log_every = 0;

  void validate() const;
  SparsitySchedule schedule() const;
  EvalOptions eval_options(const std::string& method) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Named presets: "full" (full-scale defaults), "ticket" (single-image lottery
// ticket setting), "desk" (CI scale), "desk-reptile".
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// JSON round trip. Parsing starts from the preset named by an optional
// "preset" key (default "full"), rejects unknown keys and validates.
std::string to_json(const ExperimentConfig& cfg, int indent = 2);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Loads the data block.
SignalSet load_data(const DataConfig& data);

}  // namespace msinr::app
