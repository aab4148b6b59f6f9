#pragma once

#include "msinr/grad_engine.hpp"
#include "msinr/network.hpp"
#include "msinr/signal.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace msinr {

// Every update below keeps the mask closed: pruned entries of the parameters
// (and of Adam's moments) are exactly 0 afterwards, frozen entries keep their
// values.

void sgd_step(Eigen::VectorXd& params, const Mask& mask, const Eigen::VectorXd& gradient, double lr);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::size_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(std::size_t size, double lr);
};

void adam_step(AdamState& state, Eigen::VectorXd& params, const Mask& mask,
               const Eigen::VectorXd& gradient);

// t full-batch SGD steps of the masked loss on one signal.
Eigen::VectorXd inner_adapt(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                            const Signal& signal, std::size_t steps, double lr,
                            Precision precision = Precision::f64);

enum class MetaKind : std::uint8_t { maml, fomaml, reptile };
enum class OuterOptimizer : std::uint8_t { adam, sgd };

std::string to_string(MetaKind k);
MetaKind parse_meta_kind(const std::string& s);
std::string to_string(OuterOptimizer o);
OuterOptimizer parse_outer_optimizer(const std::string& s);

struct MetaConfig {
  double outer_lr = 1e-5;            // beta
  double inner_lr = 1e-3;            // alpha
  std::size_t inner_steps = 2;       // t
  std::size_t outer_steps = 150000;  // tau (pretraining)
  std::size_t retrain_steps = 30000; // tau~ (after each pruning round)
  std::size_t batch = 3;             // signals per outer step
  MetaKind kind = MetaKind::maml;
  OuterOptimizer outer = OuterOptimizer::adam;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  std::size_t workers = 1;

  void validate() const;
  InnerLoop inner() const;

  friend bool operator==(const MetaConfig&, const MetaConfig&) = default;
};

// Mean over the batch of the post-adaptation loss divided by its point count.
struct OuterStepStats {
  double mean_post_loss = 0.0;
};

// One MAML outer step: averages the meta-gradients of the batch and applies
// Adam (or plain SGD with step outer_lr when cfg.outer == sgd).
OuterStepStats maml_outer_step(const Network& net, Eigen::VectorXd& params, const Mask& mask,
                               const std::vector<const Signal*>& batch, const MetaConfig& cfg,
                               AdamState& adam);

// One Reptile step: theta += outer_lr * mean_j(adapt_j(theta) - theta).
// Loss statistics are only computed when `with_stats` is set.
OuterStepStats reptile_outer_step(const Network& net, Eigen::VectorXd& params, const Mask& mask,
                                  const std::vector<const Signal*>& batch, const MetaConfig& cfg,
                                  bool with_stats = false);

struct MetaRunOptions {
  std::size_t steps = 0;
  // Selects an independent sampling stream (e.g. the pruning round) so that
  // consecutive phases do not replay the same batches.
  std::uint64_t stream = 0;
  std::size_t log_every = 0;  // 0 disables logging
  std::function<void(std::size_t step, double mean_post_loss)> on_log;
};

// Runs `options.steps` outer iterations with a fresh outer optimizer state,
// sampling cfg.batch training signals uniformly with replacement per step.
Eigen::VectorXd run_meta(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                         const std::vector<Signal>& train, const MetaConfig& cfg,
                         const MetaRunOptions& options);

// Mean post-adaptation loss per point over `signals`.
double meta_loss(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                 const std::vector<const Signal*>& signals, const MetaConfig& cfg);

// Full-batch Adam on one signal. losses[k] is the loss of the parameters after
// k steps, k = 0..steps (steps + 1 entries).
struct TrainResult {
  Eigen::VectorXd params;
  std::vector<LossValue> losses;
};

TrainResult train_adam(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                       const Signal& signal, std::size_t steps, double lr,
                       Precision precision = Precision::f64);

// Continues training with an existing Adam state (used across pruning events).
TrainResult train_adam(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                       const Signal& signal, std::size_t steps, AdamState& adam,
                       Precision precision = Precision::f64);

}  // namespace msinr
