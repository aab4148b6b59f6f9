#include "msinr/optim.hpp"

#include "msinr/error.hpp"
#include "msinr/parallel.hpp"
#include "msinr/random.hpp"

#include <cassert>
#include <cmath>

namespace msinr {
namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

void require_length(const Eigen::VectorXd& params, const Mask& mask, const Eigen::VectorXd& g) {
  if (static_cast<std::size_t>(params.size()) != mask.param_count() || g.size() != params.size())
    throw DimensionError("parameter, mask and gradient lengths differ");
}

}  // namespace

void sgd_step(Eigen::VectorXd& params, const Mask& mask, const Eigen::VectorXd& gradient, double lr) {
  require_length(params, mask, gradient);
  require_finite(gradient, "gradient");
  params.noalias() -= lr * gradient.cwiseProduct(mask.update_gate());
  zero_pruned(mask, params);
  require_finite(params, "parameters after SGD step");
}

AdamState AdamState::zeros(std::size_t size, double lr) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  s.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  s.lr = lr;
  return s;
}

void adam_step(AdamState& s, Eigen::VectorXd& params, const Mask& mask, const Eigen::VectorXd& gradient) {
  require_length(params, mask, gradient);
  if (s.m.size() != params.size() || s.v.size() != params.size())
    throw DimensionError("Adam state does not match parameter vector");
  require_finite(gradient, "gradient");
  const Eigen::VectorXd gate = mask.update_gate();
  const Eigen::VectorXd g = gradient.cwiseProduct(gate);
  s.m = (s.beta1 * s.m + (1.0 - s.beta1) * g).cwiseProduct(gate);
  s.v = (s.beta2 * s.v + (1.0 - s.beta2) * g.cwiseAbs2()).cwiseProduct(gate);
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  params.array() -= s.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + s.eps);
  zero_pruned(mask, params);
  require_finite(params, "parameters after Adam step");
}

Eigen::VectorXd inner_adapt(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                            const Signal& signal, std::size_t steps, double lr, Precision precision) {
  Eigen::VectorXd theta = params;
  for (std::size_t k = 0; k < steps; ++k) sgd_step(theta, mask, grad(net, theta, mask, signal, precision), lr);
  return theta;
}

std::string to_string(MetaKind k) {
  switch (k) {
    case MetaKind::maml: return "maml";
    case MetaKind::fomaml: return "fomaml";
    case MetaKind::reptile: return "reptile";
  }
  return "?";
}

MetaKind parse_meta_kind(const std::string& s) {
  if (s == "maml") return MetaKind::maml;
  if (s == "fomaml") return MetaKind::fomaml;
  if (s == "reptile") return MetaKind::reptile;
  throw ConfigError("unknown meta_kind '" + s + "' (expected maml, fomaml or reptile)");
}

std::string to_string(OuterOptimizer o) { return o == OuterOptimizer::adam ? "adam" : "sgd"; }

OuterOptimizer parse_outer_optimizer(const std::string& s) {
  if (s == "adam") return OuterOptimizer::adam;
  if (s == "sgd") return OuterOptimizer::sgd;
  throw ConfigError("unknown outer optimizer '" + s + "' (expected adam or sgd)");
}

void MetaConfig::validate() const {
  if (!(outer_lr > 0.0) || !std::isfinite(outer_lr)) throw ConfigError("outer_lr must be > 0");
  if (!(inner_lr > 0.0) || !std::isfinite(inner_lr)) throw ConfigError("inner_lr must be > 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (kind == MetaKind::reptile && inner_steps < 1) throw ConfigError("reptile needs inner_steps >= 1");
}

InnerLoop MetaConfig::inner() const {
  return {inner_lr, inner_steps, kind == MetaKind::fomaml ? MetaOrder::first : MetaOrder::second};
}

OuterStepStats maml_outer_step(const Network& net, Eigen::VectorXd& params, const Mask& mask,
                               const std::vector<const Signal*>& batch, const MetaConfig& cfg,
                               AdamState& adam) {
  if (batch.empty()) throw ConfigError("outer step needs at least one signal");
  std::vector<MetaGradient> parts(batch.size());
  const InnerLoop inner = cfg.inner();
  parallel_for(batch.size(), cfg.workers, [&](std::size_t j) {
    parts[j] = meta_gradient(net, params, mask, *batch[j], inner, cfg.precision);
  });

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(params.size());
  OuterStepStats stats;
  for (const auto& p : parts) {
    mean += p.grad;
    stats.mean_post_loss += p.post_loss.value / static_cast<double>(p.post_loss.count);
  }
  mean /= static_cast<double>(batch.size());
  stats.mean_post_loss /= static_cast<double>(batch.size());

  if (cfg.outer == OuterOptimizer::adam) {
    adam_step(adam, params, mask, mean);
  } else {
    sgd_step(params, mask, mean, cfg.outer_lr);
  }
  assert(pruned_are_zero(mask, params));
  return stats;
}

OuterStepStats reptile_outer_step(const Network& net, Eigen::VectorXd& params, const Mask& mask,
                                  const std::vector<const Signal*>& batch, const MetaConfig& cfg,
                                  bool with_stats) {
  if (batch.empty()) throw ConfigError("outer step needs at least one signal");
  if (cfg.inner_steps < 1) throw ConfigError("reptile needs inner_steps >= 1");
  std::vector<Eigen::VectorXd> adapted(batch.size());
  std::vector<double> post(batch.size(), 0.0);
  parallel_for(batch.size(), cfg.workers, [&](std::size_t j) {
    adapted[j] = inner_adapt(net, params, mask, *batch[j], cfg.inner_steps, cfg.inner_lr, cfg.precision);
    if (with_stats) {
      const auto l = forward_loss(net, adapted[j], mask, *batch[j], cfg.precision);
      post[j] = l.value / static_cast<double>(l.count);
    }
  });

  Eigen::VectorXd target = Eigen::VectorXd::Zero(params.size());
  OuterStepStats stats;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    target += adapted[j];
    stats.mean_post_loss += post[j];
  }
  target /= static_cast<double>(batch.size());
  stats.mean_post_loss /= static_cast<double>(batch.size());

  // (1 - beta) theta + beta * target hits the target exactly at beta = 1.
  const Eigen::VectorXd gate = mask.update_gate();
  const double beta = cfg.outer_lr;
  for (Eigen::Index i = 0; i < params.size(); ++i)
    if (gate[i] != 0.0) params[i] = (1.0 - beta) * params[i] + beta * target[i];
  zero_pruned(mask, params);
  require_finite(params, "parameters after Reptile step");
  return stats;
}

Eigen::VectorXd run_meta(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                         const std::vector<Signal>& train, const MetaConfig& cfg,
                         const MetaRunOptions& options) {
  if (options.steps == 0) return params;
  if (train.empty()) throw DataError("meta-training needs a non-empty training split");
  cfg.validate();
  Eigen::VectorXd theta = params;
  AdamState adam = AdamState::zeros(static_cast<std::size_t>(params.size()), cfg.outer_lr);
  Rng rng(mix_seed(cfg.seed, 0x6d657461ULL + options.stream));
  std::vector<const Signal*> batch(cfg.batch);
  for (std::size_t step = 1; step <= options.steps; ++step) {
    for (auto& b : batch) b = &train[rng.below(train.size())];
    const bool log = options.log_every != 0 && step % options.log_every == 0 && options.on_log;
    OuterStepStats stats;
    if (cfg.kind == MetaKind::reptile) {
      stats = reptile_outer_step(net, theta, mask, batch, cfg, log);
    } else {
      stats = maml_outer_step(net, theta, mask, batch, cfg, adam);
    }
    if (log) options.on_log(step, stats.mean_post_loss);
  }
  return theta;
}

double meta_loss(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                 const std::vector<const Signal*>& signals, const MetaConfig& cfg) {
  if (signals.empty()) return 0.0;
  std::vector<double> per(signals.size());
  parallel_for(signals.size(), cfg.workers, [&](std::size_t j) {
    const auto adapted = inner_adapt(net, params, mask, *signals[j], cfg.inner_steps, cfg.inner_lr, cfg.precision);
    const auto l = forward_loss(net, adapted, mask, *signals[j], cfg.precision);
    per[j] = l.value / static_cast<double>(l.count);
  });
  double sum = 0.0;
  for (double v : per) sum += v;
  return sum / static_cast<double>(signals.size());
}

TrainResult train_adam(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                       const Signal& signal, std::size_t steps, double lr, Precision precision) {
  AdamState adam = AdamState::zeros(static_cast<std::size_t>(params.size()), lr);
  return train_adam(net, params, mask, signal, steps, adam, precision);
}

TrainResult train_adam(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                       const Signal& signal, std::size_t steps, AdamState& adam, Precision precision) {
  TrainResult r;
  r.params = params;
  zero_pruned(mask, r.params);
  r.losses.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) {
    auto lg = loss_and_grad(net, r.params, mask, signal, precision);
    r.losses.push_back(lg.loss);
    adam_step(adam, r.params, mask, lg.grad);
  }
  r.losses.push_back(forward_loss(net, r.params, mask, signal, precision));
  return r;
}

}  // namespace msinr
