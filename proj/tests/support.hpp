#pragma once

#include "msinr/grad_engine.hpp"
#include "msinr/models.hpp"
#include "msinr/random.hpp"
#include "msinr/signals.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>

namespace msinr::testing {

// f(x; theta) = theta * x: one identity layer, 1 x 1 weight, no bias.
inline Network linear1() {
  Network net;
  net.in_dim = 1;
  net.out_dim = 1;
  net.layers.push_back({LayerSlot{0, 1, 1, kNoBias}, Activation::identity, 1.0});
  net.param_count = 1;
  return net;
}

inline Signal point_signal(double x, double y) {
  Signal s;
  s.id = "point";
  s.height = 1;
  s.width = 1;
  s.coords = Eigen::MatrixXd::Constant(1, 1, x);
  s.targets = Eigen::MatrixXd::Constant(1, 1, y);
  return s;
}

// Random coordinates in [0,1]^in and targets in [0,1]^out.
inline Signal random_signal(Rng& rng, std::size_t in, std::size_t out, std::size_t points,
                            const std::string& id = "rand") {
  Signal s;
  s.id = id;
  s.height = 1;
  s.width = points;
  s.coords.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(points));
  s.targets.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(points));
  for (Eigen::Index i = 0; i < s.coords.size(); ++i) s.coords.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < s.targets.size(); ++i) s.targets.data()[i] = rng.uniform();
  return s;
}

// A small random architecture; SIRENs stay at modest omega so that central
// differences with h = 1e-5 are accurate to well below the tolerances.
inline ArchSpec random_arch(Rng& rng, ArchKind kind, std::size_t max_params) {
  for (;;) {
    ArchSpec a;
    a.kind = kind;
    a.in_dim = 1 + rng.below(2);
    a.out_dim = 1 + rng.below(3);
    a.width = 2 + 2 * rng.below(4);
    a.hidden_layers = 1 + rng.below(3);
    if (kind == ArchKind::ffn) a.hidden_layers += 1;
    a.omega0 = rng.uniform(1.0, 6.0);
    a.sigma = rng.uniform(0.5, 2.0);
    a.seed = rng.next();
    a.prune_biases = rng.below(4) != 0;
    if (param_count(a) <= max_params) return a;
  }
}

// Random params everywhere (init's scale is too small to exercise the
// nonlinearities) and a random mask.
inline ParamVector random_params(Rng& rng, const ArchSpec& a, double scale = 1.0) {
  ParamVector p = init(a);
  for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values[i] = rng.uniform(-scale, scale);
  return p;
}

inline Mask random_mask(Rng& rng, const ArchSpec& a, double keep = 0.8) {
  Mask m = full_mask(a);
  for (std::size_t k = 0; k < m.prunable_count(); ++k) m.set(k, rng.uniform() < keep);
  return m;
}

// Fourth-order central differences of a scalar function over the
// update-gated entries. The unrolled inner loops are curved enough that the
// plain two-point stencil's O(h^2) error shows up at 1e-4 relative.
inline Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, const Mask& mask, double h = 1e-5) {
  const Eigen::VectorXd gate = mask.update_gate();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  auto at = [&](Eigen::Index i, double dx) {
    Eigen::VectorXd y = x;
    y[i] += dx;
    return f(y);
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (gate[i] == 0.0) continue;
    g[i] = (8.0 * (at(i, h) - at(i, -h)) - (at(i, 2 * h) - at(i, -2 * h))) / (12.0 * h);
  }
  return g;
}

inline double rel_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-12);
}

}  // namespace msinr::testing
