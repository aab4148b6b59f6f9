#pragma once

// Exact first- and second-order derivatives of the squared reconstruction
// loss of a masked INR.
//
// The loss of one signal is the raw sum over points and channels
//
//     L(theta) = sum_i || f(x_i; G * theta) - y_i ||^2
//
// where G is the mask's forward gate. Gradients are reverse-mode; Hessian
// vector products are forward-over-reverse (tangents pushed through the
// backward pass), so meta-gradients through unrolled inner SGD steps are exact.
// Every returned gradient is multiplied by the mask's update gate: pruned and
// frozen entries are exactly 0.

#include "msinr/network.hpp"
#include "msinr/signal.hpp"

#include <Eigen/Core>

#include <cstddef>

namespace msinr {

struct LossValue {
  double value = 0.0;      // raw sum, >= 0
  std::size_t count = 0;   // number of coordinate points summed over

  // Mean squared error over points and channels.
  double mse(std::size_t channels) const {
    return value / (static_cast<double>(count) * static_cast<double>(channels));
  }
};

struct LossAndGrad {
  LossValue loss;
  Eigen::VectorXd grad;
};

// Network outputs (out_dim x points) for `coords` (in_dim x points).
Eigen::MatrixXd predict(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                        const Eigen::MatrixXd& coords, Precision precision = Precision::f64);

LossValue forward_loss(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                       const Signal& signal, Precision precision = Precision::f64);

LossAndGrad loss_and_grad(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                          const Signal& signal, Precision precision = Precision::f64);

Eigen::VectorXd grad(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                     const Signal& signal, Precision precision = Precision::f64);

// H v where H is the Hessian of the masked loss at `params`. Entries outside
// the update gate are 0 and `direction` is gated before use.
Eigen::VectorXd hvp(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                    const Signal& signal, const Eigen::VectorXd& direction,
                    Precision precision = Precision::f64);

enum class MetaOrder : std::uint8_t {
  second,  // exact: differentiates through the inner updates
  first,   // drops the Hessian terms (first-order MAML)
};

struct InnerLoop {
  double lr = 0.0;          // inner SGD step size, >= 0
  std::size_t steps = 0;    // number of full-batch SGD steps
  MetaOrder order = MetaOrder::second;
};

struct MetaGradient {
  LossValue post_loss;      // loss after the inner steps
  Eigen::VectorXd grad;     // d post_loss / d params (pre-adaptation)
};

// Gradient of L(theta_t) with respect to theta_0, where
// theta_{k+1} = theta_k - lr * grad L(theta_k) on the masked network.
MetaGradient meta_gradient(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                           const Signal& signal, const InnerLoop& inner,
                           Precision precision = Precision::f64);

}  // namespace msinr
