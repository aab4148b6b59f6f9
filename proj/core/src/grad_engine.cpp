#include "msinr/grad_engine.hpp"

#include "msinr/error.hpp"

#include <cmath>
#include <vector>

namespace msinr {
namespace {

template <class Real>
class Kernel {
 public:
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  // Activations of one forward pass. act[l] is the output of layer l, dact[l]
  // its derivative with respect to the pre-activation (empty for identity).
  struct Tape {
    Mat input;
    std::vector<Mat> act;
    std::vector<Mat> dact;
  };

  explicit Kernel(const Network& net) : net_(net) {}

  Tape forward(const Vec& w, const Eigen::MatrixXd& coords) const {
    Tape tape;
    tape.input = encode(w, coords);
    const auto n = net_.layers.size();
    tape.act.resize(n);
    tape.dact.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
      const auto& layer = net_.layers[l];
      const Mat& in = l == 0 ? tape.input : tape.act[l - 1];
      Mat z = weights(w, layer.slot) * in;
      if (layer.slot.has_bias()) z.colwise() += bias(w, layer.slot);
      switch (layer.activation) {
        case Activation::identity:
          tape.act[l] = std::move(z);
          break;
        case Activation::sine: {
          const Real omega = static_cast<Real>(layer.omega);
          z *= omega;
          tape.act[l] = z.array().sin().matrix();
          tape.dact[l] = (omega * z.array().cos()).matrix();
          break;
        }
        case Activation::relu:
          tape.act[l] = z.cwiseMax(Real(0));
          tape.dact[l] = (z.array() > Real(0)).template cast<Real>().matrix();
          break;
      }
    }
    if (!tape.act.back().allFinite()) throw NumericalError("non-finite network output");
    return tape;
  }

  static double loss(const Tape& tape, const Eigen::MatrixXd& targets) {
    const Mat& y = tape.act.back();
    if (y.rows() != targets.rows() || y.cols() != targets.cols())
      throw DimensionError("target shape does not match network output");
    const double v = (y.template cast<double>() - targets).squaredNorm();
    if (!std::isfinite(v)) throw NumericalError("non-finite loss");
    return v;
  }

  // Gradient with respect to the effective (already gated) parameters.
  Vec backward(const Vec& w, const Tape& tape, const Eigen::MatrixXd& targets) const {
    Vec g = Vec::Zero(w.size());
    Mat delta = Real(2) * (tape.act.back() - targets.template cast<Real>());
    for (std::size_t l = net_.layers.size(); l-- > 0;) {
      const auto& layer = net_.layers[l];
      if (layer.activation != Activation::identity) delta = delta.cwiseProduct(tape.dact[l]);
      const Mat& in = l == 0 ? tape.input : tape.act[l - 1];
      weights_mut(g, layer.slot).noalias() = delta * in.transpose();
      if (layer.slot.has_bias()) bias_mut(g, layer.slot) = delta.rowwise().sum();
      if (l > 0) delta = weights(w, layer.slot).transpose() * delta;
    }
    return g;
  }

  // Forward-over-reverse Hessian-vector product at the point recorded in
  // `tape`, direction `dw` (effective parameters).
  Vec hvp(const Vec& w, const Tape& tape, const Eigen::MatrixXd& targets, const Vec& dw) const {
    const auto n = net_.layers.size();
    std::vector<Mat> dz(n), da(n);
    for (std::size_t l = 0; l < n; ++l) {
      const auto& layer = net_.layers[l];
      const Mat& in = l == 0 ? tape.input : tape.act[l - 1];
      Mat t = weights(dw, layer.slot) * in;
      if (l > 0) t.noalias() += weights(w, layer.slot) * da[l - 1];
      if (layer.slot.has_bias()) t.colwise() += bias(dw, layer.slot);
      if (layer.activation == Activation::identity) {
        da[l] = t;
      } else {
        da[l] = t.cwiseProduct(tape.dact[l]);
      }
      dz[l] = std::move(t);
    }

    Vec hv = Vec::Zero(w.size());
    Mat delta = Real(2) * (tape.act.back() - targets.template cast<Real>());
    Mat ddelta = Real(2) * da.back();
    for (std::size_t l = n; l-- > 0;) {
      const auto& layer = net_.layers[l];
      switch (layer.activation) {
        case Activation::identity:
          break;
        case Activation::sine: {
          // phi''(z) = -omega^2 sin(omega z) = -omega^2 * act
          const Real w2 = static_cast<Real>(layer.omega * layer.omega);
          ddelta = (ddelta.array() * tape.dact[l].array() -
                    w2 * delta.array() * tape.act[l].array() * dz[l].array())
                       .matrix();
          delta = delta.cwiseProduct(tape.dact[l]);
          break;
        }
        case Activation::relu:
          ddelta = ddelta.cwiseProduct(tape.dact[l]);
          delta = delta.cwiseProduct(tape.dact[l]);
          break;
      }
      const Mat& in = l == 0 ? tape.input : tape.act[l - 1];
      auto hw = weights_mut(hv, layer.slot);
      hw.noalias() = ddelta * in.transpose();
      if (l > 0) hw.noalias() += delta * da[l - 1].transpose();
      if (layer.slot.has_bias()) bias_mut(hv, layer.slot) = ddelta.rowwise().sum();
      if (l > 0) {
        Mat next = weights(dw, layer.slot).transpose() * delta;
        next.noalias() += weights(w, layer.slot).transpose() * ddelta;
        ddelta = std::move(next);
        delta = weights(w, layer.slot).transpose() * delta;
      }
    }
    return hv;
  }

 private:
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;

  static CMap weights(const Vec& w, const LayerSlot& s) {
    return CMap(w.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                static_cast<Eigen::Index>(s.cols));
  }
  static MMap weights_mut(Vec& w, const LayerSlot& s) {
    return MMap(w.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                static_cast<Eigen::Index>(s.cols));
  }
  static Eigen::Map<const Vec> bias(const Vec& w, const LayerSlot& s) {
    return Eigen::Map<const Vec>(w.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows));
  }
  static Eigen::Map<Vec> bias_mut(Vec& w, const LayerSlot& s) {
    return Eigen::Map<Vec>(w.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows));
  }

  Mat encode(const Vec& w, const Eigen::MatrixXd& coords) const {
    if (static_cast<std::size_t>(coords.rows()) != net_.in_dim)
      throw DimensionError("coordinate dimension does not match network input");
    Mat x = coords.template cast<Real>();
    if (!net_.encoding) return x;
    const auto& enc = *net_.encoding;
    Mat proj = static_cast<Real>(enc.scale) * (weights(w, enc.slot) * x);
    const auto f = static_cast<Eigen::Index>(enc.slot.rows);
    Mat out(2 * f, x.cols());
    out.topRows(f) = proj.array().sin().matrix();
    out.bottomRows(f) = proj.array().cos().matrix();
    return out;
  }

  const Network& net_;
};

void check_sizes(const Network& net, const Eigen::VectorXd& params, const Mask& mask) {
  if (static_cast<std::size_t>(params.size()) != net.param_count)
    throw DimensionError("parameter vector length " + std::to_string(params.size()) +
                         " does not match network (" + std::to_string(net.param_count) + ")");
  if (mask.param_count() != net.param_count)
    throw DimensionError("mask does not match network parameter count");
}

void check_signal(const Network& net, const Signal& s) {
  if (static_cast<std::size_t>(s.coords.rows()) != net.in_dim)
    throw DimensionError("signal coordinate dimension does not match network");
  if (static_cast<std::size_t>(s.targets.rows()) != net.out_dim)
    throw DimensionError("signal channel count does not match network");
  if (s.coords.cols() != s.targets.cols())
    throw DimensionError("signal has mismatched coordinate and target counts");
  if (s.coords.cols() == 0) throw DimensionError("signal has no points");
}

template <class Real>
Eigen::Matrix<Real, Eigen::Dynamic, 1> effective(const Eigen::VectorXd& params,
                                                 const Eigen::VectorXd& gate) {
  return params.cwiseProduct(gate).template cast<Real>();
}

Eigen::VectorXd finite_or_throw(Eigen::VectorXd g, const char* what) {
  if (!g.allFinite()) throw NumericalError(std::string("non-finite ") + what);
  return g;
}

template <class Real>
LossAndGrad loss_and_grad_impl(const Network& net, const Eigen::VectorXd& params,
                               const Mask& mask, const Signal& signal) {
  Kernel<Real> k(net);
  const auto w = effective<Real>(params, mask.forward_gate());
  auto tape = k.forward(w, signal.coords);
  LossAndGrad out;
  out.loss = {Kernel<Real>::loss(tape, signal.targets), signal.points()};
  out.grad = finite_or_throw(
      k.backward(w, tape, signal.targets).template cast<double>().cwiseProduct(mask.update_gate()),
      "gradient");
  return out;
}

template <class Real>
Eigen::VectorXd hvp_impl(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                         const Signal& signal, const Eigen::VectorXd& direction) {
  Kernel<Real> k(net);
  const auto gate = mask.forward_gate();
  const auto w = effective<Real>(params, gate);
  const auto dw = effective<Real>(direction, gate);
  auto tape = k.forward(w, signal.coords);
  return finite_or_throw(
      k.hvp(w, tape, signal.targets, dw).template cast<double>().cwiseProduct(mask.update_gate()),
      "Hessian-vector product");
}

template <class Real>
MetaGradient meta_gradient_impl(const Network& net, const Eigen::VectorXd& params,
                                const Mask& mask, const Signal& signal, const InnerLoop& inner) {
  using K = Kernel<Real>;
  using Vec = typename K::Vec;
  K k(net);
  const Eigen::VectorXd gate = mask.forward_gate();
  const Eigen::VectorXd update = mask.update_gate();
  const bool second = inner.order == MetaOrder::second && inner.lr != 0.0;

  std::vector<Vec> points;
  std::vector<typename K::Tape> tapes;
  if (second) {
    points.reserve(inner.steps);
    tapes.reserve(inner.steps);
  }

  Eigen::VectorXd theta = params;
  for (std::size_t step = 0; step < inner.steps; ++step) {
    Vec w = effective<Real>(theta, gate);
    auto tape = k.forward(w, signal.coords);
    const Eigen::VectorXd g = finite_or_throw(
        k.backward(w, tape, signal.targets).template cast<double>().cwiseProduct(update),
        "inner gradient");
    theta -= inner.lr * g;
    if (second) {
      points.push_back(std::move(w));
      tapes.push_back(std::move(tape));
    }
  }

  MetaGradient out;
  {
    const Vec w = effective<Real>(theta, gate);
    const auto tape = k.forward(w, signal.coords);
    out.post_loss = {K::loss(tape, signal.targets), signal.points()};
    out.grad = k.backward(w, tape, signal.targets).template cast<double>().cwiseProduct(update);
  }

  // Reverse sweep through the inner updates:
  //   d theta_{k+1} / d theta_k = I - lr * T H(theta_k) G
  // so g_k = g_{k+1} - lr * T (H (G g_{k+1})).
  if (second) {
    for (std::size_t step = inner.steps; step-- > 0;) {
      const Vec dir = out.grad.cwiseProduct(gate).template cast<Real>();
      const Eigen::VectorXd hv =
          k.hvp(points[step], tapes[step], signal.targets, dir).template cast<double>();
      out.grad -= inner.lr * hv.cwiseProduct(update);
    }
  }
  out.grad = finite_or_throw(std::move(out.grad), "meta-gradient");
  return out;
}

}  // namespace

Eigen::MatrixXd predict(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                        const Eigen::MatrixXd& coords, Precision precision) {
  check_sizes(net, params, mask);
  const auto gate = mask.forward_gate();
  if (precision == Precision::f32) {
    Kernel<float> k(net);
    return k.forward(effective<float>(params, gate), coords).act.back().cast<double>();
  }
  Kernel<double> k(net);
  return k.forward(effective<double>(params, gate), coords).act.back();
}

LossValue forward_loss(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                       const Signal& signal, Precision precision) {
  check_sizes(net, params, mask);
  check_signal(net, signal);
  const auto gate = mask.forward_gate();
  if (precision == Precision::f32) {
    Kernel<float> k(net);
    return {Kernel<float>::loss(k.forward(effective<float>(params, gate), signal.coords),
                                signal.targets),
            signal.points()};
  }
  Kernel<double> k(net);
  return {Kernel<double>::loss(k.forward(effective<double>(params, gate), signal.coords),
                               signal.targets),
          signal.points()};
}

LossAndGrad loss_and_grad(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                          const Signal& signal, Precision precision) {
  check_sizes(net, params, mask);
  check_signal(net, signal);
  return precision == Precision::f32 ? loss_and_grad_impl<float>(net, params, mask, signal)
                                     : loss_and_grad_impl<double>(net, params, mask, signal);
}

Eigen::VectorXd grad(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                     const Signal& signal, Precision precision) {
  return loss_and_grad(net, params, mask, signal, precision).grad;
}

Eigen::VectorXd hvp(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                    const Signal& signal, const Eigen::VectorXd& direction, Precision precision) {
  check_sizes(net, params, mask);
  check_signal(net, signal);
  if (direction.size() != params.size())
    throw DimensionError("direction length does not match parameter vector");
  return precision == Precision::f32 ? hvp_impl<float>(net, params, mask, signal, direction)
                                     : hvp_impl<double>(net, params, mask, signal, direction);
}

MetaGradient meta_gradient(const Network& net, const Eigen::VectorXd& params, const Mask& mask,
                           const Signal& signal, const InnerLoop& inner, Precision precision) {
  check_sizes(net, params, mask);
  check_signal(net, signal);
  if (!(inner.lr >= 0.0) || !std::isfinite(inner.lr))
    throw ConfigError("inner learning rate must be finite and >= 0");
  return precision == Precision::f32
             ? meta_gradient_impl<float>(net, params, mask, signal, inner)
             : meta_gradient_impl<double>(net, params, mask, signal, inner);
}

}  // namespace msinr
