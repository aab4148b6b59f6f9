#include "msinr/models.hpp"

#include "msinr/error.hpp"
#include "msinr/grad_engine.hpp"
#include "msinr/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace msinr {

std::string to_string(ArchKind k) { return k == ArchKind::siren ? "siren" : "ffn"; }

ArchKind parse_arch_kind(const std::string& s) {
  if (s == "siren") return ArchKind::siren;
  if (s == "ffn") return ArchKind::ffn;
  throw ConfigError("unknown architecture kind '" + s + "' (expected siren or ffn)");
}

void ArchSpec::validate() const {
  if (in_dim < 1 || out_dim < 1) throw ConfigError("in_dim and out_dim must be >= 1");
  if (width < 1) throw ConfigError("width must be >= 1");
  if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
  if (kind == ArchKind::siren) {
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ConfigError("omega0 must be > 0");
    if (!omega_overrides.empty() && omega_overrides.size() != hidden_layers)
      throw ConfigError("omega_overrides must list one value per hidden layer");
    for (double w : omega_overrides)
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("omega overrides must be > 0");
  } else {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be > 0");
    if (fourier_dim == 0 && width % 2 != 0)
      throw ConfigError("FFN width must be even when fourier_dim is derived from it");
    if (effective_fourier_dim() < 1) throw ConfigError("fourier_dim must be >= 1");
  }
}

std::size_t ArchSpec::effective_fourier_dim() const {
  return fourier_dim != 0 ? fourier_dim : width / 2;
}

double ArchSpec::layer_omega(std::size_t sine_layer) const {
  return omega_overrides.empty() ? omega0 : omega_overrides.at(sine_layer);
}

ArchSpec ArchSpec::with_width(std::size_t w) const {
  ArchSpec a = *this;
  a.width = w;
  return a;
}

Network build_network(const ArchSpec& arch) {
  arch.validate();
  Network net;
  net.in_dim = arch.in_dim;
  net.out_dim = arch.out_dim;
  std::size_t cursor = 0;
  auto slot = [&cursor](std::size_t rows, std::size_t cols, bool bias) {
    LayerSlot s;
    s.offset = cursor;
    s.rows = rows;
    s.cols = cols;
    cursor += rows * cols;
    if (bias) {
      s.bias_offset = cursor;
      cursor += rows;
    }
    return s;
  };

  std::size_t fan_in = arch.in_dim;
  if (arch.kind == ArchKind::siren) {
    for (std::size_t l = 0; l < arch.hidden_layers; ++l) {
      net.layers.push_back({slot(arch.width, fan_in, true), Activation::sine, arch.layer_omega(l)});
      fan_in = arch.width;
    }
  } else {
    const auto f = arch.effective_fourier_dim();
    net.encoding = FourierEncoding{slot(f, arch.in_dim, false), 2.0 * std::numbers::pi};
    fan_in = 2 * f;
    for (std::size_t l = 1; l < arch.hidden_layers; ++l) {
      net.layers.push_back({slot(arch.width, fan_in, true), Activation::relu, 1.0});
      fan_in = arch.width;
    }
  }
  net.layers.push_back({slot(arch.out_dim, fan_in, true), Activation::identity, 1.0});
  net.param_count = cursor;
  net.validate();
  return net;
}

std::size_t param_count(const ArchSpec& arch) { return build_network(arch).param_count; }

ParamVector init(const ArchSpec& arch) {
  const Network net = build_network(arch);
  ParamVector p;
  p.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.param_count));
  p.layout = net.layout();
  Rng rng(arch.seed);

  auto fill_uniform = [&](const LayerSlot& s, double bound) {
    for (std::size_t i = 0; i < s.weight_count(); ++i)
      p.values[static_cast<Eigen::Index>(s.offset + i)] = rng.uniform(-bound, bound);
    if (s.has_bias())
      for (std::size_t i = 0; i < s.rows; ++i)
        p.values[static_cast<Eigen::Index>(s.bias_offset + i)] = rng.uniform(-bound, bound);
  };

  if (net.encoding) {
    const auto& s = net.encoding->slot;
    for (std::size_t i = 0; i < s.weight_count(); ++i)
      p.values[static_cast<Eigen::Index>(s.offset + i)] = arch.sigma * rng.normal();
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const double n = static_cast<double>(layer.slot.cols);
    double bound = 0.0;
    if (arch.kind == ArchKind::siren) {
      // First layer spans the input range; deeper layers are scaled so that
      // omega * (W x + b) keeps unit-variance arcsine-distributed inputs.
      const double omega = layer.activation == Activation::sine ? layer.omega : arch.omega0;
      bound = l == 0 ? 1.0 / n : std::sqrt(6.0 / n) / omega;
    } else {
      bound = 1.0 / std::sqrt(n);
    }
    fill_uniform(layer.slot, bound);
  }
  return p;
}

Mask full_mask(const ArchSpec& arch) {
  const Network net = build_network(arch);
  std::vector<std::size_t> prunable;
  std::vector<std::size_t> frozen;
  if (net.encoding) {
    const auto& s = net.encoding->slot;
    for (std::size_t i = 0; i < s.weight_count(); ++i) frozen.push_back(s.offset + i);
  }
  for (const auto& layer : net.layers) {
    const auto& s = layer.slot;
    for (std::size_t i = 0; i < s.weight_count(); ++i) prunable.push_back(s.offset + i);
    if (s.has_bias() && arch.prune_biases)
      for (std::size_t i = 0; i < s.rows; ++i) prunable.push_back(s.bias_offset + i);
  }
  std::sort(prunable.begin(), prunable.end());
  return Mask(net.param_count, std::move(prunable), std::move(frozen));
}

std::size_t surviving_count(const Mask& mask) { return mask.survivors(); }

ParamReport report_counts(const Mask& mask) {
  ParamReport r;
  r.total = mask.param_count();
  r.surviving = mask.survivors() + mask.fixed_trainable_count();
  r.frozen = mask.frozen_count();
  return r;
}

Eigen::MatrixXd forward(const ArchSpec& arch, const ParamVector& params, const Mask& mask,
                        const Eigen::MatrixXd& coords, Precision precision) {
  return predict(build_network(arch), params.values, mask, coords, precision);
}

}  // namespace msinr
