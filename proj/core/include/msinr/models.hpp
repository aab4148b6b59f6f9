#pragma once

#include "msinr/network.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace msinr {

enum class ArchKind : std::uint8_t { siren = 0, ffn = 1 };

std::string to_string(ArchKind k);
ArchKind parse_arch_kind(const std::string& s);

// Architecture of an INR.
//
// SIREN: hidden_layers sine layers sin(omega * (W x + b)) of the given width,
// then a linear output layer. FFN: a fixed Gaussian Fourier encoding
// [sin(2 pi B x), cos(2 pi B x)] followed by hidden_layers - 1 ReLU layers and
// a linear output layer; the encoding counts as the first hidden layer.
struct ArchSpec {
  ArchKind kind = ArchKind::siren;
  std::size_t in_dim = 2;
  std::size_t out_dim = 3;
  std::size_t width = 256;
  std::size_t hidden_layers = 4;
  double omega0 = 30.0;
  // Per sine layer frequency factors; empty means omega0 for every layer.
  std::vector<double> omega_overrides;
  double sigma = 20.0;
  // Rows of the Fourier matrix B; 0 selects width / 2 so the encoding is
  // exactly `width` wide.
  std::size_t fourier_dim = 0;
  std::uint64_t seed = 0;
  bool prune_biases = true;

  void validate() const;
  std::size_t effective_fourier_dim() const;
  double layer_omega(std::size_t sine_layer) const;
  ArchSpec with_width(std::size_t w) const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

Network build_network(const ArchSpec& arch);

// Total parameter count d (including frozen Fourier entries).
std::size_t param_count(const ArchSpec& arch);

// Standard random initialization, deterministic in arch.seed.
ParamVector init(const ArchSpec& arch);

// All-ones mask with the architecture's prunable map (Fourier matrix frozen,
// biases excluded when prune_biases is false).
Mask full_mask(const ArchSpec& arch);

// ||M||_0.
std::size_t surviving_count(const Mask& mask);

// Parameter counts as reported in experiment outputs.
struct ParamReport {
  std::size_t total = 0;      // d
  std::size_t surviving = 0;  // kept prunable + non-prunable trainable
  std::size_t frozen = 0;     // shared Fourier entries, reported separately
};

ParamReport report_counts(const Mask& mask);

// Network outputs (out_dim x points).
Eigen::MatrixXd forward(const ArchSpec& arch, const ParamVector& params, const Mask& mask,
                        const Eigen::MatrixXd& coords, Precision precision = Precision::f64);

}  // namespace msinr
