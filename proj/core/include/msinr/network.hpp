#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace msinr {

inline constexpr std::size_t kNoBias = std::numeric_limits<std::size_t>::max();

enum class Precision : std::uint8_t { f32, f64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

enum class Activation : std::uint8_t { identity, sine, relu };

// Location of one layer inside the flat parameter vector. Weights are stored
// column-major as a rows x cols block (rows = fan-out, cols = fan-in).
struct LayerSlot {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t bias_offset = kNoBias;

  std::size_t weight_count() const { return rows * cols; }
  bool has_bias() const { return bias_offset != kNoBias; }
  std::size_t end() const { return has_bias() ? bias_offset + rows : offset + weight_count(); }

  friend bool operator==(const LayerSlot&, const LayerSlot&) = default;
};

// Affine layer followed by an activation: act(omega * (W x + b)). `omega` is
// only read for sine layers.
struct DenseLayer {
  LayerSlot slot;
  Activation activation = Activation::identity;
  double omega = 1.0;
};

// Fixed encoding x -> [sin(scale * B x), cos(scale * B x)]. B has no bias and
// is never trained.
struct FourierEncoding {
  LayerSlot slot;
  double scale = 1.0;

  std::size_t output_dim() const { return 2 * slot.rows; }
};

// The differentiable computation graph of an INR: an optional fixed encoding
// and a chain of dense layers. The last layer's output is the prediction.
struct Network {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::optional<FourierEncoding> encoding;
  std::vector<DenseLayer> layers;
  std::size_t param_count = 0;

  std::vector<LayerSlot> layout() const;

  // Throws DimensionError when layer shapes do not chain or the slots do not
  // tile [0, param_count) exactly.
  void validate() const;
};

struct ParamVector {
  Eigen::VectorXd values;
  std::vector<LayerSlot> layout;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Binary mask over the prunable subset of a parameter vector.
//
// Parameters are in one of three states: prunable (gated by a mask bit),
// non-prunable but trainable (always kept), or frozen (kept, never updated;
// the FFN Fourier matrix).
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t param_count, std::vector<std::size_t> prunable_map,
       std::vector<std::size_t> frozen = {});

  // Every entry prunable and set; nothing frozen.
  static Mask dense(std::size_t param_count);

  std::size_t param_count() const { return param_count_; }
  std::size_t prunable_count() const { return prunable_map_.size(); }
  std::size_t survivors() const;
  // Non-prunable entries that are still trained (e.g. exempt biases).
  std::size_t fixed_trainable_count() const;
  std::size_t frozen_count() const { return frozen_.size(); }

  bool kept(std::size_t k) const { return bits_[k] != 0; }
  void set(std::size_t k, bool keep) { bits_[k] = keep ? 1 : 0; }

  const std::vector<std::size_t>& prunable_map() const { return prunable_map_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  const std::vector<std::size_t>& frozen() const { return frozen_; }

  // 1 on kept and non-prunable entries, 0 on pruned ones: f(x; G * theta).
  Eigen::VectorXd forward_gate() const;
  // forward_gate() with frozen entries also cleared: where updates may land.
  Eigen::VectorXd update_gate() const;

  // Elementwise M' <= M over the same prunable map.
  bool subset_of(const Mask& other) const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t param_count_ = 0;
  std::vector<std::size_t> prunable_map_;
  std::vector<std::uint8_t> bits_;
  std::vector<std::size_t> frozen_;
};

// Sets every pruned entry of `values` to exactly 0.
void zero_pruned(const Mask& mask, Eigen::VectorXd& values);

// True when every pruned entry of `values` is exactly 0.
bool pruned_are_zero(const Mask& mask, const Eigen::VectorXd& values);

}  // namespace msinr
