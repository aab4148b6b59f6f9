#include "msinr/network.hpp"

#include "msinr/error.hpp"

#include <algorithm>
#include <numeric>

namespace msinr {

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

std::vector<LayerSlot> Network::layout() const {
  std::vector<LayerSlot> out;
  if (encoding) out.push_back(encoding->slot);
  for (const auto& l : layers) out.push_back(l.slot);
  return out;
}

void Network::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  std::size_t fan_in = in_dim;
  if (encoding) {
    if (encoding->slot.cols != in_dim) throw DimensionError("encoding fan-in does not match in_dim");
    if (encoding->slot.has_bias()) throw DimensionError("encoding must not carry a bias");
    fan_in = encoding->output_dim();
  }
  for (const auto& l : layers) {
    if (l.slot.cols != fan_in) throw DimensionError("layer fan-in does not match previous layer");
    fan_in = l.slot.rows;
  }
  if (fan_in != out_dim) throw DimensionError("last layer fan-out does not match out_dim");

  // Slots (weights and biases separately) must tile [0, param_count).
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& s : layout()) {
    ranges.emplace_back(s.offset, s.offset + s.weight_count());
    if (s.has_bias()) ranges.emplace_back(s.bias_offset, s.bias_offset + s.rows);
  }
  std::sort(ranges.begin(), ranges.end());
  std::size_t cursor = 0;
  for (const auto& [b, e] : ranges) {
    if (b != cursor) throw DimensionError("parameter layout is not contiguous");
    cursor = e;
  }
  if (cursor != param_count) throw DimensionError("parameter layout does not cover param_count");
}

Mask::Mask(std::size_t param_count, std::vector<std::size_t> prunable_map,
           std::vector<std::size_t> frozen)
    : param_count_(param_count),
      prunable_map_(std::move(prunable_map)),
      bits_(prunable_map_.size(), 1),
      frozen_(std::move(frozen)) {
  if (!std::is_sorted(prunable_map_.begin(), prunable_map_.end()) ||
      std::adjacent_find(prunable_map_.begin(), prunable_map_.end()) != prunable_map_.end())
    throw DimensionError("prunable map must be strictly increasing");
  if (!prunable_map_.empty() && prunable_map_.back() >= param_count_)
    throw DimensionError("prunable index out of range");
  std::sort(frozen_.begin(), frozen_.end());
  for (auto f : frozen_) {
    if (f >= param_count_) throw DimensionError("frozen index out of range");
    if (std::binary_search(prunable_map_.begin(), prunable_map_.end(), f))
      throw DimensionError("frozen entry cannot be prunable");
  }
}

Mask Mask::dense(std::size_t param_count) {
  std::vector<std::size_t> all(param_count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return Mask(param_count, std::move(all));
}

std::size_t Mask::survivors() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t Mask::fixed_trainable_count() const {
  return param_count_ - prunable_map_.size() - frozen_.size();
}

Eigen::VectorXd Mask::forward_gate() const {
  Eigen::VectorXd g = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(param_count_));
  for (std::size_t k = 0; k < prunable_map_.size(); ++k)
    if (!bits_[k]) g[static_cast<Eigen::Index>(prunable_map_[k])] = 0.0;
  return g;
}

Eigen::VectorXd Mask::update_gate() const {
  Eigen::VectorXd g = forward_gate();
  for (auto f : frozen_) g[static_cast<Eigen::Index>(f)] = 0.0;
  return g;
}

bool Mask::subset_of(const Mask& other) const {
  if (prunable_map_ != other.prunable_map_) return false;
  for (std::size_t k = 0; k < bits_.size(); ++k)
    if (bits_[k] && !other.bits_[k]) return false;
  return true;
}

void zero_pruned(const Mask& mask, Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != mask.param_count())
    throw DimensionError("mask and parameter vector differ in length");
  const auto& map = mask.prunable_map();
  for (std::size_t k = 0; k < map.size(); ++k)
    if (!mask.kept(k)) values[static_cast<Eigen::Index>(map[k])] = 0.0;
}

bool pruned_are_zero(const Mask& mask, const Eigen::VectorXd& values) {
  const auto& map = mask.prunable_map();
  for (std::size_t k = 0; k < map.size(); ++k)
    if (!mask.kept(k) && values[static_cast<Eigen::Index>(map[k])] != 0.0) return false;
  return true;
}

}  // namespace msinr
