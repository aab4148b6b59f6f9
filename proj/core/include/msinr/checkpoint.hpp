#pragma once

// Binary checkpoint of (ArchSpec, ParamVector, Mask). All integers and floats
// are little-endian:
//
//   "MSINR1"                      6 bytes magic
//   u8  kind                      0 = siren, 1 = ffn
//   u8  flags                     bit 0: biases prunable
//   u32 in_dim, out_dim, width, hidden_layers, fourier_dim
//   f64 omega0, sigma
//   u32 n_overrides, then n_overrides x f64
//   u64 seed
//   u64 d, then d x f32           parameter values
//   u64 n_prunable, then ceil(n_prunable / 8) bytes of mask bits, LSB first
//   u64 footer                    byte length of everything above
//
// Parameters are stored as 32-bit floats, so save -> load -> save is
// byte-identical while save -> load rounds 64-bit values once.

#include "msinr/models.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace msinr {

struct Checkpoint {
  ArchSpec arch;
  ParamVector params;
  Mask mask;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msinr
