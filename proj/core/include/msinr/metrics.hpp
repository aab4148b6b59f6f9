#pragma once

#include "msinr/grad_engine.hpp"

#include <vector>

namespace msinr {

inline constexpr double kMinMse = 1e-12;

// 10 log10(max^2 / mse); mse below 1e-12 is clamped (120 dB for max = 1).
double psnr(double mse, double max_val = 1.0);

// PSNR of a raw summed loss over `channels` channels.
double psnr_of(const LossValue& loss, std::size_t channels, double max_val = 1.0);

std::vector<double> psnr_trajectory(const std::vector<LossValue>& losses, std::size_t channels);

}  // namespace msinr
