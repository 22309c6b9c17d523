#pragma once

#include "growflow/core/types.hpp"

namespace growflow::metrics {

inline constexpr double kPsnrCap = 99.0;  // returned for identical inputs

// 10 log10(1 / MSE) with peak 1.0 over all channels of the (masked) pixels.
// Throws ContractError on mismatched sizes or an empty mask.
double psnr(const Image& pred, const Image& gt, const Mask* mask = nullptr);

// Mean SSIM over all valid 11x11 windows (Gaussian, sigma 1.5), per channel
// then averaged. C1 = 0.01^2, C2 = 0.03^2. Requires images >= 11x11.
double ssim(const Image& pred, const Image& gt);

// As ssim(), additionally writing dSSIM/dpred into *d_pred when non-null.
double ssim_with_grad(const Image& pred, const Image& gt, Image* d_pred);

}  // namespace growflow::metrics
