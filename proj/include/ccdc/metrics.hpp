#pragma once

#include <functional>
#include <optional>

#include "ccdc/tensor.hpp"

namespace ccdc {

struct MetricReport {
    double nrmse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> lpips;
    double runtime_seconds = 0.0;
};

/// 10*log10(1/MSE) for [0,1] images, capped at 99 dB (identical inputs hit
/// the cap exactly).
double psnr(const TensorF& a, const TensorF& b);

/// sqrt(MSE) normalized by the RMS of the reference b.
double nrmse(const TensorF& a, const TensorF& b);

/// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
/// L=1, valid-mode windows only. Color inputs are converted to luminance.
/// Computed in double precision.
double ssim(const TensorF& a, const TensorF& b);

/// Optional perceptual-metric plugin; never throws: failures and absent
/// plugins both yield an empty optional.
using LpipsPlugin = std::function<double(const TensorF&, const TensorF&)>;
std::optional<double> lpips_hook(const TensorF& a, const TensorF& b, const LpipsPlugin& plugin);

}  // namespace ccdc
