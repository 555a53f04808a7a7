#pragma once

#include <string>

#include "ccdc/tensor.hpp"

namespace ccdc {

/// Channel-major float image in [0,1]. 3xHxW for color, 1xHxW for gray.
using ColorImage = TensorF;
using GrayImage = TensorF;

inline void check_color(const TensorF& img, const char* what) {
    if (img.rank() != 3 || img.channels() != 3) {
        throw ShapeError(std::string(what) + ": expected 3xHxW, got " + img.shape_str());
    }
}

inline void check_gray(const TensorF& img, const char* what) {
    if (img.rank() != 3 || img.channels() != 1) {
        throw ShapeError(std::string(what) + ": expected 1xHxW, got " + img.shape_str());
    }
}

/// 8-bit PNG -> float in [0,1] (value / 255, no gamma handling).
/// Grayscale files load as 1xHxW, everything else as 3xHxW (alpha dropped).
TensorF read_png(const std::string& path);

/// Float in [0,1] -> 8-bit PNG. Values are clamped, then round(v * 255).
/// Accepts 1xHxW or 3xHxW. Writes to a temp file and renames into place.
void write_png(const std::string& path, const TensorF& img);

}  // namespace ccdc
