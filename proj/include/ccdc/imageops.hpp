#pragma once

#include <vector>

#include "ccdc/tensor.hpp"

namespace ccdc {

/// BT.601 full-range RGB <-> YUV. Y in [0,1]; U,V are zero-centered.
TensorF rgb_to_yuv(const TensorF& rgb);
TensorF yuv_to_rgb(const TensorF& yuv);

/// Y channel of an RGB image as 1xHxW (same weights as rgb_to_yuv).
TensorF luminance(const TensorF& rgb);

/// Catmull-Rom bicubic resize (a = -0.5) with half-pixel centers and edge
/// replication. A no-op resize returns the input bit-identically.
/// Works per channel on any CxHxW tensor.
template <typename T>
Tensor<T> bicubic_resize_to(const Tensor<T>& img, int out_h, int out_w);

/// Scale-factor form: output dims are round(dim * scale), at least 1.
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& img, double scale);

/// Downsample-pyramid level shapes: level i is (ceil(h/2^i), ceil(w/2^i)).
/// Requires h, w >= 2^(levels-1).
std::vector<std::pair<int, int>> gaussian_pyramid_shapes(int h, int w, int levels);

}  // namespace ccdc
