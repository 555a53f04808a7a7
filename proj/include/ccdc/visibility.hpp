#pragma once

#include <string>
#include <vector>

#include "ccdc/autograd.hpp"
#include "ccdc/image.hpp"
#include "ccdc/tensor.hpp"

namespace ccdc {

/// Signed, unclamped visibility maps: v0 = warped reference luminance minus
/// target (1xHxW), v1..v4 = warped luminance features minus target features.
template <typename T>
struct VisibilityMapsT {
    Tensor<T> v0;
    std::vector<Tensor<T>> feature_levels;  // v1..v4
    bool enabled = true;                    // false: ablation sentinel, tensors empty
};

using VisibilityMaps = VisibilityMapsT<float>;

/// V0: elementwise signed difference, positive where the warped reference is
/// brighter than the target.
template <typename T>
Tensor<T> image_visibility(const Tensor<T>& warped_ref_lum, const Tensor<T>& target) {
    if (warped_ref_lum.rank() != 3 || warped_ref_lum.channels() != 1) {
        throw ShapeError("image_visibility: expected 1xHxW, got " + warped_ref_lum.shape_str());
    }
    if (!warped_ref_lum.same_shape(target)) {
        throw ShapeError("image_visibility: " + warped_ref_lum.shape_str() + " vs " + target.shape_str());
    }
    Tensor<T> out = warped_ref_lum;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= target.data[i];
    return out;
}

/// V1..V4: per-level signed difference between warped reference-luminance
/// features and target features.
template <typename T>
std::vector<Tensor<T>> feature_visibility(const std::vector<Tensor<T>>& warped_ref_feat,
                                          const std::vector<Tensor<T>>& target_feat) {
    if (warped_ref_feat.size() != target_feat.size()) {
        throw ShapeError("feature_visibility: level count mismatch");
    }
    std::vector<Tensor<T>> out;
    out.reserve(warped_ref_feat.size());
    for (std::size_t i = 0; i < warped_ref_feat.size(); ++i) {
        if (!warped_ref_feat[i].same_shape(target_feat[i])) {
            throw ShapeError("feature_visibility: level " + std::to_string(i + 1) + " shape " +
                             warped_ref_feat[i].shape_str() + " vs " + target_feat[i].shape_str());
        }
        Tensor<T> d = warped_ref_feat[i];
        for (std::size_t j = 0; j < d.data.size(); ++j) d.data[j] -= target_feat[i].data[j];
        out.push_back(std::move(d));
    }
    return out;
}

/// Diagnostic rendering of v0: positive differences in red, negative in
/// green, intensity proportional to |v| (clipped at 1).
TensorF render_visibility(const TensorF& v0);

}  // namespace ccdc
