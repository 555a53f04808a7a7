#include "ccdc/visibility.hpp"

#include <algorithm>

namespace ccdc {

TensorF render_visibility(const TensorF& v0) {
    check_gray(v0, "render_visibility");
    const int h = v0.height(), w = v0.width();
    TensorF out = TensorF::zeros({3, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i) {
        const float v = v0.data[i];
        const float mag = std::min(std::abs(v), 1.0f);
        if (v > 0) {
            out.data[i] = mag;  // red: invisible in the reference
        } else if (v < 0) {
            out.data[plane + i] = mag;  // green: invisible in the target
        }
    }
    return out;
}

}  // namespace ccdc
