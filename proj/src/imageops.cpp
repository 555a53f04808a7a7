#include "ccdc/imageops.hpp"

#include <algorithm>
#include <cmath>

#include "ccdc/image.hpp"

namespace ccdc {

TensorF rgb_to_yuv(const TensorF& rgb) {
    check_color(rgb, "rgb_to_yuv");
    const int h = rgb.height(), w = rgb.width();
    TensorF out({3, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* r = rgb.data.data();
    const float* g = r + plane;
    const float* b = g + plane;
    float* y = out.data.data();
    float* u = y + plane;
    float* v = u + plane;
    for (std::size_t i = 0; i < plane; ++i) {
        const float yy = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
        y[i] = yy;
        u[i] = 0.492f * (b[i] - yy);
        v[i] = 0.877f * (r[i] - yy);
    }
    return out;
}

TensorF yuv_to_rgb(const TensorF& yuv) {
    check_color(yuv, "yuv_to_rgb");
    const int h = yuv.height(), w = yuv.width();
    TensorF out({3, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* y = yuv.data.data();
    const float* u = y + plane;
    const float* v = u + plane;
    float* r = out.data.data();
    float* g = r + plane;
    float* b = g + plane;
    for (std::size_t i = 0; i < plane; ++i) {
        r[i] = y[i] + v[i] / 0.877f;
        b[i] = y[i] + u[i] / 0.492f;
        g[i] = (y[i] - 0.299f * r[i] - 0.114f * b[i]) / 0.587f;
    }
    return out;
}

TensorF luminance(const TensorF& rgb) {
    check_color(rgb, "luminance");
    const int h = rgb.height(), w = rgb.width();
    TensorF out({1, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* r = rgb.data.data();
    const float* g = r + plane;
    const float* b = g + plane;
    for (std::size_t i = 0; i < plane; ++i) {
        out.data[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    }
    return out;
}

namespace {

// Catmull-Rom kernel, a = -0.5.
template <typename T>
inline void cubic_weights(T t, T w[4]) {
    const T t2 = t * t, t3 = t2 * t;
    w[0] = T(-0.5) * t3 + t2 - T(0.5) * t;
    w[1] = T(1.5) * t3 - T(2.5) * t2 + T(1);
    w[2] = T(-1.5) * t3 + T(2) * t2 + T(0.5) * t;
    w[3] = T(0.5) * t3 - T(0.5) * t2;
}

}  // namespace

template <typename T>
Tensor<T> bicubic_resize_to(const Tensor<T>& img, int out_h, int out_w) {
    if (img.rank() != 3) throw ShapeError("bicubic_resize: expected CxHxW, got " + img.shape_str());
    if (out_h < 1 || out_w < 1) throw ShapeError("bicubic_resize: invalid output size");
    const int c = img.channels(), in_h = img.height(), in_w = img.width();
    if (out_h == in_h && out_w == in_w) return img;

    const double sy = static_cast<double>(in_h) / out_h;
    const double sx = static_cast<double>(in_w) / out_w;

    // Horizontal pass setup: per output column, base index and 4 weights.
    std::vector<int> x0(out_w);
    std::vector<T> wx(static_cast<std::size_t>(out_w) * 4);
    for (int ox = 0; ox < out_w; ++ox) {
        const double src = (ox + 0.5) * sx - 0.5;
        const double fl = std::floor(src);
        x0[ox] = static_cast<int>(fl) - 1;
        cubic_weights(static_cast<T>(src - fl), &wx[static_cast<std::size_t>(ox) * 4]);
    }
    std::vector<int> y0(out_h);
    std::vector<T> wy(static_cast<std::size_t>(out_h) * 4);
    for (int oy = 0; oy < out_h; ++oy) {
        const double src = (oy + 0.5) * sy - 0.5;
        const double fl = std::floor(src);
        y0[oy] = static_cast<int>(fl) - 1;
        cubic_weights(static_cast<T>(src - fl), &wy[static_cast<std::size_t>(oy) * 4]);
    }

    auto clampi = [](int v, int hi) { return std::min(std::max(v, 0), hi); };

    Tensor<T> tmp({c, in_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < in_h; ++y) {
            for (int ox = 0; ox < out_w; ++ox) {
                const T* w4 = &wx[static_cast<std::size_t>(ox) * 4];
                T acc = T(0);
                for (int k = 0; k < 4; ++k) {
                    acc += w4[k] * img.at3(ch, y, clampi(x0[ox] + k, in_w - 1));
                }
                tmp.at3(ch, y, ox) = acc;
            }
        }
    }
    Tensor<T> out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < out_h; ++oy) {
            const T* w4 = &wy[static_cast<std::size_t>(oy) * 4];
            for (int ox = 0; ox < out_w; ++ox) {
                T acc = T(0);
                for (int k = 0; k < 4; ++k) {
                    acc += w4[k] * tmp.at3(ch, clampi(y0[oy] + k, in_h - 1), ox);
                }
                out.at3(ch, oy, ox) = acc;
            }
        }
    }
    return out;
}

template Tensor<float> bicubic_resize_to<float>(const Tensor<float>&, int, int);
template Tensor<double> bicubic_resize_to<double>(const Tensor<double>&, int, int);

template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& img, double scale) {
    if (!(scale > 0.0)) throw ShapeError("bicubic_resize: scale must be positive");
    if (img.rank() != 3) throw ShapeError("bicubic_resize: expected CxHxW, got " + img.shape_str());
    const int oh = std::max(1, static_cast<int>(std::lround(img.height() * scale)));
    const int ow = std::max(1, static_cast<int>(std::lround(img.width() * scale)));
    return bicubic_resize_to(img, oh, ow);
}

template Tensor<float> bicubic_resize<float>(const Tensor<float>&, double);
template Tensor<double> bicubic_resize<double>(const Tensor<double>&, double);

std::vector<std::pair<int, int>> gaussian_pyramid_shapes(int h, int w, int levels) {
    if (levels < 1) throw ShapeError("gaussian_pyramid_shapes: levels must be >= 1");
    const int min_dim = 1 << (levels - 1);
    if (h < min_dim || w < min_dim) {
        throw ShapeError("gaussian_pyramid_shapes: " + std::to_string(h) + "x" + std::to_string(w) +
                         " too small for " + std::to_string(levels) + " levels");
    }
    std::vector<std::pair<int, int>> shapes;
    shapes.reserve(static_cast<std::size_t>(levels));
    int ch = h, cw = w;
    for (int i = 0; i < levels; ++i) {
        shapes.emplace_back(ch, cw);
        ch = (ch + 1) / 2;
        cw = (cw + 1) / 2;
    }
    return shapes;
}

}  // namespace ccdc
