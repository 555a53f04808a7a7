#include "ccdc/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace ccdc {

namespace {

double mse(const TensorF& a, const TensorF& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.numel());
}

std::vector<double> to_gray_double(const TensorF& img, const char* what) {
    if (img.rank() != 3 || (img.channels() != 1 && img.channels() != 3)) {
        throw ShapeError(std::string(what) + ": expected 1xHxW or 3xHxW, got " + img.shape_str());
    }
    const std::size_t plane = static_cast<std::size_t>(img.height()) * img.width();
    std::vector<double> out(plane);
    if (img.channels() == 1) {
        for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<double>(img.data[i]);
    } else {
        for (std::size_t i = 0; i < plane; ++i) {
            out[i] = 0.299 * img.data[i] + 0.587 * img.data[plane + i] + 0.114 * img.data[2 * plane + i];
        }
    }
    return out;
}

constexpr int kWin = 11;

std::array<double, kWin> gaussian_taps() {
    std::array<double, kWin> g{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (double& v : g) v /= sum;
    return g;
}

/// Separable valid-mode Gaussian filter: (H, W) -> (H-10, W-10).
std::vector<double> gauss_valid(const std::vector<double>& src, int h, int w) {
    static const std::array<double, kWin> g = gaussian_taps();
    const int ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(y) * w + x + k];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

}  // namespace

double psnr(const TensorF& a, const TensorF& b) {
    const double m = mse(a, b, "psnr");
    if (m <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

double nrmse(const TensorF& a, const TensorF& b) {
    const double m = mse(a, b, "nrmse");
    double ref = 0.0;
    for (float v : b.data) ref += static_cast<double>(v) * static_cast<double>(v);
    ref /= static_cast<double>(b.numel());
    if (ref <= 0.0) throw std::invalid_argument("nrmse: all-zero reference cannot normalize");
    return std::sqrt(m) / std::sqrt(ref);
}

double ssim(const TensorF& a, const TensorF& b) {
    if (!a.same_shape(b)) throw ShapeError("ssim: " + a.shape_str() + " vs " + b.shape_str());
    const int h = a.height(), w = a.width();
    if (h < kWin || w < kWin) {
        throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                         " smaller than the 11x11 window");
    }
    const std::vector<double> x = to_gray_double(a, "ssim");
    const std::vector<double> y = to_gray_double(b, "ssim");
    const std::size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mu_x = gauss_valid(x, h, w);
    const auto mu_y = gauss_valid(y, h, w);
    const auto m_xx = gauss_valid(xx, h, w);
    const auto m_yy = gauss_valid(yy, h, w);
    const auto m_xy = gauss_valid(xy, h, w);

    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double vx = m_xx[i] - mx * mx;
        const double vy = m_yy[i] - my * my;
        const double cov = m_xy[i] - mx * my;
        acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return acc / static_cast<double>(mu_x.size());
}

std::optional<double> lpips_hook(const TensorF& a, const TensorF& b, const LpipsPlugin& plugin) {
    if (!plugin) return std::nullopt;
    try {
        return plugin(a, b);
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace ccdc
