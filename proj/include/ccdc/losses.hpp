#pragma once

#include <cmath>

#include "ccdc/autograd.hpp"
#include "ccdc/tensor.hpp"
#include "ccdc/warp.hpp"

namespace ccdc {

inline constexpr double kCharbonnierEps = 1e-3;

struct LossReport {
    double l_warp = 0.0;
    double l_color = 0.0;
    double total = 0.0;
    double lambda_warp = 1.0;
};

/// Elementwise Charbonnier penalty sqrt(x^2 + 1e-6).
template <typename T>
Tensor<T> charbonnier(const Tensor<T>& x) {
    Tensor<T> out = x;
    const T eps2 = static_cast<T>(kCharbonnierEps * kCharbonnierEps);
    for (T& v : out.data) v = std::sqrt(v * v + eps2);
    return out;
}

/// 1/2 * mean squared error between warp(ref_up, f0) and gt; the reduction
/// runs in double.
template <typename T>
double warping_loss(const Tensor<T>& ref_up, const Tensor<T>& gt, const Tensor<T>& f0) {
    if (!ref_up.same_shape(gt)) {
        throw ShapeError("warping_loss: " + ref_up.shape_str() + " vs " + gt.shape_str());
    }
    const Tensor<T> warped = bilinear_warp(ref_up, f0);
    double acc = 0.0;
    for (std::size_t i = 0; i < warped.data.size(); ++i) {
        const double d = static_cast<double>(warped.data[i]) - static_cast<double>(gt.data[i]);
        acc += d * d;
    }
    return 0.5 * acc / static_cast<double>(warped.numel());
}

/// Mean Charbonnier penalty of pred - gt; reduction in double.
template <typename T>
double colorization_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
    if (!pred.same_shape(gt)) {
        throw ShapeError("colorization_loss: " + pred.shape_str() + " vs " + gt.shape_str());
    }
    const double eps2 = kCharbonnierEps * kCharbonnierEps;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(gt.data[i]);
        acc += std::sqrt(d * d + eps2);
    }
    return acc / static_cast<double>(pred.numel());
}

inline LossReport total_loss(double l_color, double l_warp, double lambda_warp) {
    if (lambda_warp < 0) throw std::invalid_argument("total_loss: lambda_warp must be >= 0");
    LossReport r;
    r.l_color = l_color;
    r.l_warp = l_warp;
    r.lambda_warp = lambda_warp;
    r.total = l_color + lambda_warp * l_warp;
    return r;
}

// In-graph builders for training.

template <typename T>
ag::Var<T> warping_loss_node(ag::Var<T> ref_up, ag::Var<T> gt, ag::Var<T> f0) {
    ag::Var<T> diff = ag::sub(warp(ref_up, f0), gt);
    return ag::scale(ag::mean_all(ag::square(diff)), T(0.5));
}

template <typename T>
ag::Var<T> colorization_loss_node(ag::Var<T> pred, ag::Var<T> gt) {
    return ag::mean_all(ag::charbonnier(ag::sub(pred, gt), static_cast<T>(kCharbonnierEps)));
}

}  // namespace ccdc
