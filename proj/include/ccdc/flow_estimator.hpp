#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ccdc/imageops.hpp"
#include "ccdc/nn.hpp"
#include "ccdc/warp.hpp"

namespace ccdc {

/// Flow pyramid: 5 flows f_0..f_4, f_i at pyramid scale i (f_0 full size).
template <typename T>
using FlowPyramidT = std::vector<Tensor<T>>;

using FlowPyramid = FlowPyramidT<float>;

inline int pad_to_multiple(int v, int m) { return (v + m - 1) / m * m; }

/// FlowNetS-style estimator adapted to a 4-channel input ([target; ref_up]).
/// Contracting widths are the original ladder (64,128,256,512,512,1024)
/// scaled by `width_mult`; expanding deconv widths scale the same way.
/// Native predictions exist at strides 4..64; the finest three export as
/// scales 2..4 and scales 1, 0 are bilinear-upsampled from scale 2 with
/// displacement values doubled per level.
template <typename T>
struct FlowNetParams {
    nn::ConvLayer<T> conv1, conv2, conv3, conv3_1, conv4, conv4_1, conv5, conv5_1, conv6, conv6_1;
    nn::DeconvLayer<T> deconv5, deconv4, deconv3, deconv2;
    nn::DeconvLayer<T> up6to5, up5to4, up4to3, up3to2;
    nn::ConvLayer<T> predict6, predict5, predict4, predict3, predict2;
    double width_mult = 0.25;

    FlowNetParams() = default;
    FlowNetParams(double mult, Rng& rng) : width_mult(mult) {
        auto w = [mult](int base) {
            return std::max(1, static_cast<int>(std::lround(base * mult)));
        };
        const int w1 = w(64), w2 = w(128), w3 = w(256), w4 = w(512), w5 = w(512), w6 = w(1024);
        const int d5 = w(512), d4 = w(256), d3 = w(128), d2 = w(64);

        conv1 = nn::ConvLayer<T>(4, w1, 7, 2, 3, rng);
        conv2 = nn::ConvLayer<T>(w1, w2, 5, 2, 2, rng);
        conv3 = nn::ConvLayer<T>(w2, w3, 5, 2, 2, rng);
        conv3_1 = nn::ConvLayer<T>(w3, w3, 3, 1, 1, rng);
        conv4 = nn::ConvLayer<T>(w3, w4, 3, 2, 1, rng);
        conv4_1 = nn::ConvLayer<T>(w4, w4, 3, 1, 1, rng);
        conv5 = nn::ConvLayer<T>(w4, w5, 3, 2, 1, rng);
        conv5_1 = nn::ConvLayer<T>(w5, w5, 3, 1, 1, rng);
        conv6 = nn::ConvLayer<T>(w5, w6, 3, 2, 1, rng);
        conv6_1 = nn::ConvLayer<T>(w6, w6, 3, 1, 1, rng);

        const int n5 = w5 + d5 + 2, n4 = w4 + d4 + 2, n3 = w3 + d3 + 2;
        deconv5 = nn::DeconvLayer<T>(w6, d5, 4, 2, 1, rng);
        deconv4 = nn::DeconvLayer<T>(n5, d4, 4, 2, 1, rng);
        deconv3 = nn::DeconvLayer<T>(n4, d3, 4, 2, 1, rng);
        deconv2 = nn::DeconvLayer<T>(n3, d2, 4, 2, 1, rng);

        up6to5 = nn::DeconvLayer<T>(2, 2, 4, 2, 1, rng);
        up5to4 = nn::DeconvLayer<T>(2, 2, 4, 2, 1, rng);
        up4to3 = nn::DeconvLayer<T>(2, 2, 4, 2, 1, rng);
        up3to2 = nn::DeconvLayer<T>(2, 2, 4, 2, 1, rng);

        // Small-magnitude heads keep initial flows near zero, so early
        // training starts close to the identity warp.
        predict6 = nn::ConvLayer<T>(w6, 2, 3, 1, 1, rng, 0.01);
        predict5 = nn::ConvLayer<T>(n5, 2, 3, 1, 1, rng, 0.01);
        predict4 = nn::ConvLayer<T>(n4, 2, 3, 1, 1, rng, 0.01);
        predict3 = nn::ConvLayer<T>(n3, 2, 3, 1, 1, rng, 0.01);
        predict2 = nn::ConvLayer<T>(w2 + d2 + 2, 2, 3, 1, 1, rng, 0.01);
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        conv1.collect(prefix + ".conv1", out);
        conv2.collect(prefix + ".conv2", out);
        conv3.collect(prefix + ".conv3", out);
        conv3_1.collect(prefix + ".conv3_1", out);
        conv4.collect(prefix + ".conv4", out);
        conv4_1.collect(prefix + ".conv4_1", out);
        conv5.collect(prefix + ".conv5", out);
        conv5_1.collect(prefix + ".conv5_1", out);
        conv6.collect(prefix + ".conv6", out);
        conv6_1.collect(prefix + ".conv6_1", out);
        deconv5.collect(prefix + ".deconv5", out);
        deconv4.collect(prefix + ".deconv4", out);
        deconv3.collect(prefix + ".deconv3", out);
        deconv2.collect(prefix + ".deconv2", out);
        up6to5.collect(prefix + ".up6to5", out);
        up5to4.collect(prefix + ".up5to4", out);
        up4to3.collect(prefix + ".up4to3", out);
        up3to2.collect(prefix + ".up3to2", out);
        predict6.collect(prefix + ".predict6", out);
        predict5.collect(prefix + ".predict5", out);
        predict4.collect(prefix + ".predict4", out);
        predict3.collect(prefix + ".predict3", out);
        predict2.collect(prefix + ".predict2", out);
    }
};

/// Tape forward. Returns flows indexed by scale: [f_0, f_1, f_2, f_3, f_4].
template <typename T>
std::vector<ag::Var<T>> estimate_flow(ag::Tape<T>& tape, FlowNetParams<T>& params, ag::Var<T> target,
                                      ag::Var<T> ref_up) {
    const Tensor<T>& tv = tape.value(target);
    const Tensor<T>& rv = tape.value(ref_up);
    if (tv.rank() != 3 || tv.channels() != 1) {
        throw ShapeError("estimate_flow: target must be 1xHxW, got " + tv.shape_str());
    }
    if (rv.rank() != 3 || rv.channels() != 3) {
        throw ShapeError("estimate_flow: ref_up must be 3xHxW, got " + rv.shape_str());
    }
    if (tv.height() != rv.height() || tv.width() != rv.width()) {
        throw ShapeError("estimate_flow: size mismatch " + tv.shape_str() + " vs " + rv.shape_str());
    }
    const int h = tv.height(), w = tv.width();
    const int ph = pad_to_multiple(h, 64), pw = pad_to_multiple(w, 64);

    auto lrelu = [&](ag::Var<T> x) { return ag::leaky_relu(x, T(0.1)); };

    ag::Var<T> x = ag::concat_channels<T>(
        {nn::pad_reflect_br(target, ph, pw), nn::pad_reflect_br(ref_up, ph, pw)});

    ag::Var<T> c1 = lrelu(nn::apply(tape, params.conv1, x));
    ag::Var<T> c2 = lrelu(nn::apply(tape, params.conv2, c1));
    ag::Var<T> c3 = lrelu(nn::apply(tape, params.conv3_1, lrelu(nn::apply(tape, params.conv3, c2))));
    ag::Var<T> c4 = lrelu(nn::apply(tape, params.conv4_1, lrelu(nn::apply(tape, params.conv4, c3))));
    ag::Var<T> c5 = lrelu(nn::apply(tape, params.conv5_1, lrelu(nn::apply(tape, params.conv5, c4))));
    ag::Var<T> c6 = lrelu(nn::apply(tape, params.conv6_1, lrelu(nn::apply(tape, params.conv6, c5))));

    ag::Var<T> flow6 = nn::apply(tape, params.predict6, c6);
    ag::Var<T> cat5 = ag::concat_channels<T>(
        {c5, lrelu(nn::apply(tape, params.deconv5, c6)), nn::apply(tape, params.up6to5, flow6)});
    ag::Var<T> flow5 = nn::apply(tape, params.predict5, cat5);
    ag::Var<T> cat4 = ag::concat_channels<T>(
        {c4, lrelu(nn::apply(tape, params.deconv4, cat5)), nn::apply(tape, params.up5to4, flow5)});
    ag::Var<T> flow4 = nn::apply(tape, params.predict4, cat4);
    ag::Var<T> cat3 = ag::concat_channels<T>(
        {c3, lrelu(nn::apply(tape, params.deconv3, cat4)), nn::apply(tape, params.up4to3, flow4)});
    ag::Var<T> flow3 = nn::apply(tape, params.predict3, cat3);
    ag::Var<T> cat2 = ag::concat_channels<T>(
        {c2, lrelu(nn::apply(tape, params.deconv2, cat3)), nn::apply(tape, params.up3to2, flow3)});
    ag::Var<T> flow2 = nn::apply(tape, params.predict2, cat2);

    const auto shapes = gaussian_pyramid_shapes(h, w, 5);
    ag::Var<T> f4 = ag::crop_hw(flow4, shapes[4].first, shapes[4].second);
    ag::Var<T> f3 = ag::crop_hw(flow3, shapes[3].first, shapes[3].second);
    ag::Var<T> f2 = ag::crop_hw(flow2, shapes[2].first, shapes[2].second);
    ag::Var<T> f1 = nn::upsample_flow_2x(f2, shapes[1].first, shapes[1].second);
    ag::Var<T> f0 = nn::upsample_flow_2x(f1, shapes[0].first, shapes[0].second);
    return {f0, f1, f2, f3, f4};
}

/// Plain-tensor wrapper (inference tape).
template <typename T>
FlowPyramidT<T> estimate_flow(const Tensor<T>& target, const Tensor<T>& ref_up,
                              FlowNetParams<T>& params) {
    ag::Tape<T> tape(false);
    auto flows = estimate_flow(tape, params, tape.leaf(target), tape.leaf(ref_up));
    FlowPyramidT<T> out;
    for (auto& f : flows) out.push_back(tape.value(f));
    return out;
}

/// Per-level (mean, max) displacement magnitude in pixels at each level's
/// own scale; accumulation in double.
template <typename T>
std::vector<std::pair<double, double>> flow_magnitude_stats(const FlowPyramidT<T>& flows) {
    std::vector<std::pair<double, double>> stats;
    stats.reserve(flows.size());
    for (const Tensor<T>& f : flows) {
        check_flow(f, "flow_magnitude_stats");
        const std::size_t plane = static_cast<std::size_t>(f.height()) * f.width();
        double sum = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double fx = static_cast<double>(f.data[i]);
            const double fy = static_cast<double>(f.data[plane + i]);
            const double mag = std::sqrt(fx * fx + fy * fy);
            sum += mag;
            mx = std::max(mx, mag);
        }
        stats.emplace_back(sum / static_cast<double>(plane), mx);
    }
    return stats;
}

}  // namespace ccdc
