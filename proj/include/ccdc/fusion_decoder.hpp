#pragma once

#include <array>
#include <string>
#include <vector>

#include "ccdc/encoders.hpp"
#include "ccdc/nn.hpp"
#include "ccdc/visibility.hpp"

namespace ccdc {

/// U-Net-style fusion decoder. Walks levels 4 -> 1; each stage concatenates
/// [carry, F_i^l, F~_i^c, V_i], applies two 3x3 convolutions (LeakyReLU 0.1)
/// producing that level's encoder width, then nearest-upsamples x2. The full
/// resolution head consumes [carry, v0, I1] (the latter two flag-dependent)
/// and squashes to 3 channels with a sigmoid.
template <typename T>
struct DecoderParams {
    std::array<nn::ConvLayer<T>, 4> conv_a;  // index 0 = level 4 stage
    std::array<nn::ConvLayer<T>, 4> conv_b;
    nn::ConvLayer<T> head1, head2;
    std::array<int, 4> ladder{};
    std::array<int, 4> stage_in{};  // expected concat widths, level 4 first
    int head_in = 0;
    bool use_visibility = true;
    bool use_target_in_head = true;

    DecoderParams() = default;
    DecoderParams(const std::array<int, 4>& ladder_, bool use_vis, bool use_target, Rng& rng)
        : ladder(ladder_), use_visibility(use_vis), use_target_in_head(use_target) {
        for (int j = 0; j < 4; ++j) {
            const int level = 4 - j;  // stage j fuses pyramid level `level`
            const int c_level = ladder[static_cast<std::size_t>(level - 1)];
            const int carry = j == 0 ? 0 : ladder[static_cast<std::size_t>(level)];
            const int in_c = carry + 2 * c_level + (use_vis ? c_level : 0);
            stage_in[static_cast<std::size_t>(j)] = in_c;
            conv_a[static_cast<std::size_t>(j)] = nn::ConvLayer<T>(in_c, c_level, 3, 1, 1, rng);
            conv_b[static_cast<std::size_t>(j)] = nn::ConvLayer<T>(c_level, c_level, 3, 1, 1, rng);
        }
        head_in = ladder[0] + (use_vis ? 1 : 0) + (use_target ? 1 : 0);
        head1 = nn::ConvLayer<T>(head_in, ladder[0], 3, 1, 1, rng);
        head2 = nn::ConvLayer<T>(ladder[0], 3, 3, 1, 1, rng);
        for (int j = 0; j < 4; ++j) {
            if (conv_a[static_cast<std::size_t>(j)].w.shape[1] != stage_in[static_cast<std::size_t>(j)]) {
                throw ConfigError("decoder: stage channel bookkeeping broken");
            }
        }
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        for (int j = 0; j < 4; ++j) {
            const std::string s = prefix + ".stage" + std::to_string(4 - j);
            conv_a[static_cast<std::size_t>(j)].collect(s + ".a", out);
            conv_b[static_cast<std::size_t>(j)].collect(s + ".b", out);
        }
        head1.collect(prefix + ".head1", out);
        head2.collect(prefix + ".head2", out);
    }
};

/// In-graph visibility inputs for fuse(); `enabled` false means the ablation
/// sentinel (no tensors).
template <typename T>
struct VisVars {
    bool enabled = false;
    ag::Var<T> v0;
    std::vector<ag::Var<T>> levels;  // v1..v4
};

template <typename T>
ag::Var<T> fuse(ag::Tape<T>& tape, DecoderParams<T>& params, const std::vector<ag::Var<T>>& target_feats,
                const std::vector<ag::Var<T>>& warped_color_feats, const VisVars<T>& vis,
                ag::Var<T> target_img) {
    if (target_feats.size() != 4 || warped_color_feats.size() != 4) {
        throw ShapeError("fuse: expected 4 pyramid levels");
    }
    if (vis.enabled != params.use_visibility) {
        throw ConfigError("fuse: visibility state does not match decoder construction");
    }
    if (vis.enabled && vis.levels.size() != 4) throw ShapeError("fuse: expected 4 visibility levels");
    const Tensor<T>& timg = tape.value(target_img);
    if (timg.rank() != 3 || timg.channels() != 1) {
        throw ShapeError("fuse: target image must be 1xHxW, got " + timg.shape_str());
    }

    auto lrelu = [&](ag::Var<T> x) { return ag::leaky_relu(x, T(0.1)); };

    ag::Var<T> carry;
    for (int j = 0; j < 4; ++j) {
        const int level = 4 - j;
        std::vector<ag::Var<T>> parts;
        if (carry.defined()) parts.push_back(carry);
        parts.push_back(target_feats[static_cast<std::size_t>(level - 1)]);
        parts.push_back(warped_color_feats[static_cast<std::size_t>(level - 1)]);
        if (vis.enabled) parts.push_back(vis.levels[static_cast<std::size_t>(level - 1)]);
        ag::Var<T> x = ag::concat_channels(parts);
        if (tape.value(x).channels() != params.stage_in[static_cast<std::size_t>(j)]) {
            throw ShapeError("fuse: stage " + std::to_string(level) + " got " +
                             std::to_string(tape.value(x).channels()) + " channels, decoder built for " +
                             std::to_string(params.stage_in[static_cast<std::size_t>(j)]));
        }
        x = lrelu(nn::apply(tape, params.conv_a[static_cast<std::size_t>(j)], x));
        x = lrelu(nn::apply(tape, params.conv_b[static_cast<std::size_t>(j)], x));
        const Tensor<T>& next = level >= 2 ? tape.value(target_feats[static_cast<std::size_t>(level - 2)])
                                           : timg;
        carry = nn::upsample_nearest2x(x, next.height(), next.width());
    }

    std::vector<ag::Var<T>> head_parts{carry};
    if (params.use_visibility) head_parts.push_back(vis.v0);
    if (params.use_target_in_head) head_parts.push_back(target_img);
    ag::Var<T> h = head_parts.size() == 1 ? carry : ag::concat_channels(head_parts);
    h = lrelu(nn::apply(tape, params.head1, h));
    return ag::sigmoid(nn::apply(tape, params.head2, h));
}

/// Plain-tensor wrapper (inference tape).
template <typename T>
Tensor<T> fuse(const Pyramid<T>& target_feats, const Pyramid<T>& warped_color_feats,
               const VisibilityMapsT<T>& vis, const Tensor<T>& target_img, DecoderParams<T>& params) {
    ag::Tape<T> tape(false);
    std::vector<ag::Var<T>> tf, wf;
    for (const auto& t : target_feats) tf.push_back(tape.leaf(t));
    for (const auto& t : warped_color_feats) wf.push_back(tape.leaf(t));
    VisVars<T> vv;
    vv.enabled = vis.enabled;
    if (vis.enabled) {
        vv.v0 = tape.leaf(vis.v0);
        for (const auto& t : vis.feature_levels) vv.levels.push_back(tape.leaf(t));
    }
    return tape.value(fuse(tape, params, tf, wf, vv, tape.leaf(target_img)));
}

}  // namespace ccdc
