#pragma once

#include <array>
#include <string>
#include <vector>

#include "ccdc/nn.hpp"

namespace ccdc {

/// Feature pyramid: 4 post-activation levels at strides 2, 4, 8, 16 with the
/// configured channel ladder.
template <typename T>
using Pyramid = std::vector<Tensor<T>>;

using FeaturePyramid = Pyramid<float>;

/// 4-stage strided encoder: each stage is a stride-2 3x3 convolution,
/// LeakyReLU(0.1), a stride-1 3x3 convolution, LeakyReLU(0.1).
template <typename T>
struct EncoderParams {
    std::array<nn::ConvLayer<T>, 4> down;
    std::array<nn::ConvLayer<T>, 4> refine;
    int in_channels = 0;
    std::array<int, 4> ladder{};

    EncoderParams() = default;
    EncoderParams(int in_c, const std::array<int, 4>& ladder_, Rng& rng)
        : in_channels(in_c), ladder(ladder_) {
        int c = in_c;
        for (int i = 0; i < 4; ++i) {
            down[static_cast<std::size_t>(i)] = nn::ConvLayer<T>(c, ladder[static_cast<std::size_t>(i)], 3, 2, 1, rng);
            refine[static_cast<std::size_t>(i)] =
                nn::ConvLayer<T>(ladder[static_cast<std::size_t>(i)], ladder[static_cast<std::size_t>(i)], 3, 1, 1, rng);
            c = ladder[static_cast<std::size_t>(i)];
        }
    }

    void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
        for (int i = 0; i < 4; ++i) {
            const std::string s = prefix + ".stage" + std::to_string(i + 1);
            down[static_cast<std::size_t>(i)].collect(s + ".down", out);
            refine[static_cast<std::size_t>(i)].collect(s + ".refine", out);
        }
    }
};

template <typename T>
std::vector<ag::Var<T>> encode(ag::Tape<T>& tape, EncoderParams<T>& params, ag::Var<T> img) {
    const Tensor<T>& v = tape.value(img);
    if (v.rank() != 3 || v.channels() != params.in_channels) {
        throw ShapeError("encode: expected " + std::to_string(params.in_channels) + "xHxW input, got " +
                         v.shape_str());
    }
    std::vector<ag::Var<T>> levels;
    levels.reserve(4);
    ag::Var<T> x = img;
    for (int i = 0; i < 4; ++i) {
        x = ag::leaky_relu(nn::apply(tape, params.down[static_cast<std::size_t>(i)], x), T(0.1));
        x = ag::leaky_relu(nn::apply(tape, params.refine[static_cast<std::size_t>(i)], x), T(0.1));
        levels.push_back(x);
    }
    return levels;
}

/// Plain-tensor wrappers (inference tape, no gradient bookkeeping).
template <typename T>
Pyramid<T> encode_luminance(const Tensor<T>& img, EncoderParams<T>& params) {
    if (img.rank() != 3 || img.channels() != 1) {
        throw ShapeError("encode_luminance: expected 1xHxW, got " + img.shape_str());
    }
    ag::Tape<T> tape(false);
    auto levels = encode(tape, params, tape.leaf(img));
    Pyramid<T> out;
    for (auto& l : levels) out.push_back(tape.value(l));
    return out;
}

template <typename T>
Pyramid<T> encode_color(const Tensor<T>& img, EncoderParams<T>& params) {
    if (img.rank() != 3 || img.channels() != 3) {
        throw ShapeError("encode_color: expected 3xHxW, got " + img.shape_str());
    }
    ag::Tape<T> tape(false);
    auto levels = encode(tape, params, tape.leaf(img));
    Pyramid<T> out;
    for (auto& l : levels) out.push_back(tape.value(l));
    return out;
}

}  // namespace ccdc
