#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ccdc/autograd.hpp"
#include "ccdc/tensor.hpp"

namespace ccdc {

/// A flow field is a 2xHxW tensor: channel 0 = horizontal displacement in
/// pixels at the flow's own scale, channel 1 = vertical.
template <typename T>
void check_flow(const Tensor<T>& flow, const char* what) {
    if (flow.rank() != 3 || flow.channels() != 2) {
        throw ShapeError(std::string(what) + ": flow must be 2xHxW, got " + flow.shape_str());
    }
    for (T v : flow.data) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw std::invalid_argument(std::string(what) + ": non-finite flow value");
        }
    }
}

namespace warp_detail {

template <typename T>
struct SamplePoint {
    int x0, x1, y0, y1;
    T wx, wy;
    bool inx, iny;  // source coordinate strictly inside (gradient flows to flow)
};

template <typename T>
inline SamplePoint<T> resolve(T sx, T sy, int w, int h) {
    SamplePoint<T> s;
    s.inx = sx > T(0) && sx < T(w - 1);
    s.iny = sy > T(0) && sy < T(h - 1);
    sx = std::min(std::max(sx, T(0)), T(w - 1));
    sy = std::min(std::max(sy, T(0)), T(h - 1));
    // floor lands on w-1 only when sx == w-1 exactly; keeping x0 there (with
    // wx = 0) makes integer and clamped coordinates exact, not interpolated.
    s.x0 = static_cast<int>(std::floor(sx));
    s.y0 = static_cast<int>(std::floor(sy));
    s.x1 = std::min(s.x0 + 1, w - 1);
    s.y1 = std::min(s.y0 + 1, h - 1);
    s.wx = sx - T(s.x0);
    s.wy = sy - T(s.y0);
    return s;
}

}  // namespace warp_detail

/// Backward bilinear warp: output(y,x) samples input at
/// (x + flow_x(y,x), y + flow_y(y,x)), border-clamped.
/// Zero and integer flows are exact (no interpolation arithmetic on the
/// sampled value when the weights are 0).
template <typename T>
Tensor<T> bilinear_warp(const Tensor<T>& input, const Tensor<T>& flow) {
    if (input.rank() != 3) throw ShapeError("bilinear_warp: input must be CxHxW");
    check_flow(flow, "bilinear_warp");
    const int c = input.channels(), h = input.height(), w = input.width();
    if (flow.height() != h || flow.width() != w) {
        throw ShapeError("bilinear_warp: flow " + flow.shape_str() + " vs input " + input.shape_str());
    }
    Tensor<T> out({c, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const T* fx = flow.data.data();
    const T* fy = fx + plane;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            const auto s = warp_detail::resolve<T>(T(x) + fx[p], T(y) + fy[p], w, h);
            for (int ch = 0; ch < c; ++ch) {
                const T* pl = &input.data[static_cast<std::size_t>(ch) * plane];
                const T v00 = pl[static_cast<std::size_t>(s.y0) * w + s.x0];
                const T v10 = pl[static_cast<std::size_t>(s.y0) * w + s.x1];
                const T v01 = pl[static_cast<std::size_t>(s.y1) * w + s.x0];
                const T v11 = pl[static_cast<std::size_t>(s.y1) * w + s.x1];
                const T top = v00 + s.wx * (v10 - v00);
                const T bot = v01 + s.wx * (v11 - v01);
                out.data[static_cast<std::size_t>(ch) * plane + p] = top + s.wy * (bot - top);
            }
        }
    }
    return out;
}

/// Tape version, differentiable w.r.t. both input values and flow values.
template <typename T>
ag::Var<T> warp(ag::Var<T> input, ag::Var<T> flow) {
    ag::Tape<T>& tp = *input.tape;
    Tensor<T> out = bilinear_warp(tp.value(input), tp.value(flow));
    if (!tp.track({input, flow})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ii = input.id, fi = flow.id](ag::Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        const Tensor<T>& in = t.node(ii).value;
        const Tensor<T>& fl = t.node(fi).value;
        const int c = in.channels(), h = in.height(), w = in.width();
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        const T* fx = fl.data.data();
        const T* fy = fx + plane;
        const bool need_in = t.needs_grad(ii), need_fl = t.needs_grad(fi);
        Tensor<T>* gin = need_in ? &t.grad_buf(ii) : nullptr;
        Tensor<T>* gfl = need_fl ? &t.grad_buf(fi) : nullptr;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * w + x;
                const auto s = warp_detail::resolve<T>(T(x) + fx[p], T(y) + fy[p], w, h);
                T dsx = T(0), dsy = T(0);
                for (int ch = 0; ch < c; ++ch) {
                    const T* pl = &in.data[static_cast<std::size_t>(ch) * plane];
                    const T go = g.data[static_cast<std::size_t>(ch) * plane + p];
                    if (go == T(0)) continue;
                    const T v00 = pl[static_cast<std::size_t>(s.y0) * w + s.x0];
                    const T v10 = pl[static_cast<std::size_t>(s.y0) * w + s.x1];
                    const T v01 = pl[static_cast<std::size_t>(s.y1) * w + s.x0];
                    const T v11 = pl[static_cast<std::size_t>(s.y1) * w + s.x1];
                    if (need_in) {
                        T* gp = &gin->data[static_cast<std::size_t>(ch) * plane];
                        gp[static_cast<std::size_t>(s.y0) * w + s.x0] += (T(1) - s.wx) * (T(1) - s.wy) * go;
                        gp[static_cast<std::size_t>(s.y0) * w + s.x1] += s.wx * (T(1) - s.wy) * go;
                        gp[static_cast<std::size_t>(s.y1) * w + s.x0] += (T(1) - s.wx) * s.wy * go;
                        gp[static_cast<std::size_t>(s.y1) * w + s.x1] += s.wx * s.wy * go;
                    }
                    if (need_fl) {
                        dsx += go * ((T(1) - s.wy) * (v10 - v00) + s.wy * (v11 - v01));
                        dsy += go * ((T(1) - s.wx) * (v01 - v00) + s.wx * (v11 - v10));
                    }
                }
                if (need_fl) {
                    if (s.inx) gfl->data[p] += dsx;
                    if (s.iny) gfl->data[plane + p] += dsy;
                }
            }
        }
    });
}

/// Warp each pyramid level by its matching flow (levels i = 1..4 pair with
/// flows f_1..f_4). `flows` holds f_0..f_4; `features` holds levels 1..4.
template <typename T>
std::vector<Tensor<T>> warp_pyramid(const std::vector<Tensor<T>>& features,
                                    const std::vector<Tensor<T>>& flows) {
    if (flows.size() != 5) throw ShapeError("warp_pyramid: expected 5 flows (scales 0..4)");
    if (features.size() != 4) throw ShapeError("warp_pyramid: expected 4 feature levels (scales 1..4)");
    std::vector<Tensor<T>> out;
    out.reserve(4);
    for (std::size_t i = 0; i < 4; ++i) {
        const Tensor<T>& f = features[i];
        const Tensor<T>& fl = flows[i + 1];
        if (f.height() != fl.height() || f.width() != fl.width()) {
            throw ShapeError("warp_pyramid: level " + std::to_string(i + 1) + " feature " + f.shape_str() +
                             " vs flow " + fl.shape_str());
        }
        out.push_back(bilinear_warp(f, fl));
    }
    return out;
}

/// Full-resolution image warp by f_0; contract identical to bilinear_warp.
template <typename T>
Tensor<T> warp_image_fullres(const Tensor<T>& img, const Tensor<T>& flow0) {
    return bilinear_warp(img, flow0);
}

/// Raw little-endian flow dump: magic "CCFL", u16 H, u16 W, then the fx plane
/// followed by the fy plane as 32-bit floats, row-major.
void save_flow(const std::string& path, const TensorF& flow);
TensorF load_flow(const std::string& path);

}  // namespace ccdc
