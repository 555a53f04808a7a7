#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "ccdc/autograd.hpp"
#include "ccdc/rng.hpp"
#include "ccdc/tensor.hpp"

namespace ccdc::nn {

using ag::Tape;
using ag::Var;

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using CMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// (C,H,W) -> (C*k*k, out_h*out_w) patch matrix, zero padding.
template <typename T>
void im2col(const Tensor<T>& src, int k, int stride, int pad, int out_h, int out_w, T* col) {
    const int c = src.channels(), h = src.height(), w = src.width();
    const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
    std::size_t r = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++r) {
                T* dst = col + r * cols;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int y = oy * stride - pad + ky;
                    if (y < 0 || y >= h) {
                        for (int ox = 0; ox < out_w; ++ox) dst[oy * out_w + ox] = T(0);
                        continue;
                    }
                    const T* row = &src.data[(static_cast<std::size_t>(ch) * h + y) * w];
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int x = ox * stride - pad + kx;
                        dst[oy * out_w + ox] = (x < 0 || x >= w) ? T(0) : row[x];
                    }
                }
            }
        }
    }
}

/// Scatter-add inverse of im2col: (C*k*k, out_h*out_w) -> (C,H,W).
template <typename T>
void col2im(const T* col, int c, int h, int w, int k, int stride, int pad, int out_h, int out_w,
            Tensor<T>& dst) {
    const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
    std::size_t r = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++r) {
                const T* srcrow = col + r * cols;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int y = oy * stride - pad + ky;
                    if (y < 0 || y >= h) continue;
                    T* row = &dst.data[(static_cast<std::size_t>(ch) * h + y) * w];
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int x = ox * stride - pad + kx;
                        if (x >= 0 && x < w) row[x] += srcrow[oy * out_w + ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// 2-D convolution, weight (O, C, k, k), bias (O), zero padding.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad) {
    Tape<T>& tp = *x.tape;
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& wv = tp.value(w);
    const Tensor<T>& bv = tp.value(b);
    if (xv.rank() != 3 || wv.rank() != 4) throw ShapeError("conv2d: need CxHxW input, OxCxKxK weight");
    const int c = xv.channels(), h = xv.height(), w_in = xv.width();
    const int o = wv.shape[0], k = wv.shape[2];
    if (wv.shape[1] != c) {
        throw ShapeError("conv2d: weight expects " + std::to_string(wv.shape[1]) + " input channels, got " +
                         std::to_string(c));
    }
    if (wv.shape[3] != k) throw ShapeError("conv2d: non-square kernel");
    if (bv.numel() != static_cast<std::size_t>(o)) throw ShapeError("conv2d: bias size mismatch");
    const int oh = conv_out_dim(h, k, stride, pad), ow = conv_out_dim(w_in, k, stride, pad);
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: output would be empty");

    const std::size_t rows = static_cast<std::size_t>(c) * k * k;
    const std::size_t cols = static_cast<std::size_t>(oh) * ow;
    std::vector<T> col(rows * cols);
    detail::im2col(xv, k, stride, pad, oh, ow, col.data());

    Tensor<T> out({o, oh, ow});
    {
        detail::CMatMap<T> wm(wv.data.data(), o, static_cast<Eigen::Index>(rows));
        detail::CMatMap<T> cm(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        detail::MatMap<T> om(out.data.data(), o, static_cast<Eigen::Index>(cols));
        om.noalias() = wm * cm;
    }
    for (int oc = 0; oc < o; ++oc) {
        T* plane = &out.data[static_cast<std::size_t>(oc) * cols];
        const T bias = bv.data[static_cast<std::size_t>(oc)];
        for (std::size_t i = 0; i < cols; ++i) plane[i] += bias;
    }

    if (!tp.track({x, w, b})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [xi = x.id, wi = w.id, bi = b.id, c, h, w_in, o, k, stride, pad, oh,
                                    ow](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        const Tensor<T>& xv2 = t.node(xi).value;
        const Tensor<T>& wv2 = t.node(wi).value;
        const std::size_t rows = static_cast<std::size_t>(c) * k * k;
        const std::size_t cols = static_cast<std::size_t>(oh) * ow;
        detail::CMatMap<T> gm(g.data.data(), o, static_cast<Eigen::Index>(cols));
        if (t.needs_grad(bi)) {
            // Fixed-order accumulation: Eigen's redux result depends on the
            // buffer address via its alignment peel.
            Tensor<T>& gb = t.grad_buf(bi);
            for (int oc = 0; oc < o; ++oc) {
                double acc = 0.0;
                const T* p = &g.data[static_cast<std::size_t>(oc) * cols];
                for (std::size_t i = 0; i < cols; ++i) acc += static_cast<double>(p[i]);
                gb.data[static_cast<std::size_t>(oc)] += static_cast<T>(acc);
            }
        }
        if (t.needs_grad(wi)) {
            std::vector<T> col(rows * cols);
            detail::im2col(xv2, k, stride, pad, oh, ow, col.data());
            detail::CMatMap<T> cm(col.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
            Tensor<T>& gw = t.grad_buf(wi);
            detail::MatMap<T> gwm(gw.data.data(), o, static_cast<Eigen::Index>(rows));
            gwm.noalias() += gm * cm.transpose();
        }
        if (t.needs_grad(xi)) {
            std::vector<T> colg(rows * cols);
            detail::CMatMap<T> wm(wv2.data.data(), o, static_cast<Eigen::Index>(rows));
            detail::MatMap<T> cgm(colg.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
            cgm.noalias() = wm.transpose() * gm;
            detail::col2im(colg.data(), c, h, w_in, k, stride, pad, oh, ow, t.grad_buf(xi));
        }
    });
}

/// Transposed convolution, weight (C, O, k, k), bias (O).
/// Output spatial size: (in - 1) * stride - 2 * pad + k.
template <typename T>
Var<T> conv_transpose2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad) {
    Tape<T>& tp = *x.tape;
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& wv = tp.value(w);
    const Tensor<T>& bv = tp.value(b);
    if (xv.rank() != 3 || wv.rank() != 4) {
        throw ShapeError("conv_transpose2d: need CxHxW input, CxOxKxK weight");
    }
    const int c = xv.channels(), h = xv.height(), w_in = xv.width();
    const int o = wv.shape[1], k = wv.shape[2];
    if (wv.shape[0] != c) {
        throw ShapeError("conv_transpose2d: weight expects " + std::to_string(wv.shape[0]) +
                         " input channels, got " + std::to_string(c));
    }
    if (bv.numel() != static_cast<std::size_t>(o)) throw ShapeError("conv_transpose2d: bias size mismatch");
    const int oh = (h - 1) * stride - 2 * pad + k;
    const int ow = (w_in - 1) * stride - 2 * pad + k;
    if (oh < 1 || ow < 1) throw ShapeError("conv_transpose2d: output would be empty");
    if (conv_out_dim(oh, k, stride, pad) != h || conv_out_dim(ow, k, stride, pad) != w_in) {
        throw ShapeError("conv_transpose2d: geometry not invertible");
    }

    const std::size_t rows = static_cast<std::size_t>(o) * k * k;
    const std::size_t cols = static_cast<std::size_t>(h) * w_in;
    std::vector<T> col(rows * cols);
    Tensor<T> out = Tensor<T>::zeros({o, oh, ow});
    {
        detail::CMatMap<T> wm(wv.data.data(), c, static_cast<Eigen::Index>(rows));
        detail::CMatMap<T> xm(xv.data.data(), c, static_cast<Eigen::Index>(cols));
        detail::MatMap<T> cm(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        cm.noalias() = wm.transpose() * xm;
    }
    detail::col2im(col.data(), o, oh, ow, k, stride, pad, h, w_in, out);
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int oc = 0; oc < o; ++oc) {
        T* p = &out.data[static_cast<std::size_t>(oc) * plane];
        const T bias = bv.data[static_cast<std::size_t>(oc)];
        for (std::size_t i = 0; i < plane; ++i) p[i] += bias;
    }

    if (!tp.track({x, w, b})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [xi = x.id, wi = w.id, bi = b.id, c, h, w_in, o, k, stride, pad, oh,
                                    ow](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        const Tensor<T>& xv2 = t.node(xi).value;
        const Tensor<T>& wv2 = t.node(wi).value;
        const std::size_t rows = static_cast<std::size_t>(o) * k * k;
        const std::size_t cols = static_cast<std::size_t>(h) * w_in;
        if (t.needs_grad(bi)) {
            Tensor<T>& gb = t.grad_buf(bi);
            const std::size_t plane = static_cast<std::size_t>(oh) * ow;
            for (int oc = 0; oc < o; ++oc) {
                double acc = 0.0;
                const T* p = &g.data[static_cast<std::size_t>(oc) * plane];
                for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
                gb.data[static_cast<std::size_t>(oc)] += static_cast<T>(acc);
            }
        }
        const bool need_x = t.needs_grad(xi), need_w = t.needs_grad(wi);
        if (need_x || need_w) {
            std::vector<T> colg(rows * cols);
            detail::im2col(g, k, stride, pad, h, w_in, colg.data());
            detail::CMatMap<T> cgm(colg.data(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(cols));
            if (need_x) {
                Tensor<T>& gx = t.grad_buf(xi);
                detail::CMatMap<T> wm(wv2.data.data(), c, static_cast<Eigen::Index>(rows));
                detail::MatMap<T> gxm(gx.data.data(), c, static_cast<Eigen::Index>(cols));
                gxm.noalias() += wm * cgm;
            }
            if (need_w) {
                Tensor<T>& gw = t.grad_buf(wi);
                detail::CMatMap<T> xm(xv2.data.data(), c, static_cast<Eigen::Index>(cols));
                detail::MatMap<T> gwm(gw.data.data(), c, static_cast<Eigen::Index>(rows));
                gwm.noalias() += xm * cgm.transpose();
            }
        }
    });
}

/// Symmetric (edge-inclusive) reflection pad on the bottom/right only.
/// Requires pad amounts <= current size.
template <typename T>
Var<T> pad_reflect_br(Var<T> x, int out_h, int out_w) {
    Tape<T>& tp = *x.tape;
    const Tensor<T>& xv = tp.value(x);
    const int c = xv.channels(), h = xv.height(), w = xv.width();
    if (out_h < h || out_w < w) throw ShapeError("pad_reflect_br: target smaller than input");
    if (out_h - h > h || out_w - w > w) {
        throw ShapeError("pad_reflect_br: pad exceeds input size (" + xv.shape_str() + " -> " +
                         std::to_string(out_h) + "x" + std::to_string(out_w) + ")");
    }
    if (out_h == h && out_w == w) return x;
    auto reflect = [](int i, int n) { return i < n ? i : 2 * n - 1 - i; };
    Tensor<T> out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < out_h; ++y) {
            const int sy = reflect(y, h);
            for (int xx = 0; xx < out_w; ++xx) {
                out.at3(ch, y, xx) = xv.at3(ch, sy, reflect(xx, w));
            }
        }
    }
    if (!tp.track({x})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [xi = x.id, c, h, w, out_h, out_w, reflect](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        Tensor<T>& gx = t.grad_buf(xi);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < out_h; ++y)
                for (int xx = 0; xx < out_w; ++xx)
                    gx.at3(ch, reflect(y, h), reflect(xx, w)) += g.at3(ch, y, xx);
    });
}

/// Nearest-neighbor 2x upsample (each pixel becomes a 2x2 block), optionally
/// trimmed to (out_h, out_w) for odd-sized skip connections.
template <typename T>
Var<T> upsample_nearest2x(Var<T> x, int out_h, int out_w) {
    Tape<T>& tp = *x.tape;
    const Tensor<T>& xv = tp.value(x);
    const int c = xv.channels(), h = xv.height(), w = xv.width();
    if (out_h > 2 * h || out_w > 2 * w || out_h < 2 * h - 1 || out_w < 2 * w - 1) {
        throw ShapeError("upsample_nearest2x: target " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " is not a 2x of " + xv.shape_str());
    }
    Tensor<T> out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < out_h; ++y)
            for (int xx = 0; xx < out_w; ++xx) out.at3(ch, y, xx) = xv.at3(ch, y / 2, xx / 2);
    if (!tp.track({x})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [xi = x.id, c, out_h, out_w](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        Tensor<T>& gx = t.grad_buf(xi);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < out_h; ++y)
                for (int xx = 0; xx < out_w; ++xx) gx.at3(ch, y / 2, xx / 2) += g.at3(ch, y, xx);
    });
}

/// Flow doubling: top-left-anchored bilinear upsample (source coordinate is
/// half the destination index, clamped) with displacement values scaled x2,
/// so out[:, 2i, 2j] == 2 * in[:, i, j] exactly.
template <typename T>
Var<T> upsample_flow_2x(Var<T> f, int out_h, int out_w) {
    Tape<T>& tp = *f.tape;
    const Tensor<T>& fv = tp.value(f);
    const int c = fv.channels(), h = fv.height(), w = fv.width();
    if (out_h > 2 * h || out_w > 2 * w || out_h < 2 * h - 1 || out_w < 2 * w - 1) {
        throw ShapeError("upsample_flow_2x: target " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " is not a 2x of " + fv.shape_str());
    }
    struct Samp {
        int i0, i1;
        T t;
    };
    auto make_axis = [](int out_n, int in_n) {
        std::vector<Samp> s(static_cast<std::size_t>(out_n));
        for (int i = 0; i < out_n; ++i) {
            const T src = T(i) / T(2);
            int i0 = static_cast<int>(src);
            T t = src - T(i0);
            int i1 = i0 + 1;
            if (i1 > in_n - 1) {
                i1 = in_n - 1;
                if (i0 > i1) i0 = i1;
                if (i0 == i1) t = T(0);
            }
            s[static_cast<std::size_t>(i)] = {i0, i1, t};
        }
        return s;
    };
    const auto ys = make_axis(out_h, h), xs = make_axis(out_w, w);
    Tensor<T> out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < out_h; ++y) {
            const Samp sy = ys[static_cast<std::size_t>(y)];
            for (int xx = 0; xx < out_w; ++xx) {
                const Samp sx = xs[static_cast<std::size_t>(xx)];
                const T v00 = fv.at3(ch, sy.i0, sx.i0), v01 = fv.at3(ch, sy.i0, sx.i1);
                const T v10 = fv.at3(ch, sy.i1, sx.i0), v11 = fv.at3(ch, sy.i1, sx.i1);
                const T top = v00 + sx.t * (v01 - v00);
                const T bot = v10 + sx.t * (v11 - v10);
                out.at3(ch, y, xx) = T(2) * (top + sy.t * (bot - top));
            }
        }
    }
    if (!tp.track({f})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [fi = f.id, c, out_h, out_w, ys, xs](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        Tensor<T>& gf = t.grad_buf(fi);
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < out_h; ++y) {
                const Samp sy = ys[static_cast<std::size_t>(y)];
                for (int xx = 0; xx < out_w; ++xx) {
                    const Samp sx = xs[static_cast<std::size_t>(xx)];
                    const T gv = T(2) * g.at3(ch, y, xx);
                    gf.at3(ch, sy.i0, sx.i0) += (T(1) - sy.t) * (T(1) - sx.t) * gv;
                    gf.at3(ch, sy.i0, sx.i1) += (T(1) - sy.t) * sx.t * gv;
                    gf.at3(ch, sy.i1, sx.i0) += sy.t * (T(1) - sx.t) * gv;
                    gf.at3(ch, sy.i1, sx.i1) += sy.t * sx.t * gv;
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

/// Kaiming fan-in normal init with LeakyReLU(0.1) gain.
template <typename T>
void kaiming_init(Tensor<T>& w, Rng& rng, int fan_in, double weight_scale = 1.0) {
    const double gain = std::sqrt(2.0 / (1.0 + 0.1 * 0.1));
    const double stddev = weight_scale * gain / std::sqrt(static_cast<double>(fan_in));
    for (T& v : w.data) v = static_cast<T>(rng.normal() * stddev);
}

template <typename T>
struct ConvLayer {
    Tensor<T> w, b, gw, gb;
    int stride = 1, pad = 1;

    ConvLayer() = default;
    ConvLayer(int in_c, int out_c, int k, int stride_, int pad_, Rng& rng, double weight_scale = 1.0)
        : w({out_c, in_c, k, k}),
          b(Tensor<T>::zeros({out_c})),
          gw(Tensor<T>::zeros({out_c, in_c, k, k})),
          gb(Tensor<T>::zeros({out_c})),
          stride(stride_),
          pad(pad_) {
        kaiming_init(w, rng, in_c * k * k, weight_scale);
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

template <typename T>
Var<T> apply(Tape<T>& tape, ConvLayer<T>& layer, Var<T> x) {
    return conv2d(x, tape.bind(layer.w, layer.gw), tape.bind(layer.b, layer.gb), layer.stride, layer.pad);
}

template <typename T>
struct DeconvLayer {
    Tensor<T> w, b, gw, gb;
    int stride = 2, pad = 1;

    DeconvLayer() = default;
    DeconvLayer(int in_c, int out_c, int k, int stride_, int pad_, Rng& rng)
        : w({in_c, out_c, k, k}),
          b(Tensor<T>::zeros({out_c})),
          gw(Tensor<T>::zeros({in_c, out_c, k, k})),
          gb(Tensor<T>::zeros({out_c})),
          stride(stride_),
          pad(pad_) {
        kaiming_init(w, rng, in_c * k * k);
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

template <typename T>
Var<T> apply(Tape<T>& tape, DeconvLayer<T>& layer, Var<T> x) {
    return conv_transpose2d(x, tape.bind(layer.w, layer.gw), tape.bind(layer.b, layer.gb), layer.stride,
                            layer.pad);
}

}  // namespace ccdc::nn
