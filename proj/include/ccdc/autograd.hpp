#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ccdc/tensor.hpp"

namespace ccdc::ag {

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    bool defined() const { return tape != nullptr; }
    const Tensor<T>& value() const { return tape->value(*this); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, which is a
/// topological order by construction, so backward() is a single reverse scan.
/// With grad disabled (inference) no closures or gradient buffers are kept.
template <typename T>
class Tape {
public:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // allocated on first accumulation
        std::function<void(Tape&, int)> backward;
        Tensor<T>* sink = nullptr;  // external gradient target for bound params
        bool requires_grad = false;
    };

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = grad_enabled_ && requires_grad;
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    /// Leaf bound to an external parameter: after backward() its gradient is
    /// accumulated into `grad_sink`. Binding the same tensor twice returns the
    /// same node, so parameter sharing accumulates into one leaf.
    Var<T> bind(const Tensor<T>& param, Tensor<T>& grad_sink) {
        auto it = bound_.find(&param);
        if (it != bound_.end()) return Var<T>{this, it->second};
        Var<T> v = leaf(param, true);
        if (grad_enabled_) {
            if (!grad_sink.same_shape(param)) grad_sink = Tensor<T>::zeros(param.shape);
            nodes_[v.id].sink = &grad_sink;
        }
        bound_.emplace(&param, v.id);
        return v;
    }

    /// True when a node produced from `parents` must track gradients.
    bool track(std::initializer_list<Var<T>> parents) const {
        if (!grad_enabled_) return false;
        for (const Var<T>& p : parents) {
            if (p.defined() && nodes_[p.id].requires_grad) return true;
        }
        return false;
    }

    /// Append an interior node. `backward(tape, self_id)` must route
    /// nodes_[self_id].grad into the parents via grad_buf().
    Var<T> make(Tensor<T> value, std::function<void(Tape&, int)> backward) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = true;
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Tensor<T>& value(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    const Tensor<T>& grad(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    /// Gradient buffer of a node, zero-initialized on first use.
    Tensor<T>& grad_buf(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
        return n.grad;
    }

    /// Backpropagate from a scalar root. Nodes created after the root are
    /// ignored; bound parameters receive their gradients via their sinks.
    void backward(Var<T> root) {
        if (!grad_enabled_) throw std::logic_error("backward() on an inference tape");
        if (value(root).numel() != 1) {
            throw ShapeError("backward() root must be scalar, got " + value(root).shape_str());
        }
        grad_buf(root.id).data[0] = T(1);
        for (int id = root.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.requires_grad || n.grad.data.empty()) continue;
            if (n.backward) n.backward(*this, id);
            if (n.sink) n.sink->add_(n.grad);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::deque<Node> nodes_;
    std::unordered_map<const Tensor<T>*, int> bound_;
    bool grad_enabled_;
};

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>&av = tp.value(a), &bv = tp.value(b);
    detail::check_same_shape(av, bv, "add");
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    if (!tp.track({a, b})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id, bi = b.id](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        if (t.needs_grad(ai)) t.grad_buf(ai).add_(g);
        if (t.needs_grad(bi)) t.grad_buf(bi).add_(g);
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>&av = tp.value(a), &bv = tp.value(b);
    detail::check_same_shape(av, bv, "sub");
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
    if (!tp.track({a, b})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id, bi = b.id](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        if (t.needs_grad(ai)) t.grad_buf(ai).add_(g);
        if (t.needs_grad(bi)) {
            Tensor<T>& gb = t.grad_buf(bi);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
        }
    });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>&av = tp.value(a), &bv = tp.value(b);
    detail::check_same_shape(av, bv, "mul");
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    if (!tp.track({a, b})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id, bi = b.id](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        if (t.needs_grad(ai)) {
            const Tensor<T>& bv2 = t.node(bi).value;
            Tensor<T>& ga = t.grad_buf(ai);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += bv2.data[i] * g.data[i];
        }
        if (t.needs_grad(bi)) {
            const Tensor<T>& av2 = t.node(ai).value;
            Tensor<T>& gb = t.grad_buf(bi);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += av2.data[i] * g.data[i];
        }
    });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
    Tape<T>& tp = *a.tape;
    Tensor<T> out = tp.value(a);
    for (T& v : out.data) v *= s;
    if (!tp.track({a})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id, s](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        Tensor<T>& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += s * g.data[i];
    });
}

template <typename T>
Var<T> square(Var<T> a) {
    Tape<T>& tp = *a.tape;
    Tensor<T> out = tp.value(a);
    for (T& v : out.data) v *= v;
    if (!tp.track({a})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        const Tensor<T>& x = t.node(ai).value;
        Tensor<T>& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += T(2) * x.data[i] * g.data[i];
    });
}

template <typename T>
Var<T> leaky_relu(Var<T> a, T slope) {
    Tape<T>& tp = *a.tape;
    Tensor<T> out = tp.value(a);
    for (T& v : out.data) v = v >= T(0) ? v : slope * v;
    if (!tp.track({a})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id, slope](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        const Tensor<T>& x = t.node(ai).value;
        Tensor<T>& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += (x.data[i] >= T(0) ? g.data[i] : slope * g.data[i]);
        }
    });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    Tape<T>& tp = *a.tape;
    Tensor<T> out = tp.value(a);
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    if (!tp.track({a})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        const Tensor<T>& y = t.node(self).value;
        Tensor<T>& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += y.data[i] * (T(1) - y.data[i]) * g.data[i];
        }
    });
}

/// Smooth robust penalty sqrt(x^2 + eps^2), elementwise.
template <typename T>
Var<T> charbonnier(Var<T> a, T eps) {
    Tape<T>& tp = *a.tape;
    const T eps2 = eps * eps;
    Tensor<T> out = tp.value(a);
    for (T& v : out.data) v = std::sqrt(v * v + eps2);
    if (!tp.track({a})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        const Tensor<T>& x = t.node(ai).value;
        const Tensor<T>& y = t.node(self).value;
        Tensor<T>& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += x.data[i] / y.data[i] * g.data[i];
        }
    });
}

/// Mean over all elements; reduction runs in double regardless of T.
template <typename T>
Var<T> mean_all(Var<T> a) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& av = tp.value(a);
    double acc = 0.0;
    for (T v : av.data) acc += static_cast<double>(v);
    const std::size_t n = av.numel();
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
    if (!tp.track({a})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id, n](Tape<T>& t, int self) {
        const T g = t.node(self).grad.data[0] / static_cast<T>(n);
        Tensor<T>& ga = t.grad_buf(ai);
        for (T& v : ga.data) v += g;
    });
}

/// Concatenate rank-3 tensors along the channel axis.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    Tape<T>& tp = *xs[0].tape;
    const int h = tp.value(xs[0]).height(), w = tp.value(xs[0]).width();
    int c_total = 0;
    for (const Var<T>& x : xs) {
        const Tensor<T>& v = tp.value(x);
        if (v.height() != h || v.width() != w) {
            throw ShapeError("concat_channels: spatial mismatch " + v.shape_str());
        }
        c_total += v.channels();
    }
    Tensor<T> out({c_total, h, w});
    std::size_t off = 0;
    for (const Var<T>& x : xs) {
        const Tensor<T>& v = tp.value(x);
        std::copy(v.data.begin(), v.data.end(), out.data.begin() + off);
        off += v.numel();
    }
    bool any = false;
    for (const Var<T>& x : xs) any = any || tp.track({x});
    if (!any) return tp.leaf(std::move(out));
    std::vector<int> ids;
    for (const Var<T>& x : xs) ids.push_back(x.id);
    return tp.make(std::move(out), [ids](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        std::size_t off = 0;
        for (int id : ids) {
            const std::size_t n = t.node(id).value.numel();
            if (t.needs_grad(id)) {
                Tensor<T>& gx = t.grad_buf(id);
                for (std::size_t i = 0; i < n; ++i) gx.data[i] += g.data[off + i];
            }
            off += n;
        }
    });
}

/// Keep the top-left (h, w) window of a rank-3 tensor.
template <typename T>
Var<T> crop_hw(Var<T> a, int h, int w) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& av = tp.value(a);
    const int c = av.channels(), ih = av.height(), iw = av.width();
    if (h > ih || w > iw || h < 1 || w < 1) {
        throw ShapeError("crop_hw: window " + std::to_string(h) + "x" + std::to_string(w) +
                         " does not fit in " + av.shape_str());
    }
    if (h == ih && w == iw) return a;
    Tensor<T> out({c, h, w});
    for (int cc = 0; cc < c; ++cc)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at3(cc, y, x) = av.at3(cc, y, x);
    if (!tp.track({a})) return tp.leaf(std::move(out));
    return tp.make(std::move(out), [ai = a.id, c, h, w](Tape<T>& t, int self) {
        const Tensor<T>& g = t.node(self).grad;
        Tensor<T>& ga = t.grad_buf(ai);
        for (int cc = 0; cc < c; ++cc)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) ga.at3(cc, y, x) += g.at3(cc, y, x);
    });
}

}  // namespace ccdc::ag
