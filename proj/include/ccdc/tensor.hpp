#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccdc {

/// Thrown when tensor/image shapes do not satisfy an operation's contract.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a run configuration is internally inconsistent.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown on file-format or filesystem failures; the message names the path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of rank 1..4.
///
/// Layout conventions used across the project:
///   images / feature maps   (C, H, W)
///   flow fields             (2, H, W), channel 0 = dx, channel 1 = dy
///   conv weights            (Cout, Cin, kh, kw)
///   deconv weights          (Cin, Cout, kh, kw)
///   scalars                 (1)
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, T v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor scalar(T v) { return full({1}, v); }

    static std::size_t numel_of(const std::vector<int>& s) {
        if (s.empty()) throw ShapeError("tensor shape must have at least one dimension");
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    // (C,H,W) accessors
    int channels() const { require_rank(3); return shape[0]; }
    int height() const { require_rank(3); return shape[1]; }
    int width() const { require_rank(3); return shape[2]; }

    T& at3(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    T at3(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    T& at4(int o, int i, int y, int x) {
        return data[((static_cast<std::size_t>(o) * shape[1] + i) * shape[2] + y) * shape[3] + x];
    }
    T at4(int o, int i, int y, int x) const {
        return data[((static_cast<std::size_t>(o) * shape[1] + i) * shape[2] + y) * shape[3] + x];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    /// Elementwise accumulate. Shapes must match.
    void add_(const Tensor& o) {
        if (!same_shape(o)) {
            throw ShapeError("add_: shape mismatch " + shape_str(shape) + " vs " + shape_str(o.shape));
        }
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << ')';
        return os.str();
    }
    std::string shape_str() const { return shape_str(shape); }

private:
    void require_rank(int r) const {
        if (rank() != r) {
            throw ShapeError("expected rank-" + std::to_string(r) + " tensor, got " + shape_str());
        }
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace ccdc
