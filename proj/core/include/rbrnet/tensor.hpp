#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rbrnet/errors.hpp"
#include "rbrnet/rng.hpp"

namespace rbrnet {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major tensor over scalar T (float for training, double for the
/// gradient-check oracles). Copies are shallow: they share one storage block,
/// so a value and its reshaped views see the same data and the same gradient.
/// Data is treated as immutable once an op has consumed it; the gradient
/// buffer is the only thing mutated afterwards (by accumulation).
template <typename T>
class Tensor {
  public:
    struct Storage {
        std::vector<T> data;
        std::vector<T> grad;  // same length as data when tracked, else empty
        bool tracked = false;
    };

    Tensor() : shape_{0}, st_(std::make_shared<Storage>()) {}

    static Tensor zeros(const Shape& shape) { return filled(shape, T(0)); }
    static Tensor ones(const Shape& shape) { return filled(shape, T(1)); }

    static Tensor constant(const Shape& shape, T value) { return filled(shape, value); }

    /// He initialization: normal with mean 0 and variance 2/fan_in, drawn
    /// deterministically from (seed, stream) counters.
    static Tensor he_normal(const Shape& shape, std::int64_t fan_in, std::uint64_t seed,
                            std::uint64_t stream = 0) {
        if (fan_in < 1) throw ValueError("he_normal: fan_in must be >= 1");
        Tensor t = filled(shape, T(0));
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        auto& buf = t.st_->data;
        for (std::size_t i = 0; i < buf.size(); ++i) {
            buf[i] = static_cast<T>(stddev * rng_normal(seed, stream, i));
        }
        return t;
    }

    static Tensor from_values(const Shape& shape, std::vector<T> values) {
        validate_shape(shape);
        if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
            throw SizeError("from_values: got " + std::to_string(values.size()) +
                            " values for shape " + shape_str(shape));
        }
        Tensor t;
        t.shape_ = shape;
        t.st_->data = std::move(values);
        return t;
    }

    static Tensor scalar(T value) { return from_values({1}, {value}); }

    const Shape& shape() const { return shape_; }
    std::int64_t ndim() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t dim(std::size_t i) const { return shape_[i]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(st_->data.size()); }

    std::span<T> data() { return {st_->data.data(), st_->data.size()}; }
    std::span<const T> data() const { return {st_->data.data(), st_->data.size()}; }

    bool requires_grad() const { return st_->tracked; }

    Tensor& set_requires_grad(bool value = true) {
        st_->tracked = value;
        if (value && st_->grad.size() != st_->data.size()) {
            st_->grad.assign(st_->data.size(), T(0));
        }
        return *this;
    }

    /// Gradient buffer; empty span until the tensor is tracked.
    std::span<T> grad() { return {st_->grad.data(), st_->grad.size()}; }
    std::span<const T> grad() const { return {st_->grad.data(), st_->grad.size()}; }

    void zero_grad() {
        for (auto& g : st_->grad) g = T(0);
    }

    /// View with a new shape over the same storage (and gradient).
    Tensor reshape(const Shape& new_shape) const {
        validate_shape(new_shape);
        if (shape_numel(new_shape) != numel()) {
            throw SizeError("reshape: cannot view " + shape_str(shape_) + " as " +
                            shape_str(new_shape));
        }
        Tensor t;
        t.shape_ = new_shape;
        t.st_ = st_;
        return t;
    }

    /// Deep copy with detached storage (not tracked).
    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.st_->data = st_->data;
        return t;
    }

    T item() const {
        if (numel() != 1) throw GraphError("item: tensor is not a scalar");
        return st_->data[0];
    }

    bool same_storage(const Tensor& other) const { return st_ == other.st_; }
    const void* storage_id() const { return st_.get(); }
    std::shared_ptr<Storage> storage() const { return st_; }

  private:
    static void validate_shape(const Shape& shape) {
        if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
        for (std::int64_t d : shape) {
            if (d < 1) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
        }
    }

    static Tensor filled(const Shape& shape, T value) {
        validate_shape(shape);
        Tensor t;
        t.shape_ = shape;
        t.st_->data.assign(static_cast<std::size_t>(shape_numel(shape)), value);
        return t;
    }

    Shape shape_;
    std::shared_ptr<Storage> st_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace rbrnet
