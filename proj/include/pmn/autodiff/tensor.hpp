#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmn/common/error.hpp"

namespace pmn::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
    std::string text = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) text += " x ";
        text += std::to_string(shape[i]);
    }
    return text + "]";
}

/// Dense row-major array with an optional gradient buffer.
///
/// Scalars are rank-1 tensors of shape [1]. The gradient buffer exists iff
/// requires_grad() is set and always has the same element count as values.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, bool requires_grad = false)
        : shape_(std::move(shape)), values_(shape_size(shape_), T(0)) {
        check_shape();
        set_requires_grad(requires_grad);
    }

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : shape_(std::move(shape)), values_(std::move(values)) {
        check_shape();
        if (values_.size() != shape_size(shape_)) {
            throw DimensionError("tensor of shape " + shape_string(shape_) + " given " +
                                 std::to_string(values_.size()) + " values");
        }
        set_requires_grad(requires_grad);
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return Tensor({1}, {value}, requires_grad);
    }

    static Tensor vector(std::vector<T> values, bool requires_grad = false) {
        const std::size_t n = values.size();
        return Tensor({n}, std::move(values), requires_grad);
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }
    T* data() noexcept { return values_.data(); }
    const T* data() const noexcept { return values_.data(); }

    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    T& operator()(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return values_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values_[(i * shape_[1] + j) * shape_[2] + k];
    }

    T item() const {
        if (values_.size() != 1) {
            throw ContractError("item() on tensor of shape " + shape_string(shape_));
        }
        return values_[0];
    }

    bool requires_grad() const noexcept { return requires_grad_; }

    void set_requires_grad(bool flag) {
        requires_grad_ = flag;
        if (flag) {
            grad_.assign(values_.size(), T(0));
        } else {
            grad_.clear();
            grad_.shrink_to_fit();
        }
    }

    std::span<T> grad() {
        require_grad();
        return grad_;
    }
    std::span<const T> grad() const {
        require_grad();
        return grad_;
    }
    /// Accumulation target for backward rules. The gradient buffer is
    /// bookkeeping rather than value state, so it is writable through
    /// const references to the tensor.
    std::span<T> grad_sink() const {
        require_grad();
        return grad_;
    }

    void zero_grad() { std::fill(grad_.begin(), grad_.end(), T(0)); }

    bool all_finite() const {
        for (T v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    void check_shape() const {
        for (std::size_t d : shape_) {
            if (d == 0) throw DimensionError("tensor dimensions must be positive");
        }
    }
    void require_grad() const {
        if (!requires_grad_) throw ContractError("tensor does not track gradients");
    }

    Shape shape_;
    std::vector<T> values_;
    mutable std::vector<T> grad_;
    bool requires_grad_ = false;
};

/// Converts values (and gradient tracking) between precisions.
template <typename To, typename From>
Tensor<To> convert(const Tensor<From>& from) {
    std::vector<To> values(from.values().begin(), from.values().end());
    return Tensor<To>(from.shape(), std::move(values), from.requires_grad());
}

}  // namespace pmn::ad
