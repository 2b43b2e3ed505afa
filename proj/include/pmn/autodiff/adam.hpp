#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pmn/autodiff/tensor.hpp"

namespace pmn::ad {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment buffers mirroring the parameter list.
template <typename T>
struct AdamState {
    AdamOptions options;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
    std::uint64_t step = 0;

    AdamState() = default;
    AdamState(std::span<Tensor<T>* const> params, AdamOptions opts);
};

/// One Adam update using explicit gradients. Throws NonFiniteError (and
/// leaves parameters and state untouched) if any gradient is NaN or Inf.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const std::span<const T>> grads,
               AdamState<T>& state);

/// Same, reading each parameter's own gradient buffer.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, AdamState<T>& state);

}  // namespace pmn::ad
