#include "pmn/autodiff/adam.hpp"

#include <cmath>
#include <string>

#include "pmn/simd/kernels.hpp"

namespace pmn::ad {

template <typename T>
AdamState<T>::AdamState(std::span<Tensor<T>* const> params, AdamOptions opts) : options(opts) {
    for (const Tensor<T>* p : params) {
        first_moment.emplace_back(p->size(), T(0));
        second_moment.emplace_back(p->size(), T(0));
    }
}

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const std::span<const T>> grads,
               AdamState<T>& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw DimensionError("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (grads[p].size() != params[p]->size() || state.first_moment[p].size() != params[p]->size()) {
            throw DimensionError("adam_step: parameter " + std::to_string(p) +
                                 " has mismatched gradient or state size");
        }
        for (std::size_t i = 0; i < grads[p].size(); ++i) {
            if (!std::isfinite(grads[p][i])) {
                throw NonFiniteError("adam_step: non-finite gradient in parameter " +
                                     std::to_string(p) + " element " + std::to_string(i));
            }
        }
    }
    ++state.step;
    const auto& opt = state.options;
    const double t = static_cast<double>(state.step);
    const T bc1 = static_cast<T>(1.0 - std::pow(opt.beta1, t));
    const T bc2 = static_cast<T>(1.0 - std::pow(opt.beta2, t));
    const auto& k = simd::kernels<T>();
    for (std::size_t p = 0; p < params.size(); ++p) {
        k.adam(params[p]->size(), params[p]->data(), grads[p].data(), state.first_moment[p].data(),
               state.second_moment[p].data(), static_cast<T>(opt.beta1),
               static_cast<T>(opt.beta2), static_cast<T>(opt.learning_rate),
               static_cast<T>(opt.epsilon), bc1, bc2);
    }
}

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, AdamState<T>& state) {
    std::vector<std::span<const T>> grads;
    grads.reserve(params.size());
    for (Tensor<T>* p : params) grads.emplace_back(p->grad());
    adam_step<T>(params, grads, state);
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Tensor<float>* const>, std::span<const std::span<const float>>,
                        AdamState<float>&);
template void adam_step(std::span<Tensor<double>* const>, std::span<const std::span<const double>>,
                        AdamState<double>&);
template void adam_step(std::span<Tensor<float>* const>, AdamState<float>&);
template void adam_step(std::span<Tensor<double>* const>, AdamState<double>&);

}  // namespace pmn::ad
