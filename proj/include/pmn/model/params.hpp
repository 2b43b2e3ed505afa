#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pmn/autodiff/tensor.hpp"
#include "pmn/model/config.hpp"

namespace pmn::model {

using ad::Shape;
using ad::Tensor;

struct ParameterSpec {
    std::string name;
    Shape shape;
};

/// Names and shapes of every trainable array, in canonical order. A pure
/// function of the configuration.
std::vector<ParameterSpec> parameter_specs(const PMNConfig& config);
std::size_t parameter_count(const PMNConfig& config);

/// All trainable arrays of one model. Arrays a variant does not use are left
/// empty and are skipped by named().
template <typename T>
struct ModelParams {
    struct ConvLayer {
        Tensor<T> kernels;  // [C_out x C_in x w]
        Tensor<T> bias;     // [C_out]
    };

    std::vector<ConvLayer> conv;
    Tensor<T> lstm_input;      // [4d x d]
    Tensor<T> lstm_recurrent;  // [4d x 2d]
    Tensor<T> lstm_bias;       // [4d]
    Tensor<T> head_weights;    // [outputs x 2d] for PMN variants, [outputs x d] for CNNs
    Tensor<T> head_bias;       // [outputs]
    Tensor<T> prototypes;      // [labels x d]

    /// (name, tensor) pairs matching parameter_specs() order.
    std::vector<std::pair<std::string, Tensor<T>*>> named();
    std::vector<std::pair<std::string, const Tensor<T>*>> named() const;
    std::vector<Tensor<T>*> tensors();

    void set_requires_grad(bool flag);
    void zero_grad();
};

/// Zero-valued parameters with the configured shapes, tracking gradients.
template <typename T>
ModelParams<T> zero_params(const PMNConfig& config);

/// Fan-based uniform weights, zero biases except forget-gate bias 1.0, and
/// N(0, 1/d) prototype rows.
template <typename T>
ModelParams<T> init_params(const PMNConfig& config, std::uint64_t seed);

template <typename To, typename From>
ModelParams<To> convert_params(const ModelParams<From>& from);

}  // namespace pmn::model
