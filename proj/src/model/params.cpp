#include "pmn/model/params.hpp"

#include <cmath>

#include "pmn/common/rng.hpp"

namespace pmn::model {

std::vector<ParameterSpec> parameter_specs(const PMNConfig& config) {
    std::vector<ParameterSpec> specs;
    std::size_t in_channels = 4;
    for (std::size_t i = 0; i < config.conv.size(); ++i) {
        const auto& layer = config.conv[i];
        const std::string prefix = "conv" + std::to_string(i);
        specs.push_back({prefix + ".kernels", {layer.channels, in_channels, layer.width}});
        specs.push_back({prefix + ".bias", {layer.channels}});
        in_channels = layer.channels;
    }
    const std::size_t d = config.embed_dim();
    if (config.variant == Variant::pmn) {
        specs.push_back({"lstm.input_weights", {4 * d, d}});
        specs.push_back({"lstm.recurrent_weights", {4 * d, 2 * d}});
        specs.push_back({"lstm.bias", {4 * d}});
    }
    const std::size_t features = has_prototypes(config.variant) ? 2 * d : d;
    specs.push_back({"head.weights", {config.output_count(), features}});
    specs.push_back({"head.bias", {config.output_count()}});
    if (has_prototypes(config.variant)) specs.push_back({"prototypes", {config.labels, d}});
    return specs;
}

std::size_t parameter_count(const PMNConfig& config) {
    std::size_t total = 0;
    for (const auto& spec : parameter_specs(config)) total += ad::shape_size(spec.shape);
    return total;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::named() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t i = 0; i < conv.size(); ++i) {
        const std::string prefix = "conv" + std::to_string(i);
        out.emplace_back(prefix + ".kernels", &conv[i].kernels);
        out.emplace_back(prefix + ".bias", &conv[i].bias);
    }
    if (!lstm_input.empty()) {
        out.emplace_back("lstm.input_weights", &lstm_input);
        out.emplace_back("lstm.recurrent_weights", &lstm_recurrent);
        out.emplace_back("lstm.bias", &lstm_bias);
    }
    out.emplace_back("head.weights", &head_weights);
    out.emplace_back("head.bias", &head_bias);
    if (!prototypes.empty()) out.emplace_back("prototypes", &prototypes);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::named() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (auto& [name, tensor] : const_cast<ModelParams<T>*>(this)->named()) {
        out.emplace_back(name, tensor);
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& entry : named()) out.push_back(entry.second);
    return out;
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool flag) {
    for (Tensor<T>* t : tensors()) t->set_requires_grad(flag);
}

template <typename T>
void ModelParams<T>::zero_grad() {
    for (Tensor<T>* t : tensors()) t->zero_grad();
}

template <typename T>
ModelParams<T> zero_params(const PMNConfig& config) {
    config.validate();
    ModelParams<T> params;
    params.conv.resize(config.conv.size());
    for (const auto& spec : parameter_specs(config)) {
        Tensor<T> tensor(spec.shape, true);
        const std::string& n = spec.name;
        if (n.rfind("conv", 0) == 0) {
            const std::size_t layer = std::stoul(n.substr(4, n.find('.') - 4));
            if (n.ends_with(".kernels")) {
                params.conv[layer].kernels = std::move(tensor);
            } else {
                params.conv[layer].bias = std::move(tensor);
            }
        } else if (n == "lstm.input_weights") {
            params.lstm_input = std::move(tensor);
        } else if (n == "lstm.recurrent_weights") {
            params.lstm_recurrent = std::move(tensor);
        } else if (n == "lstm.bias") {
            params.lstm_bias = std::move(tensor);
        } else if (n == "head.weights") {
            params.head_weights = std::move(tensor);
        } else if (n == "head.bias") {
            params.head_bias = std::move(tensor);
        } else if (n == "prototypes") {
            params.prototypes = std::move(tensor);
        }
    }
    return params;
}

namespace {

template <typename T>
void fill_uniform(Tensor<T>& t, double fan_in, double fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.values()) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const PMNConfig& config, std::uint64_t seed) {
    ModelParams<T> params = zero_params<T>(config);
    Rng rng(Rng::derive(seed, 0x1417));
    for (auto& layer : params.conv) {
        const double c_out = static_cast<double>(layer.kernels.dim(0));
        const double c_in = static_cast<double>(layer.kernels.dim(1));
        const double width = static_cast<double>(layer.kernels.dim(2));
        fill_uniform(layer.kernels, c_in * width, c_out * width, rng);
    }
    const std::size_t d = config.embed_dim();
    if (!params.lstm_input.empty()) {
        fill_uniform(params.lstm_input, double(d), double(4 * d), rng);
        fill_uniform(params.lstm_recurrent, double(2 * d), double(4 * d), rng);
        for (std::size_t k = d; k < 2 * d; ++k) params.lstm_bias[k] = T(1);
    }
    fill_uniform(params.head_weights, double(params.head_weights.dim(1)),
                 double(params.head_weights.dim(0)), rng);
    if (!params.prototypes.empty()) {
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& v : params.prototypes.values()) v = static_cast<T>(std_dev * rng.normal());
    }
    return params;
}

template <typename To, typename From>
ModelParams<To> convert_params(const ModelParams<From>& from) {
    ModelParams<To> to;
    for (const auto& layer : from.conv) {
        to.conv.push_back({ad::convert<To>(layer.kernels), ad::convert<To>(layer.bias)});
    }
    auto cv = [](const Tensor<From>& t) { return t.empty() ? Tensor<To>() : ad::convert<To>(t); };
    to.lstm_input = cv(from.lstm_input);
    to.lstm_recurrent = cv(from.lstm_recurrent);
    to.lstm_bias = cv(from.lstm_bias);
    to.head_weights = cv(from.head_weights);
    to.head_bias = cv(from.head_bias);
    to.prototypes = cv(from.prototypes);
    return to;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> zero_params<float>(const PMNConfig&);
template ModelParams<double> zero_params<double>(const PMNConfig&);
template ModelParams<float> init_params<float>(const PMNConfig&, std::uint64_t);
template ModelParams<double> init_params<double>(const PMNConfig&, std::uint64_t);
template ModelParams<float> convert_params<float>(const ModelParams<float>&);
template ModelParams<double> convert_params<double>(const ModelParams<float>&);
template ModelParams<float> convert_params<float>(const ModelParams<double>&);
template ModelParams<double> convert_params<double>(const ModelParams<double>&);

}  // namespace pmn::model
