#include "pmn/model/pmn.hpp"

#include <string>

namespace pmn::model {

namespace {

void require_variant(const PMNConfig& config, std::initializer_list<Variant> allowed,
                     const char* op) {
    for (Variant v : allowed) {
        if (config.variant == v) return;
    }
    throw ContractError(std::string(op) + " called for variant " +
                        std::string(to_string(config.variant)));
}

template <typename T>
const Tensor<T>& apply_dropout(Tape<T>& tape, const Tensor<T>& input, const PMNConfig& config,
                               const ForwardOptions& options) {
    if (!options.training || config.dropout == 0.0) return input;
    if (!options.rng) throw ContractError("training forward pass with dropout needs an rng");
    return ad::dropout(tape, input, config.dropout, true, *options.rng);
}

}  // namespace

template <typename T>
const Tensor<T>& encode_sequence(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                                 const PMNConfig& config, const ForwardOptions& options) {
    if (x.rank() != 2 || x.dim(0) != 4) {
        throw DimensionError("encode_sequence: expected a 4 x T one-hot input, got " +
                             ad::shape_string(x.shape()));
    }
    if (params.conv.size() != config.conv.size()) {
        throw DimensionError("encode_sequence: parameter set has the wrong number of conv layers");
    }
    const Tensor<T>* h = &x;
    for (const auto& layer : params.conv) {
        h = &ad::relu(tape, ad::conv1d(tape, *h, layer.kernels, layer.bias));
    }
    const Tensor<T>& pooled = ad::global_maxpool(tape, *h);
    return apply_dropout(tape, pooled, config, options);
}

template <typename T>
const Tensor<T>& init_read_vector(Tape<T>& tape, const Tensor<T>& prototypes) {
    return ad::mean_rows(tape, prototypes);
}

template <typename T>
const Tensor<T>& attention_weights(Tape<T>& tape, const Tensor<T>& query,
                                   const Tensor<T>& prototypes, double sharpness,
                                   AttentionKind kind) {
    if (!(sharpness > 0)) throw ContractError("attention_weights: sharpness must be positive");
    const Tensor<T>& cosines = ad::cosine_rows(tape, query, prototypes);
    const Tensor<T>& logits = ad::scale(tape, cosines, static_cast<T>(sharpness));
    return kind == AttentionKind::sigmoid ? ad::sigmoid(tape, logits) : ad::softmax(tape, logits);
}

AttentionKind hop_attention(const PMNConfig& config, std::size_t k) {
    if (config.attention == AttentionMode::softmax_hops && k < config.hops) {
        return AttentionKind::softmax;
    }
    return AttentionKind::sigmoid;
}

template <typename T>
HopState<T> hop_from_hidden(Tape<T>& tape, const Tensor<T>& embedding,
                            const Tensor<T>& lstm_hidden, const Tensor<T>& cell,
                            const ModelParams<T>& params, const PMNConfig& config,
                            AttentionKind kind, const ForwardOptions& options) {
    const Tensor<T>& hidden = ad::add(tape, lstm_hidden, embedding);
    const Tensor<T>& query = config.attend_on_residual ? hidden : lstm_hidden;
    const Tensor<T>& weights =
        attention_weights(tape, query, params.prototypes, config.sharpness, kind);
    const Tensor<T>& mixing = options.detach_attention ? ad::detach(tape, weights) : weights;
    const Tensor<T>& read = ad::weighted_row_sum(tape, mixing, params.prototypes);
    return {&lstm_hidden, &hidden, &cell, &read, &weights};
}

template <typename T>
HopState<T> hop(Tape<T>& tape, const Tensor<T>& embedding, const Tensor<T>& hidden_prev,
                const Tensor<T>& cell_prev, const Tensor<T>& read_prev,
                const ModelParams<T>& params, const PMNConfig& config, AttentionKind kind,
                const ForwardOptions& options) {
    const Tensor<T>& recurrent_in = ad::concat(tape, hidden_prev, read_prev);
    const ad::LstmWeights<T> weights{params.lstm_input, params.lstm_recurrent, params.lstm_bias};
    const auto step = ad::lstm_cell(tape, embedding, recurrent_in, cell_prev, weights);
    return hop_from_hidden(tape, embedding, step.hidden, step.cell, params, config, kind, options);
}

template <typename T>
const Tensor<T>& output_head(Tape<T>& tape, const Tensor<T>& features,
                             const ModelParams<T>& params, const PMNConfig& config,
                             const ForwardOptions& options) {
    const Tensor<T>& dropped = apply_dropout(tape, features, config, options);
    return ad::sigmoid(tape, ad::affine(tape, dropped, params.head_weights, params.head_bias));
}

template <typename T>
ForwardOutput<T> forward(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                         const PMNConfig& config, const ForwardOptions& options) {
    require_variant(config, {Variant::pmn}, "forward");
    if (config.hops == 0) throw ContractError("forward: hops must be at least 1");
    ForwardOutput<T> out;
    out.embedding = &encode_sequence(tape, x, params, config, options);
    const std::size_t d = config.embed_dim();
    const Tensor<T>* hidden = &tape.constant(Tensor<T>({d}));
    const Tensor<T>* cell = &tape.constant(Tensor<T>({d}));
    const Tensor<T>* read = &init_read_vector(tape, params.prototypes);
    for (std::size_t k = 1; k <= config.hops; ++k) {
        HopState<T> state = hop(tape, *out.embedding, *hidden, *cell, *read, params, config,
                                hop_attention(config, k), options);
        hidden = state.hidden;
        cell = state.cell;
        read = state.read;
        out.hops.push_back(state);
    }
    out.final_attention = out.hops.back().attention;
    out.prediction = &output_head(tape, ad::concat(tape, *hidden, *read), params, config, options);
    return out;
}

template <typename T>
ForwardOutput<T> forward_no_lstm(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                                 const PMNConfig& config, const ForwardOptions& options) {
    require_variant(config, {Variant::pmn_no_lstm}, "forward_no_lstm");
    ForwardOutput<T> out;
    out.embedding = &encode_sequence(tape, x, params, config, options);
    const Tensor<T>& weights = attention_weights(tape, *out.embedding, params.prototypes,
                                                 config.sharpness, AttentionKind::sigmoid);
    const Tensor<T>& mixing = options.detach_attention ? ad::detach(tape, weights) : weights;
    const Tensor<T>& read = ad::weighted_row_sum(tape, mixing, params.prototypes);
    out.final_attention = &weights;
    out.prediction =
        &output_head(tape, ad::concat(tape, *out.embedding, read), params, config, options);
    return out;
}

template <typename T>
ForwardOutput<T> forward_cnn(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                             const PMNConfig& config, const ForwardOptions& options) {
    require_variant(config, {Variant::cnn_multi, Variant::cnn_single}, "forward_cnn");
    ForwardOutput<T> out;
    out.embedding = &encode_sequence(tape, x, params, config, options);
    out.prediction = &output_head(tape, *out.embedding, params, config, options);
    return out;
}

template <typename T>
ForwardOutput<T> run_model(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                           const PMNConfig& config, const ForwardOptions& options) {
    switch (config.variant) {
        case Variant::pmn: return forward(tape, x, params, config, options);
        case Variant::pmn_no_lstm: return forward_no_lstm(tape, x, params, config, options);
        case Variant::cnn_multi:
        case Variant::cnn_single: return forward_cnn(tape, x, params, config, options);
    }
    throw ContractError("run_model: unknown variant");
}

template <typename T>
const Tensor<T>& classification_loss(Tape<T>& tape, const Tensor<T>& prediction,
                                     std::span<const T> labels) {
    return ad::binary_cross_entropy(tape, prediction, labels, 1e-7);
}

template <typename T>
const Tensor<T>& prototype_matching_loss(Tape<T>& tape, const Tensor<T>& final_attention,
                                         std::span<const T> labels) {
    return ad::squared_error(tape, final_attention, labels);
}

template <typename T>
const Tensor<T>& total_loss(Tape<T>& tape, const Tensor<T>& prediction,
                            const Tensor<T>& final_attention, std::span<const T> labels,
                            double lambda) {
    if (!(lambda >= 0)) throw ContractError("total_loss: lambda must be non-negative");
    const Tensor<T>& bce = classification_loss(tape, prediction, labels);
    const Tensor<T>& matching = prototype_matching_loss(tape, final_attention, labels);
    return ad::add_scaled(tape, bce, matching, static_cast<T>(lambda));
}

template <typename T>
const Tensor<T>& sample_loss(Tape<T>& tape, const ForwardOutput<T>& output,
                             std::span<const T> labels, const PMNConfig& config,
                             LossParts* parts) {
    if (labels.size() != config.labels) {
        throw DimensionError("sample_loss: " + std::to_string(labels.size()) + " labels for a " +
                             std::to_string(config.labels) + "-label model");
    }
    std::span<const T> targets = labels;
    if (config.variant == Variant::cnn_single) targets = labels.subspan(config.target_label, 1);
    if (!output.final_attention) {
        const Tensor<T>& bce = classification_loss(tape, *output.prediction, targets);
        if (parts) *parts = {double(bce[0]), 0.0, double(bce[0])};
        return bce;
    }
    const Tensor<T>& bce = classification_loss(tape, *output.prediction, targets);
    const Tensor<T>& matching = prototype_matching_loss(tape, *output.final_attention, targets);
    const Tensor<T>& total =
        ad::add_scaled(tape, bce, matching, static_cast<T>(config.proto_weight));
    if (parts) *parts = {double(bce[0]), double(matching[0]), double(total[0])};
    return total;
}

#define PMN_INSTANTIATE_MODEL(T)                                                                   \
    template const Tensor<T>& encode_sequence(Tape<T>&, const Tensor<T>&, const ModelParams<T>&,  \
                                              const PMNConfig&, const ForwardOptions&);            \
    template const Tensor<T>& init_read_vector(Tape<T>&, const Tensor<T>&);                        \
    template const Tensor<T>& attention_weights(Tape<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                                double, AttentionKind);                            \
    template HopState<T> hop_from_hidden(Tape<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                         const Tensor<T>&, const ModelParams<T>&,                  \
                                         const PMNConfig&, AttentionKind, const ForwardOptions&);  \
    template HopState<T> hop(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                             const Tensor<T>&, const ModelParams<T>&, const PMNConfig&,            \
                             AttentionKind, const ForwardOptions&);                                \
    template const Tensor<T>& output_head(Tape<T>&, const Tensor<T>&, const ModelParams<T>&,      \
                                          const PMNConfig&, const ForwardOptions&);                \
    template ForwardOutput<T> forward(Tape<T>&, const Tensor<T>&, const ModelParams<T>&,          \
                                      const PMNConfig&, const ForwardOptions&);                    \
    template ForwardOutput<T> forward_no_lstm(Tape<T>&, const Tensor<T>&, const ModelParams<T>&,  \
                                              const PMNConfig&, const ForwardOptions&);            \
    template ForwardOutput<T> forward_cnn(Tape<T>&, const Tensor<T>&, const ModelParams<T>&,      \
                                          const PMNConfig&, const ForwardOptions&);                \
    template ForwardOutput<T> run_model(Tape<T>&, const Tensor<T>&, const ModelParams<T>&,        \
                                        const PMNConfig&, const ForwardOptions&);                  \
    template const Tensor<T>& classification_loss(Tape<T>&, const Tensor<T>&, std::span<const T>); \
    template const Tensor<T>& prototype_matching_loss(Tape<T>&, const Tensor<T>&,                 \
                                                      std::span<const T>);                         \
    template const Tensor<T>& total_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                         std::span<const T>, double);                              \
    template const Tensor<T>& sample_loss(Tape<T>&, const ForwardOutput<T>&, std::span<const T>,  \
                                          const PMNConfig&, LossParts*);

PMN_INSTANTIATE_MODEL(float)
PMN_INSTANTIATE_MODEL(double)

#undef PMN_INSTANTIATE_MODEL

}  // namespace pmn::model
