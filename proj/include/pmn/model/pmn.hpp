#pragma once

// Forward passes for the four model variants.
//
//   x_hat = f(x)                         3-layer CNN + global max-pool
//   r^0   = mean_i p_i,  h^0 = c^0 = 0
//   (h_hat^k, c^k) = LSTM(x_hat, [h^{k-1}; r^{k-1}], c^{k-1})
//   h^k   = h_hat^k + x_hat
//   w^k_i = sigmoid(eps * cos(h_hat^k, p_i))     (softmax over i for early
//                                                 hops in softmax_hops mode)
//   r^k   = sum_i w^k_i p_i
//   y_hat = sigmoid(W [h^K; r^K] + b)

#include <span>
#include <vector>

#include "pmn/autodiff/ops.hpp"
#include "pmn/model/params.hpp"

namespace pmn::model {

using ad::Tape;

enum class AttentionKind { sigmoid, softmax };

struct ForwardOptions {
    bool training = false;
    /// Dropout source; required when training with a non-zero dropout rate.
    Rng* rng = nullptr;
    /// Stop gradients through the attention weights used by read vectors.
    bool detach_attention = false;
};

template <typename T>
struct HopState {
    const Tensor<T>* lstm_hidden;  // h_hat^k
    const Tensor<T>* hidden;       // h^k
    const Tensor<T>* cell;         // c^k
    const Tensor<T>* read;         // r^k
    const Tensor<T>* attention;    // w^k
};

template <typename T>
struct ForwardOutput {
    const Tensor<T>* embedding = nullptr;  // x_hat (after dropout when training)
    std::vector<HopState<T>> hops;
    const Tensor<T>* prediction = nullptr;       // y_hat
    const Tensor<T>* final_attention = nullptr;  // w^K; null for CNN variants
};

/// x [4 x T] -> x_hat [d].
template <typename T>
const Tensor<T>& encode_sequence(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                                 const PMNConfig& config, const ForwardOptions& options);

/// r^0 = mean of the prototype rows.
template <typename T>
const Tensor<T>& init_read_vector(Tape<T>& tape, const Tensor<T>& prototypes);

template <typename T>
const Tensor<T>& attention_weights(Tape<T>& tape, const Tensor<T>& query,
                                   const Tensor<T>& prototypes, double sharpness,
                                   AttentionKind kind);

/// Attention kind used at 1-based hop k of K.
AttentionKind hop_attention(const PMNConfig& config, std::size_t k);

/// Completes a hop from a given LSTM hidden output: residual, attention and
/// read vector.
template <typename T>
HopState<T> hop_from_hidden(Tape<T>& tape, const Tensor<T>& embedding,
                            const Tensor<T>& lstm_hidden, const Tensor<T>& cell,
                            const ModelParams<T>& params, const PMNConfig& config,
                            AttentionKind kind, const ForwardOptions& options);

template <typename T>
HopState<T> hop(Tape<T>& tape, const Tensor<T>& embedding, const Tensor<T>& hidden_prev,
                const Tensor<T>& cell_prev, const Tensor<T>& read_prev,
                const ModelParams<T>& params, const PMNConfig& config, AttentionKind kind,
                const ForwardOptions& options);

/// Dropout (training only), affine head and sigmoid over `features`.
template <typename T>
const Tensor<T>& output_head(Tape<T>& tape, const Tensor<T>& features,
                             const ModelParams<T>& params, const PMNConfig& config,
                             const ForwardOptions& options);

/// Full PMN with K hops; config.variant must be pmn.
template <typename T>
ForwardOutput<T> forward(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                         const PMNConfig& config, const ForwardOptions& options);

/// Single matching pass on x_hat; config.variant must be pmn_no_lstm.
template <typename T>
ForwardOutput<T> forward_no_lstm(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                                 const PMNConfig& config, const ForwardOptions& options);

/// CNN baselines; config.variant must be cnn_multi or cnn_single.
template <typename T>
ForwardOutput<T> forward_cnn(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                             const PMNConfig& config, const ForwardOptions& options);

/// Dispatches on config.variant.
template <typename T>
ForwardOutput<T> run_model(Tape<T>& tape, const Tensor<T>& x, const ModelParams<T>& params,
                           const PMNConfig& config, const ForwardOptions& options);

/// Positive binary cross entropy summed over labels.
template <typename T>
const Tensor<T>& classification_loss(Tape<T>& tape, const Tensor<T>& prediction,
                                     std::span<const T> labels);

/// sum_i (y_i - w^K_i)^2
template <typename T>
const Tensor<T>& prototype_matching_loss(Tape<T>& tape, const Tensor<T>& final_attention,
                                         std::span<const T> labels);

/// classification_loss + lambda * prototype_matching_loss.
template <typename T>
const Tensor<T>& total_loss(Tape<T>& tape, const Tensor<T>& prediction,
                            const Tensor<T>& final_attention, std::span<const T> labels,
                            double lambda);

struct LossParts {
    double classification = 0;
    double prototype = 0;
    double total = 0;
};

/// Objective for one sample of any variant. `labels` spans all labels; a
/// cnn_single model only sees its target label. CNN variants have no
/// prototype term.
template <typename T>
const Tensor<T>& sample_loss(Tape<T>& tape, const ForwardOutput<T>& output,
                             std::span<const T> labels, const PMNConfig& config,
                             LossParts* parts = nullptr);

}  // namespace pmn::model
