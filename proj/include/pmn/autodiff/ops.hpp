#pragma once

#include <cstddef>
#include <span>

#include "pmn/autodiff/tape.hpp"
#include "pmn/autodiff/tensor.hpp"
#include "pmn/common/rng.hpp"

namespace pmn::ad {

/// Norm floor used by cosine similarity; a clamped zero vector has cosine 0
/// against anything.
inline constexpr double kCosineNormFloor = 1e-12;

/// Same-padded, stride-1 1-D correlation with odd kernel width.
/// input [C_in x T], kernels [C_out x C_in x w], bias [C_out] -> [C_out x T].
template <typename T>
Tensor<T>& conv1d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernels,
                  const Tensor<T>& bias);

/// Elementwise max(0, x); the subgradient at 0 is 0.
template <typename T>
Tensor<T>& relu(Tape<T>& tape, const Tensor<T>& input);

template <typename T>
Tensor<T>& sigmoid(Tape<T>& tape, const Tensor<T>& input);

template <typename T>
Tensor<T>& tanh(Tape<T>& tape, const Tensor<T>& input);

/// [C x T] -> [C], maximum over the length axis. Gradient goes to the first
/// maximizing position.
template <typename T>
Tensor<T>& global_maxpool(Tape<T>& tape, const Tensor<T>& input);

/// Gate rows are ordered input, forget, cell, output.
template <typename T>
struct LstmWeights {
    const Tensor<T>& input_weights;      // [4d x d], applied to x_in
    const Tensor<T>& recurrent_weights;  // [4d x 2d], applied to h_in
    const Tensor<T>& bias;               // [4d]
};

template <typename T>
struct LstmOutput {
    Tensor<T>& hidden;  // [d]
    Tensor<T>& cell;    // [d]
};

template <typename T>
LstmOutput<T> lstm_cell(Tape<T>& tape, const Tensor<T>& x_in, const Tensor<T>& h_in,
                        const Tensor<T>& c_in, const LstmWeights<T>& weights);

/// u.v / (|u| |v|) with each norm floored at kCosineNormFloor; result in [-1, 1].
template <typename T>
Tensor<T>& cosine_similarity(Tape<T>& tape, const Tensor<T>& u, const Tensor<T>& v);

/// Cosine of u [d] against every row of rows [n x d] -> [n].
template <typename T>
Tensor<T>& cosine_rows(Tape<T>& tape, const Tensor<T>& u, const Tensor<T>& rows);

/// W [m x n] . x [n] + b [m].
template <typename T>
Tensor<T>& affine(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weights,
                  const Tensor<T>& bias);

/// Row `index` of table [n x d]; throws IndexError when out of range.
template <typename T>
Tensor<T>& embedding_lookup(Tape<T>& tape, const Tensor<T>& table, std::size_t index);

/// Inverted dropout. Identity when not training or rate == 0.
template <typename T>
const Tensor<T>& dropout(Tape<T>& tape, const Tensor<T>& input, double rate, bool training,
                         Rng& rng);

template <typename T>
Tensor<T>& add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T>& scale(Tape<T>& tape, const Tensor<T>& input, T factor);

/// 1-D concatenation [a; b].
template <typename T>
Tensor<T>& concat(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Elements [offset, offset + length) of a tensor, as a 1-D tensor.
template <typename T>
Tensor<T>& slice(Tape<T>& tape, const Tensor<T>& input, std::size_t offset, std::size_t length);

template <typename T>
Tensor<T>& sum(Tape<T>& tape, const Tensor<T>& input);

/// Mean of the rows of [n x d] -> [d].
template <typename T>
Tensor<T>& mean_rows(Tape<T>& tape, const Tensor<T>& rows);

/// sum_i w[i] * rows[i] for w [n], rows [n x d] -> [d], i ascending.
template <typename T>
Tensor<T>& weighted_row_sum(Tape<T>& tape, const Tensor<T>& weights, const Tensor<T>& rows);

template <typename T>
Tensor<T>& softmax(Tape<T>& tape, const Tensor<T>& input);

/// Copy that blocks gradient flow.
template <typename T>
Tensor<T>& detach(Tape<T>& tape, const Tensor<T>& input);

/// -sum_i (y_i log p_i + (1 - y_i) log(1 - p_i)) with p clamped to
/// [clamp, 1 - clamp]; clamped entries receive no gradient.
template <typename T>
Tensor<T>& binary_cross_entropy(Tape<T>& tape, const Tensor<T>& predictions,
                                std::span<const T> targets, double clamp = 1e-7);

/// sum_i (y_i - x_i)^2
template <typename T>
Tensor<T>& squared_error(Tape<T>& tape, const Tensor<T>& input, std::span<const T> targets);

/// a + factor * b for scalars a, b.
template <typename T>
Tensor<T>& add_scaled(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, T factor);

}  // namespace pmn::ad
