#pragma once

#include <string_view>

#include "pmn/autodiff/tensor.hpp"

namespace pmn::data {

/// Channels A, C, G, T; N gives 0.25 in every channel. Case-insensitive.
/// Any other character throws EncodingError with its position.
template <typename T>
ad::Tensor<T> one_hot_encode(std::string_view sequence);

/// Writes the encoding into a preallocated [4 x T] buffer.
template <typename T>
void one_hot_encode_into(std::string_view sequence, T* out);

}  // namespace pmn::data
