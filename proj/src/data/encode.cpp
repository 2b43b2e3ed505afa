#include "pmn/data/encode.hpp"

#include <algorithm>
#include <string>

#include "pmn/common/error.hpp"

namespace pmn::data {

template <typename T>
void one_hot_encode_into(std::string_view sequence, T* out) {
    const std::size_t n = sequence.size();
    std::fill(out, out + 4 * n, T(0));
    for (std::size_t t = 0; t < n; ++t) {
        int channel;
        switch (sequence[t]) {
            case 'A': case 'a': channel = 0; break;
            case 'C': case 'c': channel = 1; break;
            case 'G': case 'g': channel = 2; break;
            case 'T': case 't': channel = 3; break;
            case 'N': case 'n': channel = -1; break;
            default:
                throw EncodingError("invalid base '" + std::string(1, sequence[t]) +
                                        "' at position " + std::to_string(t),
                                    t);
        }
        if (channel < 0) {
            for (std::size_t c = 0; c < 4; ++c) out[c * n + t] = T(0.25);
        } else {
            out[channel * n + t] = T(1);
        }
    }
}

template <typename T>
ad::Tensor<T> one_hot_encode(std::string_view sequence) {
    if (sequence.empty()) throw EncodingError("empty sequence", 0);
    ad::Tensor<T> out({4, sequence.size()});
    one_hot_encode_into(sequence, out.data());
    return out;
}

template ad::Tensor<float> one_hot_encode<float>(std::string_view);
template ad::Tensor<double> one_hot_encode<double>(std::string_view);
template void one_hot_encode_into<float>(std::string_view, float*);
template void one_hot_encode_into<double>(std::string_view, double*);

}  // namespace pmn::data
