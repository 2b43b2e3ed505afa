#include "pmn/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmn/simd/kernels.hpp"

namespace pmn::ad {
namespace {

template <typename T>
const simd::KernelTable<T>& kern() {
    return simd::kernels<T>();
}

void require(bool condition, const std::string& what) {
    if (!condition) throw DimensionError(what);
}

template <typename T>
std::string describe(const Tensor<T>& t) {
    return shape_string(t.shape());
}

// Packs a boolean decision stream into words for the branch signature.
class BranchRecorder {
public:
    template <typename T>
    explicit BranchRecorder(Tape<T>& tape) : note_([&tape](std::uint64_t w) { tape.note_branch(w); }) {}
    ~BranchRecorder() {
        if (bits_) note_(word_ ^ (std::uint64_t{bits_} << 56));
    }
    void push(bool bit) {
        word_ = (word_ << 1) | (bit ? 1u : 0u);
        if (++bits_ == 48) {
            note_(word_);
            word_ = 0;
            bits_ = 0;
        }
    }

private:
    std::function<void(std::uint64_t)> note_;
    std::uint64_t word_ = 0;
    unsigned bits_ = 0;
};

template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
Tensor<T>& cosine_impl(Tape<T>& tape, const Tensor<T>& u, const Tensor<T>& rows, std::size_t n,
                       std::size_t d, std::string_view op) {
    const T floor = static_cast<T>(kCosineNormFloor);
    T u_sq = 0;
    for (std::size_t k = 0; k < d; ++k) u_sq += u[k] * u[k];
    const T u_norm_raw = std::sqrt(u_sq);
    const bool u_floored = !(u_norm_raw > floor);
    const T u_norm = u_floored ? floor : u_norm_raw;

    std::vector<T> dots(n, T(0));
    kern<T>().gemv_acc(n, d, rows.data(), u.data(), dots.data());

    std::vector<T> row_norms(n);
    std::vector<T> raw(n);
    std::vector<char> row_floored(n);
    Tensor<T> out({n});
    BranchRecorder branches(tape);
    branches.push(u_floored);
    for (std::size_t i = 0; i < n; ++i) {
        T sq = 0;
        const T* p = rows.data() + i * d;
        for (std::size_t k = 0; k < d; ++k) sq += p[k] * p[k];
        const T norm_raw = std::sqrt(sq);
        row_floored[i] = !(norm_raw > floor);
        row_norms[i] = row_floored[i] ? floor : norm_raw;
        raw[i] = dots[i] / (u_norm * row_norms[i]);
        out[i] = std::clamp(raw[i], T(-1), T(1));
        branches.push(row_floored[i]);
    }

    return tape.emit(
        op, std::move(out), {&u, &rows},
        [&u, &rows, n, d, u_norm, u_floored, row_norms = std::move(row_norms), raw = std::move(raw),
         row_floored = std::move(row_floored)](Tensor<T>& result) {
            const auto g = result.grad();
            std::vector<T> coef(n);
            for (std::size_t i = 0; i < n; ++i) coef[i] = g[i] / (u_norm * row_norms[i]);
            if (u.requires_grad()) {
                std::vector<T> du(d, T(0));
                kern<T>().gemv_t_acc(n, d, rows.data(), coef.data(), du.data());
                if (!u_floored) {
                    T weighted = 0;
                    for (std::size_t i = 0; i < n; ++i) weighted += g[i] * raw[i];
                    const T factor = weighted / (u_norm * u_norm);
                    for (std::size_t k = 0; k < d; ++k) du[k] -= factor * u[k];
                }
                auto gu = u.grad_sink();
                for (std::size_t k = 0; k < d; ++k) gu[k] += du[k];
            }
            if (rows.requires_grad()) {
                auto gp = rows.grad_sink();
                for (std::size_t i = 0; i < n; ++i) {
                    const T* p = rows.data() + i * d;
                    T* gpi = gp.data() + i * d;
                    const T self = row_floored[i] ? T(0) : g[i] * raw[i] / (row_norms[i] * row_norms[i]);
                    for (std::size_t k = 0; k < d; ++k) gpi[k] += coef[i] * u[k] - self * p[k];
                }
            }
        });
}

}  // namespace

template <typename T>
Tensor<T>& conv1d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernels,
                  const Tensor<T>& bias) {
    require(input.rank() == 2, "conv1d: input must be [C_in x T], got " + describe(input));
    require(kernels.rank() == 3,
            "conv1d: kernels must be [C_out x C_in x w], got " + describe(kernels));
    const std::size_t c_in = input.dim(0);
    const std::size_t length = input.dim(1);
    const std::size_t c_out = kernels.dim(0);
    const std::size_t width = kernels.dim(2);
    require(kernels.dim(1) == c_in, "conv1d: kernels expect " + std::to_string(kernels.dim(1)) +
                                        " input channels, input has " + std::to_string(c_in));
    require(width % 2 == 1, "conv1d: kernel width must be odd");
    require(length >= width, "conv1d: input length " + std::to_string(length) +
                                 " shorter than kernel width " + std::to_string(width));
    require(bias.size() == c_out, "conv1d: bias must have " + std::to_string(c_out) + " entries");

    const std::size_t pad = (width - 1) / 2;
    const std::size_t q = c_in * width;

    // cols[(c*w + o), t] = input[c, t + o - pad], zero outside.
    Tensor<T> cols({q, length});
    for (std::size_t c = 0; c < c_in; ++c) {
        const T* src = input.data() + c * length;
        for (std::size_t o = 0; o < width; ++o) {
            T* dst = cols.data() + (c * width + o) * length;
            for (std::size_t t = 0; t < length; ++t) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + o) -
                                         static_cast<std::ptrdiff_t>(pad);
                if (s >= 0 && s < static_cast<std::ptrdiff_t>(length)) dst[t] = src[s];
            }
        }
    }

    Tensor<T> out({c_out, length});
    for (std::size_t j = 0; j < c_out; ++j) {
        std::fill_n(out.data() + j * length, length, bias[j]);
    }
    kern<T>().gemm_acc(c_out, length, q, kernels.data(), cols.data(), out.data());

    if (!tape.needs_grad({&input, &kernels, &bias})) return tape.constant(std::move(out));

    const Tensor<T>& saved = tape.constant(std::move(cols));
    return tape.emit("conv1d", std::move(out), {&input, &kernels, &bias},
                     [&input, &kernels, &bias, &saved, c_in, c_out, length, width, pad,
                      q](Tensor<T>& result) {
                         const T* g = result.grad().data();
                         if (bias.requires_grad()) {
                             auto gb = bias.grad_sink();
                             for (std::size_t j = 0; j < c_out; ++j) {
                                 T acc = gb[j];
                                 for (std::size_t t = 0; t < length; ++t) acc += g[j * length + t];
                                 gb[j] = acc;
                             }
                         }
                         if (kernels.requires_grad()) {
                             std::vector<T> cols_t(length * q);
                             for (std::size_t r = 0; r < q; ++r) {
                                 for (std::size_t t = 0; t < length; ++t) {
                                     cols_t[t * q + r] = saved[r * length + t];
                                 }
                             }
                             kern<T>().gemm_acc(c_out, q, length, g, cols_t.data(),
                                                kernels.grad_sink().data());
                         }
                         if (input.requires_grad()) {
                             std::vector<T> kernels_t(q * c_out);
                             for (std::size_t j = 0; j < c_out; ++j) {
                                 for (std::size_t r = 0; r < q; ++r) {
                                     kernels_t[r * c_out + j] = kernels[j * q + r];
                                 }
                             }
                             std::vector<T> gcols(q * length, T(0));
                             kern<T>().gemm_acc(q, length, c_out, kernels_t.data(), g, gcols.data());
                             auto gx = input.grad_sink();
                             for (std::size_t c = 0; c < c_in; ++c) {
                                 for (std::size_t o = 0; o < width; ++o) {
                                     const T* src = gcols.data() + (c * width + o) * length;
                                     for (std::size_t t = 0; t < length; ++t) {
                                         const std::ptrdiff_t s =
                                             static_cast<std::ptrdiff_t>(t + o) -
                                             static_cast<std::ptrdiff_t>(pad);
                                         if (s >= 0 && s < static_cast<std::ptrdiff_t>(length)) {
                                             gx[c * length + s] += src[t];
                                         }
                                     }
                                 }
                             }
                         }
                     });
}

template <typename T>
Tensor<T>& relu(Tape<T>& tape, const Tensor<T>& input) {
    Tensor<T> out(input.shape());
    {
        BranchRecorder branches(tape);
        for (std::size_t i = 0; i < input.size(); ++i) {
            const bool active = input[i] > T(0);
            out[i] = active ? input[i] : T(0);
            branches.push(active);
        }
    }
    return tape.emit("relu", std::move(out), {&input}, [&input](Tensor<T>& result) {
        const auto g = result.grad();
        auto gx = input.grad_sink();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            if (input[i] > T(0)) gx[i] += g[i];
        }
    });
}

template <typename T>
Tensor<T>& sigmoid(Tape<T>& tape, const Tensor<T>& input) {
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = stable_sigmoid(input[i]);
    return tape.emit("sigmoid", std::move(out), {&input}, [&input](Tensor<T>& result) {
        const auto g = result.grad();
        auto gx = input.grad_sink();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const T s = result[i];
            gx[i] += g[i] * s * (T(1) - s);
        }
    });
}

template <typename T>
Tensor<T>& tanh(Tape<T>& tape, const Tensor<T>& input) {
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
    return tape.emit("tanh", std::move(out), {&input}, [&input](Tensor<T>& result) {
        const auto g = result.grad();
        auto gx = input.grad_sink();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const T y = result[i];
            gx[i] += g[i] * (T(1) - y * y);
        }
    });
}

template <typename T>
Tensor<T>& global_maxpool(Tape<T>& tape, const Tensor<T>& input) {
    require(input.rank() == 2, "global_maxpool: input must be [C x T], got " + describe(input));
    const std::size_t channels = input.dim(0);
    const std::size_t length = input.dim(1);
    Tensor<T> out({channels});
    std::vector<std::size_t> argmax(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        const T* row = input.data() + c * length;
        std::size_t best = 0;
        for (std::size_t t = 1; t < length; ++t) {
            if (row[t] > row[best]) best = t;
        }
        argmax[c] = best;
        out[c] = row[best];
        tape.note_branch(best * 0x100000001b3ULL + c);
    }
    return tape.emit("global_maxpool", std::move(out), {&input},
                     [&input, length, argmax = std::move(argmax)](Tensor<T>& result) {
                         const auto g = result.grad();
                         auto gx = input.grad_sink();
                         for (std::size_t c = 0; c < argmax.size(); ++c) {
                             gx[c * length + argmax[c]] += g[c];
                         }
                     });
}

template <typename T>
LstmOutput<T> lstm_cell(Tape<T>& tape, const Tensor<T>& x_in, const Tensor<T>& h_in,
                        const Tensor<T>& c_in, const LstmWeights<T>& weights) {
    const Tensor<T>& w = weights.input_weights;
    const Tensor<T>& u = weights.recurrent_weights;
    const Tensor<T>& b = weights.bias;
    const std::size_t d = c_in.size();
    require(w.rank() == 2 && w.dim(0) == 4 * d,
            "lstm_cell: input weights must have 4d rows, got " + describe(w));
    require(u.rank() == 2 && u.dim(0) == 4 * d,
            "lstm_cell: recurrent weights must have 4d rows, got " + describe(u));
    require(w.dim(1) == x_in.size(), "lstm_cell: input weights expect " +
                                         std::to_string(w.dim(1)) + " inputs, got " +
                                         std::to_string(x_in.size()));
    require(u.dim(1) == h_in.size(), "lstm_cell: recurrent weights expect " +
                                         std::to_string(u.dim(1)) + " inputs, got " +
                                         std::to_string(h_in.size()));
    require(b.size() == 4 * d, "lstm_cell: bias must have 4d entries");

    std::vector<T> gates(b.values().begin(), b.values().end());
    kern<T>().gemv_acc(4 * d, x_in.size(), w.data(), x_in.data(), gates.data());
    kern<T>().gemv_acc(4 * d, h_in.size(), u.data(), h_in.data(), gates.data());
    for (std::size_t k = 0; k < d; ++k) {
        gates[k] = stable_sigmoid(gates[k]);                  // input
        gates[d + k] = stable_sigmoid(gates[d + k]);          // forget
        gates[2 * d + k] = std::tanh(gates[2 * d + k]);       // candidate
        gates[3 * d + k] = stable_sigmoid(gates[3 * d + k]);  // output
    }

    // Packed [h; c] so the cell is a single tape node.
    Tensor<T> packed({2 * d});
    std::vector<T> cell_tanh(d);
    for (std::size_t k = 0; k < d; ++k) {
        const T c = gates[d + k] * c_in[k] + gates[k] * gates[2 * d + k];
        cell_tanh[k] = std::tanh(c);
        packed[d + k] = c;
        packed[k] = gates[3 * d + k] * cell_tanh[k];
    }

    Tensor<T>& both = tape.emit(
        "lstm_cell", std::move(packed), {&x_in, &h_in, &c_in, &w, &u, &b},
        [&x_in, &h_in, &c_in, &w, &u, &b, d, gates = std::move(gates),
         cell_tanh = std::move(cell_tanh)](Tensor<T>& result) {
            const auto g = result.grad();
            std::vector<T> dpre(4 * d);
            std::vector<T> gc(d);
            for (std::size_t k = 0; k < d; ++k) {
                const T i = gates[k], f = gates[d + k], cand = gates[2 * d + k],
                        o = gates[3 * d + k];
                const T tc = cell_tanh[k];
                const T gh = g[k];
                gc[k] = g[d + k] + gh * o * (T(1) - tc * tc);
                dpre[k] = gc[k] * cand * i * (T(1) - i);
                dpre[d + k] = gc[k] * c_in[k] * f * (T(1) - f);
                dpre[2 * d + k] = gc[k] * i * (T(1) - cand * cand);
                dpre[3 * d + k] = gh * tc * o * (T(1) - o);
            }
            if (c_in.requires_grad()) {
                auto gci = c_in.grad_sink();
                for (std::size_t k = 0; k < d; ++k) gci[k] += gc[k] * gates[d + k];
            }
            if (b.requires_grad()) {
                auto gb = b.grad_sink();
                for (std::size_t k = 0; k < 4 * d; ++k) gb[k] += dpre[k];
            }
            if (w.requires_grad()) {
                kern<T>().ger_acc(4 * d, x_in.size(), dpre.data(), x_in.data(),
                                  w.grad_sink().data());
            }
            if (u.requires_grad()) {
                kern<T>().ger_acc(4 * d, h_in.size(), dpre.data(), h_in.data(),
                                  u.grad_sink().data());
            }
            if (x_in.requires_grad()) {
                kern<T>().gemv_t_acc(4 * d, x_in.size(), w.data(), dpre.data(),
                                     x_in.grad_sink().data());
            }
            if (h_in.requires_grad()) {
                kern<T>().gemv_t_acc(4 * d, h_in.size(), u.data(), dpre.data(),
                                     h_in.grad_sink().data());
            }
        });
    return {slice(tape, both, 0, d), slice(tape, both, d, d)};
}

template <typename T>
Tensor<T>& cosine_similarity(Tape<T>& tape, const Tensor<T>& u, const Tensor<T>& v) {
    require(u.size() == v.size(), "cosine_similarity: sizes differ (" + describe(u) + " vs " +
                                      describe(v) + ")");
    return cosine_impl(tape, u, v, 1, u.size(), "cosine_similarity");
}

template <typename T>
Tensor<T>& cosine_rows(Tape<T>& tape, const Tensor<T>& u, const Tensor<T>& rows) {
    require(rows.rank() == 2 && rows.dim(1) == u.size(),
            "cosine_rows: rows " + describe(rows) + " incompatible with vector " + describe(u));
    return cosine_impl(tape, u, rows, rows.dim(0), u.size(), "cosine_rows");
}

template <typename T>
Tensor<T>& affine(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weights,
                  const Tensor<T>& bias) {
    require(weights.rank() == 2, "affine: weights must be a matrix, got " + describe(weights));
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    require(input.size() == n, "affine: weights " + describe(weights) + " applied to input " +
                                   describe(input));
    require(bias.size() == m, "affine: bias " + describe(bias) + " for " + std::to_string(m) +
                                  " outputs");
    Tensor<T> out({m}, std::vector<T>(bias.values().begin(), bias.values().end()));
    kern<T>().gemv_acc(m, n, weights.data(), input.data(), out.data());
    return tape.emit("affine", std::move(out), {&input, &weights, &bias},
                     [&input, &weights, &bias, m, n](Tensor<T>& result) {
                         const T* g = result.grad().data();
                         if (bias.requires_grad()) {
                             auto gb = bias.grad_sink();
                             for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
                         }
                         if (weights.requires_grad()) {
                             kern<T>().ger_acc(m, n, g, input.data(), weights.grad_sink().data());
                         }
                         if (input.requires_grad()) {
                             kern<T>().gemv_t_acc(m, n, weights.data(), g,
                                                  input.grad_sink().data());
                         }
                     });
}

template <typename T>
Tensor<T>& embedding_lookup(Tape<T>& tape, const Tensor<T>& table, std::size_t index) {
    require(table.rank() == 2, "embedding_lookup: table must be a matrix");
    if (index >= table.dim(0)) {
        throw IndexError("embedding_lookup: index " + std::to_string(index) +
                         " out of range for " + std::to_string(table.dim(0)) + " rows");
    }
    const std::size_t d = table.dim(1);
    std::vector<T> row(table.data() + index * d, table.data() + (index + 1) * d);
    return tape.emit("embedding_lookup", Tensor<T>({d}, std::move(row)), {&table},
                     [&table, index, d](Tensor<T>& result) {
                         const auto g = result.grad();
                         auto gt = table.grad_sink();
                         for (std::size_t k = 0; k < d; ++k) gt[index * d + k] += g[k];
                     });
}

template <typename T>
const Tensor<T>& dropout(Tape<T>& tape, const Tensor<T>& input, double rate, bool training,
                         Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ContractError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return input;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::vector<T> mask(input.size());
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        mask[i] = rng.uniform() < rate ? T(0) : keep_scale;
        out[i] = input[i] * mask[i];
    }
    return tape.emit("dropout", std::move(out), {&input},
                     [&input, mask = std::move(mask)](Tensor<T>& result) {
                         const auto g = result.grad();
                         auto gx = input.grad_sink();
                         for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
                     });
}

template <typename T>
Tensor<T>& add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    require(a.size() == b.size(), "add: sizes differ (" + describe(a) + " vs " + describe(b) + ")");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return tape.emit("add", std::move(out), {&a, &b}, [&a, &b](Tensor<T>& result) {
        const auto g = result.grad();
        if (a.requires_grad()) {
            auto ga = a.grad_sink();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            auto gb = b.grad_sink();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
        }
    });
}

template <typename T>
Tensor<T>& scale(Tape<T>& tape, const Tensor<T>& input, T factor) {
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = factor * input[i];
    return tape.emit("scale", std::move(out), {&input}, [&input, factor](Tensor<T>& result) {
        const auto g = result.grad();
        auto gx = input.grad_sink();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * g[i];
    });
}

template <typename T>
Tensor<T>& concat(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t na = a.size(), nb = b.size();
    std::vector<T> values;
    values.reserve(na + nb);
    values.insert(values.end(), a.values().begin(), a.values().end());
    values.insert(values.end(), b.values().begin(), b.values().end());
    return tape.emit("concat", Tensor<T>({na + nb}, std::move(values)), {&a, &b},
                     [&a, &b, na, nb](Tensor<T>& result) {
                         const auto g = result.grad();
                         if (a.requires_grad()) {
                             auto ga = a.grad_sink();
                             for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                         }
                         if (b.requires_grad()) {
                             auto gb = b.grad_sink();
                             for (std::size_t i = 0; i < nb; ++i) gb[i] += g[na + i];
                         }
                     });
}

template <typename T>
Tensor<T>& slice(Tape<T>& tape, const Tensor<T>& input, std::size_t offset, std::size_t length) {
    require(length > 0 && offset + length <= input.size(),
            "slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                ") out of range for " + describe(input));
    std::vector<T> values(input.data() + offset, input.data() + offset + length);
    return tape.emit("slice", Tensor<T>({length}, std::move(values)), {&input},
                     [&input, offset, length](Tensor<T>& result) {
                         const auto g = result.grad();
                         auto gx = input.grad_sink();
                         for (std::size_t i = 0; i < length; ++i) gx[offset + i] += g[i];
                     });
}

template <typename T>
Tensor<T>& sum(Tape<T>& tape, const Tensor<T>& input) {
    T total = 0;
    for (T v : input.values()) total += v;
    return tape.emit("sum", Tensor<T>::scalar(total), {&input}, [&input](Tensor<T>& result) {
        const T g = result.grad()[0];
        auto gx = input.grad_sink();
        for (auto& v : gx) v += g;
    });
}

template <typename T>
Tensor<T>& mean_rows(Tape<T>& tape, const Tensor<T>& rows) {
    require(rows.rank() == 2, "mean_rows: input must be a matrix, got " + describe(rows));
    const std::size_t n = rows.dim(0), d = rows.dim(1);
    Tensor<T> out({d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) out[k] += rows(i, k);
    }
    const T count = static_cast<T>(n);
    for (std::size_t k = 0; k < d; ++k) out[k] /= count;
    return tape.emit("mean_rows", std::move(out), {&rows}, [&rows, n, d, count](Tensor<T>& result) {
        const auto g = result.grad();
        auto gr = rows.grad_sink();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d; ++k) gr[i * d + k] += g[k] / count;
        }
    });
}

template <typename T>
Tensor<T>& weighted_row_sum(Tape<T>& tape, const Tensor<T>& weights, const Tensor<T>& rows) {
    require(rows.rank() == 2 && rows.dim(0) == weights.size(),
            "weighted_row_sum: " + describe(weights) + " weights for rows " + describe(rows));
    const std::size_t n = rows.dim(0), d = rows.dim(1);
    Tensor<T> out({d});
    kern<T>().gemv_t_acc(n, d, rows.data(), weights.data(), out.data());
    return tape.emit("weighted_row_sum", std::move(out), {&weights, &rows},
                     [&weights, &rows, n, d](Tensor<T>& result) {
                         const T* g = result.grad().data();
                         if (weights.requires_grad()) {
                             kern<T>().gemv_acc(n, d, rows.data(), g, weights.grad_sink().data());
                         }
                         if (rows.requires_grad()) {
                             kern<T>().ger_acc(n, d, weights.data(), g, rows.grad_sink().data());
                         }
                     });
}

template <typename T>
Tensor<T>& softmax(Tape<T>& tape, const Tensor<T>& input) {
    const std::size_t n = input.size();
    T peak = input[0];
    for (std::size_t i = 1; i < n; ++i) peak = std::max(peak, input[i]);
    Tensor<T> out(input.shape());
    T total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(input[i] - peak);
        total += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= total;
    return tape.emit("softmax", std::move(out), {&input}, [&input, n](Tensor<T>& result) {
        const auto g = result.grad();
        T dot = 0;
        for (std::size_t i = 0; i < n; ++i) dot += g[i] * result[i];
        auto gx = input.grad_sink();
        for (std::size_t i = 0; i < n; ++i) gx[i] += result[i] * (g[i] - dot);
    });
}

template <typename T>
Tensor<T>& detach(Tape<T>& tape, const Tensor<T>& input) {
    return tape.constant(Tensor<T>(input.shape(),
                                   std::vector<T>(input.values().begin(), input.values().end())));
}

template <typename T>
Tensor<T>& binary_cross_entropy(Tape<T>& tape, const Tensor<T>& predictions,
                                std::span<const T> targets, double clamp) {
    require(predictions.size() == targets.size(),
            "binary_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                describe(predictions) + " predictions");
    const T lo = static_cast<T>(clamp);
    const T hi = T(1) - lo;
    const std::size_t n = predictions.size();
    std::vector<T> clamped(n);
    std::vector<char> inside(n);
    T total = 0;
    {
        BranchRecorder branches(tape);
        for (std::size_t i = 0; i < n; ++i) {
            const T p = predictions[i];
            inside[i] = p >= lo && p <= hi;
            clamped[i] = std::clamp(p, lo, hi);
            const T y = targets[i];
            total += y * std::log(clamped[i]) + (T(1) - y) * std::log(T(1) - clamped[i]);
            branches.push(inside[i]);
        }
    }
    std::vector<T> y(targets.begin(), targets.end());
    return tape.emit(
        "binary_cross_entropy", Tensor<T>::scalar(-total), {&predictions},
        [&predictions, clamped = std::move(clamped), inside = std::move(inside),
         y = std::move(y)](Tensor<T>& result) {
            const T g = result.grad()[0];
            auto gp = predictions.grad_sink();
            for (std::size_t i = 0; i < gp.size(); ++i) {
                if (!inside[i]) continue;
                const T p = clamped[i];
                gp[i] += -g * (y[i] / p - (T(1) - y[i]) / (T(1) - p));
            }
        });
}

template <typename T>
Tensor<T>& squared_error(Tape<T>& tape, const Tensor<T>& input, std::span<const T> targets) {
    require(input.size() == targets.size(), "squared_error: " + std::to_string(targets.size()) +
                                                " targets for " + describe(input));
    T total = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const T diff = targets[i] - input[i];
        total += diff * diff;
    }
    std::vector<T> y(targets.begin(), targets.end());
    return tape.emit("squared_error", Tensor<T>::scalar(total), {&input},
                     [&input, y = std::move(y)](Tensor<T>& result) {
                         const T g = result.grad()[0];
                         auto gx = input.grad_sink();
                         for (std::size_t i = 0; i < gx.size(); ++i) {
                             gx[i] += -T(2) * g * (y[i] - input[i]);
                         }
                     });
}

template <typename T>
Tensor<T>& add_scaled(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, T factor) {
    require(a.size() == 1 && b.size() == 1, "add_scaled: operands must be scalars");
    return tape.emit("add_scaled", Tensor<T>::scalar(a[0] + factor * b[0]), {&a, &b},
                     [&a, &b, factor](Tensor<T>& result) {
                         const T g = result.grad()[0];
                         if (a.requires_grad()) a.grad_sink()[0] += g;
                         if (b.requires_grad()) b.grad_sink()[0] += factor * g;
                     });
}

#define PMN_INSTANTIATE_OPS(T)                                                                   \
    template Tensor<T>& conv1d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T>& relu(Tape<T>&, const Tensor<T>&);                                        \
    template Tensor<T>& sigmoid(Tape<T>&, const Tensor<T>&);                                     \
    template Tensor<T>& tanh(Tape<T>&, const Tensor<T>&);                                        \
    template Tensor<T>& global_maxpool(Tape<T>&, const Tensor<T>&);                              \
    template LstmOutput<T> lstm_cell(Tape<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                     const Tensor<T>&, const LstmWeights<T>&);                   \
    template Tensor<T>& cosine_similarity(Tape<T>&, const Tensor<T>&, const Tensor<T>&);         \
    template Tensor<T>& cosine_rows(Tape<T>&, const Tensor<T>&, const Tensor<T>&);               \
    template Tensor<T>& affine(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T>& embedding_lookup(Tape<T>&, const Tensor<T>&, std::size_t);               \
    template const Tensor<T>& dropout(Tape<T>&, const Tensor<T>&, double, bool, Rng&);           \
    template Tensor<T>& add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
    template Tensor<T>& scale(Tape<T>&, const Tensor<T>&, T);                                    \
    template Tensor<T>& concat(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T>& slice(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);             \
    template Tensor<T>& sum(Tape<T>&, const Tensor<T>&);                                         \
    template Tensor<T>& mean_rows(Tape<T>&, const Tensor<T>&);                                   \
    template Tensor<T>& weighted_row_sum(Tape<T>&, const Tensor<T>&, const Tensor<T>&);          \
    template Tensor<T>& softmax(Tape<T>&, const Tensor<T>&);                                     \
    template Tensor<T>& detach(Tape<T>&, const Tensor<T>&);                                      \
    template Tensor<T>& binary_cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const T>,     \
                                             double);                                            \
    template Tensor<T>& squared_error(Tape<T>&, const Tensor<T>&, std::span<const T>);           \
    template Tensor<T>& add_scaled(Tape<T>&, const Tensor<T>&, const Tensor<T>&, T);

PMN_INSTANTIATE_OPS(float)
PMN_INSTANTIATE_OPS(double)

#undef PMN_INSTANTIATE_OPS

}  // namespace pmn::ad
