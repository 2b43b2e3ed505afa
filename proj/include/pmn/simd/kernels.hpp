#pragma once

// Dense arithmetic kernels behind the autodiff engine.
//
// Every kernel has a scalar reference and an AVX2 variant. SIMD lanes only
// ever map to independent output elements, each output accumulates its terms
// in the same ascending order as the scalar loop, and no fused multiply-add
// is used. The two backends therefore produce bit-identical results, which is
// what the equivalence tests assert.

#include <cstddef>
#include <string_view>

namespace pmn::simd {

enum class Backend { scalar, avx2 };

bool avx2_available();
Backend active_backend();
/// Throws pmn::ConfigError when the backend is not supported on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);
Backend parse_backend(std::string_view name);

template <typename T>
struct KernelTable {
    /// y[i] += alpha * x[i]
    void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
    /// C[m x n] += A[m x k] * B[k x n], row-major, k ascending per element.
    void (*gemm_acc)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
    /// y[r] += sum_c A[r, c] * x[c]
    void (*gemv_acc)(std::size_t rows, std::size_t cols, const T* a, const T* x, T* y);
    /// y[c] += sum_r A[r, c] * x[r]
    void (*gemv_t_acc)(std::size_t rows, std::size_t cols, const T* a, const T* x, T* y);
    /// A[r, c] += x[r] * y[c]
    void (*ger_acc)(std::size_t rows, std::size_t cols, const T* x, const T* y, T* a);
    /// One bias-corrected Adam update; bc1 = 1 - beta1^t, bc2 = 1 - beta2^t.
    void (*adam)(std::size_t n, T* param, const T* grad, T* m, T* v, T beta1, T beta2, T lr, T eps,
                 T bc1, T bc2);
};

template <typename T>
const KernelTable<T>& kernels();

template <typename T>
const KernelTable<T>& kernels(Backend backend);

namespace detail {
template <typename T>
const KernelTable<T>& scalar_table();
template <typename T>
const KernelTable<T>& avx2_table();
}  // namespace detail

}  // namespace pmn::simd
