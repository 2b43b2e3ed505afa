#include <cmath>

#include "pmn/simd/kernels.hpp"

namespace pmn::simd::detail {
namespace {

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T aval = a[i * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
        }
    }
}

template <typename T>
void gemv_acc(std::size_t rows, std::size_t cols, const T* a, const T* x, T* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        T acc = y[r];
        const T* arow = a + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += arow[c] * x[c];
        y[r] = acc;
    }
}

template <typename T>
void gemv_t_acc(std::size_t rows, std::size_t cols, const T* a, const T* x, T* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T xr = x[r];
        const T* arow = a + r * cols;
        for (std::size_t c = 0; c < cols; ++c) y[c] += arow[c] * xr;
    }
}

template <typename T>
void ger_acc(std::size_t rows, std::size_t cols, const T* x, const T* y, T* a) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T xr = x[r];
        T* arow = a + r * cols;
        for (std::size_t c = 0; c < cols; ++c) arow[c] += xr * y[c];
    }
}

template <typename T>
void adam(std::size_t n, T* param, const T* grad, T* m, T* v, T beta1, T beta2, T lr, T eps, T bc1,
          T bc2) {
    const T one_minus_b1 = T(1) - beta1;
    const T one_minus_b2 = T(1) - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const T g = grad[i];
        m[i] = beta1 * m[i] + one_minus_b1 * g;
        v[i] = beta2 * v[i] + one_minus_b2 * (g * g);
        const T m_hat = m[i] / bc1;
        const T v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

}  // namespace

template <typename T>
const KernelTable<T>& scalar_table() {
    static const KernelTable<T> table{&axpy<T>,    &gemm_acc<T>, &gemv_acc<T>,
                                      &gemv_t_acc<T>, &ger_acc<T>, &adam<T>};
    return table;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace pmn::simd::detail
