// Compiled with -mavx2 only (no -mfma): products and sums stay separately
// rounded so results match the scalar kernels bit for bit.

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "pmn/simd/kernels.hpp"

namespace pmn::simd::detail {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
    using reg = __m256;
    static constexpr std::size_t width = 8;
    static reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
    static reg broadcast(float x) { return _mm256_set1_ps(x); }
    static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
    static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
    static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
    static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
    // Lane l reads p[l * stride].
    static reg gather(const float* p, std::size_t stride) {
        const int s = static_cast<int>(stride);
        const __m256i idx = _mm256_setr_epi32(0, s, 2 * s, 3 * s, 4 * s, 5 * s, 6 * s, 7 * s);
        return _mm256_i32gather_ps(p, idx, 4);
    }
};

template <>
struct Vec<double> {
    using reg = __m256d;
    static constexpr std::size_t width = 4;
    static reg load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
    static reg broadcast(double x) { return _mm256_set1_pd(x); }
    static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
    static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
    static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
    static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
    static reg gather(const double* p, std::size_t stride) {
        const int s = static_cast<int>(stride);
        const __m128i idx = _mm_setr_epi32(0, s, 2 * s, 3 * s);
        return _mm256_i32gather_pd(p, idx, 8);
    }
};

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    using V = Vec<T>;
    const auto a = V::broadcast(alpha);
    std::size_t i = 0;
    for (; i + V::width <= n; i += V::width) {
        V::store(y + i, V::add(V::load(y + i), V::mul(a, V::load(x + i))));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    using V = Vec<T>;
    constexpr std::size_t w = V::width;
    constexpr std::size_t tile = 2 * w;
    std::size_t i = 0;
    // 4 x (2 vectors) register tile.
    for (; i + 4 <= m; i += 4) {
        std::size_t j = 0;
        for (; j + tile <= n; j += tile) {
            typename V::reg acc[4][2];
            for (int r = 0; r < 4; ++r) {
                acc[r][0] = V::load(c + (i + r) * n + j);
                acc[r][1] = V::load(c + (i + r) * n + j + w);
            }
            for (std::size_t p = 0; p < k; ++p) {
                const auto b0 = V::load(b + p * n + j);
                const auto b1 = V::load(b + p * n + j + w);
                for (int r = 0; r < 4; ++r) {
                    const auto av = V::broadcast(a[(i + r) * k + p]);
                    acc[r][0] = V::add(acc[r][0], V::mul(av, b0));
                    acc[r][1] = V::add(acc[r][1], V::mul(av, b1));
                }
            }
            for (int r = 0; r < 4; ++r) {
                V::store(c + (i + r) * n + j, acc[r][0]);
                V::store(c + (i + r) * n + j + w, acc[r][1]);
            }
        }
        for (; j + w <= n; j += w) {
            typename V::reg acc[4];
            for (int r = 0; r < 4; ++r) acc[r] = V::load(c + (i + r) * n + j);
            for (std::size_t p = 0; p < k; ++p) {
                const auto b0 = V::load(b + p * n + j);
                for (int r = 0; r < 4; ++r) {
                    acc[r] = V::add(acc[r], V::mul(V::broadcast(a[(i + r) * k + p]), b0));
                }
            }
            for (int r = 0; r < 4; ++r) V::store(c + (i + r) * n + j, acc[r]);
        }
        for (; j < n; ++j) {
            for (int r = 0; r < 4; ++r) {
                T acc = c[(i + r) * n + j];
                for (std::size_t p = 0; p < k; ++p) acc += a[(i + r) * k + p] * b[p * n + j];
                c[(i + r) * n + j] = acc;
            }
        }
    }
    for (; i < m; ++i) {
        std::size_t j = 0;
        for (; j + w <= n; j += w) {
            auto acc = V::load(c + i * n + j);
            for (std::size_t p = 0; p < k; ++p) {
                acc = V::add(acc, V::mul(V::broadcast(a[i * k + p]), V::load(b + p * n + j)));
            }
            V::store(c + i * n + j, acc);
        }
        for (; j < n; ++j) {
            T acc = c[i * n + j];
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

template <typename T>
void gemv_acc(std::size_t rows, std::size_t cols, const T* a, const T* x, T* y) {
    using V = Vec<T>;
    std::size_t r = 0;
    if (cols * V::width < static_cast<std::size_t>(INT32_MAX)) {
        for (; r + V::width <= rows; r += V::width) {
            auto acc = V::load(y + r);
            const T* block = a + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                acc = V::add(acc, V::mul(V::gather(block + c, cols), V::broadcast(x[c])));
            }
            V::store(y + r, acc);
        }
    }
    for (; r < rows; ++r) {
        T acc = y[r];
        const T* arow = a + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += arow[c] * x[c];
        y[r] = acc;
    }
}

template <typename T>
void gemv_t_acc(std::size_t rows, std::size_t cols, const T* a, const T* x, T* y) {
    using V = Vec<T>;
    constexpr std::size_t w = V::width;
    std::size_t c = 0;
    for (; c + 4 * w <= cols; c += 4 * w) {
        typename V::reg acc[4];
        for (int q = 0; q < 4; ++q) acc[q] = V::load(y + c + q * w);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto xr = V::broadcast(x[r]);
            const T* arow = a + r * cols + c;
            for (int q = 0; q < 4; ++q) acc[q] = V::add(acc[q], V::mul(V::load(arow + q * w), xr));
        }
        for (int q = 0; q < 4; ++q) V::store(y + c + q * w, acc[q]);
    }
    for (; c + w <= cols; c += w) {
        auto acc = V::load(y + c);
        for (std::size_t r = 0; r < rows; ++r) {
            acc = V::add(acc, V::mul(V::load(a + r * cols + c), V::broadcast(x[r])));
        }
        V::store(y + c, acc);
    }
    for (; c < cols; ++c) {
        T acc = y[c];
        for (std::size_t r = 0; r < rows; ++r) acc += a[r * cols + c] * x[r];
        y[c] = acc;
    }
}

template <typename T>
void ger_acc(std::size_t rows, std::size_t cols, const T* x, const T* y, T* a) {
    using V = Vec<T>;
    for (std::size_t r = 0; r < rows; ++r) {
        const T xr = x[r];
        const auto xv = V::broadcast(xr);
        T* arow = a + r * cols;
        std::size_t c = 0;
        for (; c + V::width <= cols; c += V::width) {
            V::store(arow + c, V::add(V::load(arow + c), V::mul(xv, V::load(y + c))));
        }
        for (; c < cols; ++c) arow[c] += xr * y[c];
    }
}

template <typename T>
void adam(std::size_t n, T* param, const T* grad, T* m, T* v, T beta1, T beta2, T lr, T eps, T bc1,
          T bc2) {
    using V = Vec<T>;
    const T one_minus_b1 = T(1) - beta1;
    const T one_minus_b2 = T(1) - beta2;
    const auto b1 = V::broadcast(beta1), b2 = V::broadcast(beta2);
    const auto omb1 = V::broadcast(one_minus_b1), omb2 = V::broadcast(one_minus_b2);
    const auto lrv = V::broadcast(lr), epsv = V::broadcast(eps);
    const auto c1 = V::broadcast(bc1), c2 = V::broadcast(bc2);
    std::size_t i = 0;
    for (; i + V::width <= n; i += V::width) {
        const auto g = V::load(grad + i);
        const auto mi = V::add(V::mul(b1, V::load(m + i)), V::mul(omb1, g));
        const auto vi = V::add(V::mul(b2, V::load(v + i)), V::mul(omb2, V::mul(g, g)));
        V::store(m + i, mi);
        V::store(v + i, vi);
        const auto m_hat = V::div(mi, c1);
        const auto v_hat = V::div(vi, c2);
        const auto step = V::div(V::mul(lrv, m_hat), V::add(V::sqrt(v_hat), epsv));
        V::store(param + i, V::sub(V::load(param + i), step));
    }
    for (; i < n; ++i) {
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
const KernelTable<T>& avx2_table() {
    static const KernelTable<T> table{&axpy<T>,    &gemm_acc<T>, &gemv_acc<T>,
                                      &gemv_t_acc<T>, &ger_acc<T>, &adam<T>};
    return table;
}

template const KernelTable<float>& avx2_table<float>();
template const KernelTable<double>& avx2_table<double>();

}  // namespace pmn::simd::detail
