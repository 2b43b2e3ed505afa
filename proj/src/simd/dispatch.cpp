#include <atomic>
#include <cstdlib>
#include <string>

#include "pmn/common/error.hpp"
#include "pmn/simd/kernels.hpp"

namespace pmn::simd {
namespace {

// PMN_SIMD=scalar forces the reference kernels.
Backend detect() {
    const char* forced = std::getenv("PMN_SIMD");
    if (forced && std::string_view(forced) == "scalar") return Backend::scalar;
    return avx2_available() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& active() {
    static std::atomic<Backend> backend{detect()};
    return backend;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
    if (backend == Backend::avx2 && !avx2_available()) {
        throw ConfigError("AVX2 kernels requested but this CPU does not support AVX2");
    }
    active().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
    return backend == Backend::avx2 ? "avx2" : "scalar";
}

Backend parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    throw ConfigError("unknown SIMD backend '" + std::string(name) + "'");
}

template <typename T>
const KernelTable<T>& kernels(Backend backend) {
    return backend == Backend::avx2 ? detail::avx2_table<T>() : detail::scalar_table<T>();
}

template <typename T>
const KernelTable<T>& kernels() {
    return kernels<T>(active_backend());
}

template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();
template const KernelTable<float>& kernels<float>(Backend);
template const KernelTable<double>& kernels<double>(Backend);

}  // namespace pmn::simd
