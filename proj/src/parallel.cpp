#include "dki/parallel.hpp"

#include <atomic>
#include <cstdlib>

#ifdef DKI_HAVE_OPENMP
#include <omp.h>
#endif

namespace dki::exec {

namespace {

int initial_threads() {
    if (const char* env = std::getenv("DKI_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
#ifdef DKI_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::atomic<int> g_threads{0};
std::atomic<bool> g_serial_reference{false};

} // namespace

int threads() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n == 0) {
        n = initial_threads();
        g_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

bool serial_reference() { return g_serial_reference.load(std::memory_order_relaxed); }
void set_serial_reference(bool on) { g_serial_reference.store(on, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int nt = threads();
    if (nt <= 1 || n < 2 || serial_reference()) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
#ifdef DKI_HAVE_OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        body(static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

void parallel_for_ranges(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    const int nt = threads();
    if (nt <= 1 || n < 2 || serial_reference()) {
        body(0, n);
        return;
    }
#ifdef DKI_HAVE_OPENMP
    const std::size_t chunks = static_cast<std::size_t>(nt);
#pragma omp parallel num_threads(nt)
    {
#pragma omp for schedule(static)
        for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
            const std::size_t b = (n * c) / chunks;
            const std::size_t e = (n * (c + 1)) / chunks;
            if (b < e) body(b, e);
        }
    }
#else
    body(0, n);
#endif
}

namespace {

template <class T>
T tree_sum_impl(std::span<const T> xs) {
    const std::size_t n = xs.size();
    if (n == 0) return T{};
    if (n == 1) return xs[0];
    const std::size_t half = n / 2;
    return tree_sum_impl(xs.subspan(0, half)) + tree_sum_impl(xs.subspan(half));
}

} // namespace

double tree_sum(std::span<const double> xs) { return tree_sum_impl(xs); }
std::complex<double> tree_sum(std::span<const std::complex<double>> xs) {
    return tree_sum_impl(xs);
}

double det_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
    std::vector<double> buf(n);
    parallel_for(n, [&](std::size_t i) { buf[i] = term(i); });
    return tree_sum(std::span<const double>(buf));
}

std::complex<double> det_sum_c(std::size_t n,
                               const std::function<std::complex<double>(std::size_t)>& term) {
    std::vector<std::complex<double>> buf(n);
    parallel_for(n, [&](std::size_t i) { buf[i] = term(i); });
    return tree_sum(std::span<const std::complex<double>>(buf));
}

} // namespace dki::exec
