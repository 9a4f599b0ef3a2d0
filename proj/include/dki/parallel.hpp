#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

// Execution layer. Every hot loop in the library goes through parallel_for /
// det_sum so that (a) a serial reference path exists for testing and
// benchmarking, and (b) floating-point reductions use a fixed pairwise tree
// whose result is independent of the thread count.
namespace dki::exec {

// Number of worker threads. 1 = serial. Initialized from DKI_THREADS if set,
// else the OpenMP default (or 1 without OpenMP).
int threads();
void set_threads(int n);

// When true, parallel_for runs the plain serial loop even if threads() > 1.
// The results must be bit-identical either way; tests assert this.
bool serial_reference();
void set_serial_reference(bool on);

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Chunked variant: body(begin, end) on contiguous ranges.
void parallel_for_ranges(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& body);

// Pairwise tree sum over a materialized buffer, always in the same order.
double tree_sum(std::span<const double> xs);
std::complex<double> tree_sum(std::span<const std::complex<double>> xs);

// Deterministic map-reduce: fills a buffer in parallel, reduces serially.
double det_sum(std::size_t n, const std::function<double(std::size_t)>& term);
std::complex<double> det_sum_c(std::size_t n,
                               const std::function<std::complex<double>(std::size_t)>& term);

} // namespace dki::exec
