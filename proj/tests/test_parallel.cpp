#include <doctest.h>

#include <random>

#include "dki/parallel.hpp"

using namespace dki;

TEST_CASE("pairwise tree sum matches a high precision reference") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> xs(100001);
    long double ref = 0.0L;
    for (auto& x : xs) {
        x = u(rng) * std::pow(10.0, u(rng) * 6.0);
        ref += x;
    }
    double tree = exec::tree_sum(std::span<const double>(xs));
    CHECK(std::abs(tree - double(ref)) <
          1e-12 * std::max(1.0, std::abs(double(ref))) + 1e-6);
}

TEST_CASE("deterministic reduction is bit-identical across thread counts") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> xs(65537);
    for (auto& x : xs) x = u(rng);

    auto run = [&](int threads, bool serial_ref) {
        exec::set_threads(threads);
        exec::set_serial_reference(serial_ref);
        double r = exec::det_sum(xs.size(), [&](std::size_t i) {
            return xs[i] * xs[(i * 31) % xs.size()];
        });
        exec::set_serial_reference(false);
        return r;
    };
    double serial = run(1, true);
    double omp1 = run(1, false);
    double omp4 = run(4, false);
    double omp3 = run(3, false);
    exec::set_threads(0);
    CHECK(serial == omp1);
    CHECK(serial == omp4);
    CHECK(serial == omp3);
}

TEST_CASE("parallel_for covers every index exactly once") {
    exec::set_threads(4);
    std::vector<int> hits(10007, 0);
    exec::parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    exec::set_threads(0);
    for (int h : hits) REQUIRE(h == 1);
}
