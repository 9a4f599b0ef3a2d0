// Timing comparison between the serial reference path and the OpenMP path
// for the dominant kernels. Results must agree bit-for-bit; the table prints
// the verification alongside the speedup.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "dki/charforms.hpp"
#include "dki/parallel.hpp"

using namespace dki;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

struct Row {
    std::string name;
    double serial, parallel;
    bool identical;
};

} // namespace

int main(int argc, char** argv) {
    int threads = argc > 1 ? std::atoi(argv[1]) : 4;
    std::vector<Row> rows;

    auto S2 = StructuredManifold::make({SphereSpec{1.0, 128, 256}});
    auto mono = Bundle::monopole(S2, 2);
    auto T3 = StructuredManifold::make(
        {CircleSpec{1.0, 64}, CircleSpec{1.0, 64}, CircleSpec{1.0, 64}});
    auto S1 = StructuredManifold::make({CircleSpec{1.0, 512}});

    auto bench = [&](const std::string& name, const std::function<double()>& fn,
                     int reps) {
        exec::set_threads(1);
        exec::set_serial_reference(true);
        double vs = fn();
        double ts = time_of([&] { (void)fn(); }, reps);
        exec::set_serial_reference(false);
        exec::set_threads(threads);
        double vp = fn();
        double tp = time_of([&] { (void)fn(); }, reps);
        exec::set_threads(0);
        rows.push_back({name, ts, tp, vs == vp});
    };

    bench("chern_form S2 (128x256 caps)",
          [&] { return integrate(chern_form(mono)).coeff(-2).real(); }, 3);

    GradedForm f = GradedForm::sample(T3, [&](int, std::size_t p) {
        double x = T3->axis(0).nodes[T3->coord_of_point(p, 0)];
        return Complex{1.0 + 0.3 * std::cos(2 * 3.14159265358979 * x), 0.0};
    });
    GradedForm g =
        wedge(GradedForm::coordinate(T3, 0), GradedForm::coordinate(T3, 1));
    bench("wedge + d on T3 (64^3)",
          [&] { return exterior_d(wedge(f, g)).max_abs(); }, 3);

    bench("integrate reduction T3",
          [&] { return integrate(wedge(wedge(f, g), GradedForm::coordinate(T3, 2)))
                    .coeff(-2)
                    .real(); },
          5);

    auto a = Bundle::flat_line(S1, {0.2});
    auto b = Bundle::flat_line(S1, {0.8});
    bench("cs_two on S1 (512, 64 t-nodes)",
          [&] { return integrate(cs_two(a, b, 0, 64)).coeff(-2).real(); }, 3);

    std::printf("%-32s %10s %10s %8s %s\n", "kernel", "serial(s)", "omp(s)",
                "speedup", "bitwise");
    for (auto& r : rows)
        std::printf("%-32s %10.4f %10.4f %7.2fx %s\n", r.name.c_str(), r.serial,
                    r.parallel, r.serial / r.parallel,
                    r.identical ? "identical" : "DIFFERS");
    bool ok = true;
    for (auto& r : rows) ok = ok && r.identical;
    return ok ? 0 : 1;
}
