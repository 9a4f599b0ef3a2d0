#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dki/manifest.hpp"
#include "dki/parallel.hpp"
#include "dki/selftest.hpp"

namespace {

int cmd_run(const std::string& manifest_path, const std::string& out_path,
            const dki::Numerics& num) {
    std::ifstream in(manifest_path);
    if (!in) {
        std::cerr << "error: cannot open manifest '" << manifest_path << "'\n";
        return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    dki::RunOutcome rc = dki::run_manifest(ss.str(), num);
    if (!rc.error.empty()) std::cerr << "error: " << rc.error << "\n";
    if (!rc.report_json.empty()) {
        if (out_path.empty()) {
            std::cout << rc.report_json << "\n";
        } else {
            // atomic write: temp file then rename
            std::string tmp = out_path + ".tmp";
            std::ofstream out(tmp, std::ios::trunc);
            out << rc.report_json << "\n";
            out.close();
            if (!out || std::rename(tmp.c_str(), out_path.c_str()) != 0) {
                std::cerr << "error: cannot write report to '" << out_path << "'\n";
                return 4;
            }
        }
    }
    return rc.exit_code;
}

int cmd_selftest(const std::string& filter, int grid, int threads) {
    if (threads > 0) dki::exec::set_threads(threads);
    double scale = grid > 0 ? double(grid) / 64.0 : 1.0;
    auto results = dki::selftest::run_battery(filter, scale);
    // a second, coarser pass shows the convergence headroom
    auto coarse = dki::selftest::run_battery(filter, scale * 0.5);
    bool ok = true;
    std::printf("%-26s %6s  %-13s %-13s %s\n", "criterion", "status", "residual",
                "coarse", "tolerance");
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& c = results[i];
        double cres = i < coarse.size() ? coarse[i].max_residual : 0.0;
        std::printf("%-26s %6s  %-13.3e %-13.3e %.1e\n", c.name.c_str(),
                    c.pass ? "PASS" : "FAIL", c.max_residual, cres, c.tolerance);
        if (!c.detail.empty()) std::printf("    %s\n", c.detail.c_str());
        ok = ok && c.pass;
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured-manifold index calculus engine"};
    app.require_subcommand(1);

    std::string manifest_path, out_path;
    dki::Numerics num;
    auto* run = app.add_subcommand("run", "execute a computation manifest");
    run->add_option("manifest", manifest_path, "manifest file (JSON)")->required();
    run->add_option("--out", out_path, "report output path (default stdout)");
    run->add_option("--grid", num.grid, "circle grid points override");
    run->add_option("--quad", num.quad, "sphere quadrature order override");
    run->add_option("--tol", num.tol, "residual tolerance override");
    run->add_option("--threads", num.threads, "worker thread count");

    std::string filter;
    int st_grid = 0, st_threads = 0;
    auto* st = app.add_subcommand("selftest", "run the built-in verification battery");
    st->add_option("--filter", filter, "run only criteria whose name contains this");
    st->add_option("--grid", st_grid, "scale the battery grids (default 64)");
    st->add_option("--threads", st_threads, "worker thread count");

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand("run")) return cmd_run(manifest_path, out_path, num);
    return cmd_selftest(filter, st_grid, st_threads);
}
