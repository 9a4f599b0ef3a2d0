#pragma once

#include <string>

namespace dki {

// Numeric controls shared by the CLI and the manifest runner. A value of 0
// means "use the built-in default" (or the manifest's own numerics block).
struct Numerics {
    int grid = 0;      // circle points (default 128)
    int quad = 0;      // sphere nodes per panel (default 64; phi = 2*quad)
    int t_quad = 0;    // transgression quadrature nodes (default 32)
    double tol = 0.0;  // residual tolerance (default 1e-6)
    int threads = 0;   // 0 = environment/default
    double spin_offset = 0.0;
};

struct RunOutcome {
    int exit_code = 0;        // 0 ok, 2 parse, 3 validation, 4 numerical, 5 tolerance
    std::string report_json;  // well-formed whenever exit_code != 2
    std::string error;
};

// Parse, validate and execute a manifest. Every request is evaluated at the
// configured numerics and at a coarsened level (half grids), and the report
// carries both plus a Richardson extrapolation.
RunOutcome run_manifest(const std::string& manifest_text, const Numerics& overrides);

// Serialize a double with 17 significant digits (report convention).
std::string format_number(double v);

} // namespace dki
