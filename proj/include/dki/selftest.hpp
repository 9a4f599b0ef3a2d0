#pragma once

#include <string>
#include <vector>

namespace dki::selftest {

struct CriterionResult {
    std::string name;
    bool pass = false;
    double max_residual = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

// Criteria 1-9 of the built-in acceptance battery. `scale` multiplies the
// grid sizes (floor 8); 1.0 is the calibrated default.
std::vector<CriterionResult> run_core(double scale);

// Full battery including the determinism criterion (which re-runs a reduced
// battery at 1 and 4 threads and compares the serialized reports).
std::vector<CriterionResult> run_battery(const std::string& filter = "",
                                         double scale = 1.0);

// Deterministic serialization (no timing fields).
std::string report_json(const std::vector<CriterionResult>& results);

} // namespace dki::selftest
