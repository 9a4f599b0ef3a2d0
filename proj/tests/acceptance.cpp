#include <cstdio>
#include "dki/selftest.hpp"
int main() {
    auto results = dki::selftest::run_battery();
    bool ok = true;
    for (auto& c : results) {
        std::printf("%s %-26s residual %.3e (tol %.1e) %s\n",
                    c.pass ? "PASS" : "FAIL", c.name.c_str(), c.max_residual,
                    c.tolerance, c.detail.c_str());
        ok = ok && c.pass;
    }
    return ok ? 0 : 1;
}
