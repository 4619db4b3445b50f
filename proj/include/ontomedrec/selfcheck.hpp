#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omr {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelfCheckOptions {
    std::uint64_t seed = 1234;
    int random_dags = 25;           // per randomized suite
    double inject_grad_bug = 0.0;   // perturbs one analytic gradient (for testing the checker)
};

// Validation suites behind the `check` command: gradient check, crisp-limit
// soundness, closure/sampler oracles, metric oracles.
std::vector<CheckResult> run_self_checks(const SelfCheckOptions& opts);

std::string format_check_report(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace omr
