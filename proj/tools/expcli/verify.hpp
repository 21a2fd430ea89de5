#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace expcli {

enum class Suite { oracles, invariants, all };

enum class Fault { none, b_sign };

struct CheckResult {
    std::string suite;
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

std::vector<CheckResult> run_verify(Suite suite, Fault fault = Fault::none, unsigned threads = 0);

/// Fixed-width table; returns true iff every check passed.
bool print_checks(std::ostream& os, const std::vector<CheckResult>& checks);

}  // namespace expcli
