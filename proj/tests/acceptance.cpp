// Acceptance suite: one line per criterion, nonzero exit iff any non-skipped
// criterion fails. Run through ctest as `acceptance` or directly.

#include <cstring>
#include <iostream>

#include "conicwave/scenarios.hpp"

int main(int argc, char** argv) {
    using namespace cwave;
    AcceptanceOptions opt;
    for (int a = 1; a < argc; ++a) {
        if (std::strcmp(argv[a], "--quick") == 0) opt.quick = true;
        if (std::strcmp(argv[a], "--threads") == 0 && a + 1 < argc)
            worker_threads() = std::atoi(argv[++a]);
    }
    const auto verdicts = verify_all(opt);
    int fails = 0;
    for (const auto& v : verdicts) {
        std::cout << (v.status == "pass"   ? "PASS "
                      : v.status == "fail" ? "FAIL "
                                           : "SKIP ")
                  << v.id << "  measured=" << fmt_g17(v.measured)
                  << "  threshold=" << fmt_g17(v.threshold) << "  [" << int(v.runtime_s * 10) / 10.0
                  << " s]\n";
        if (!v.note.empty()) std::cout << "      " << v.note << "\n";
        if (v.status == "fail") ++fails;
    }
    std::cout << (fails == 0 ? "ACCEPTANCE: all criteria pass\n"
                             : "ACCEPTANCE: " + std::to_string(fails) + " criteria failed\n");
    return fails;
}
