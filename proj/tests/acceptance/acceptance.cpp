// Acceptance suite: one PASS/FAIL line per criterion, INFO for diagnostics.
// Exit status is nonzero when any criterion fails.

#include "pstein/checks.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv)
{
    std::uint64_t seed = 20240611;
    if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);

    pstein::CheckPlan plan = pstein::CheckPlan::full(seed);
    plan.rgg_against_printed = true;

    int failed = 0;
    auto report = [&](const pstein::CheckResult& r) {
        const char* tag = !r.gating ? "INFO" : r.passed ? "PASS" : "FAIL";
        if (r.gating && !r.passed) ++failed;
        std::printf("%s %s: %s -- %s [%.1f s]\n", tag, r.id.c_str(), r.name.c_str(), r.summary.c_str(), r.seconds);
        std::fflush(stdout);
    };

    report(pstein::check_isometry(plan));
    report(pstein::check_product_formula(plan));
    report(pstein::check_contraction_identity(plan));
    report(pstein::check_fourth_moment(plan));
    const auto [pos, ord] = pstein::check_positivity_and_ordering(plan);
    report(pos);
    report(ord);
    report(pstein::check_mehler(plan));
    report(pstein::check_besov(plan));
    const auto [rgg, rgg_info] = pstein::check_rgg(plan);
    report(rgg);
    report(rgg_info);
    report(pstein::check_pair_limits(plan));

    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
