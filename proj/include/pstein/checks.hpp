// Cross-checks of the chaos algebra, the bounds and the two applications
// against exact values, oracles and Monte Carlo. Shared by `verify` and the
// acceptance suite, which differ only in the plan.

#ifndef PSTEIN_CHECKS_HPP
#define PSTEIN_CHECKS_HPP

#include "pstein/besov.hpp"
#include "pstein/poisson_mc.hpp"
#include "pstein/rgg.hpp"

#include <string>
#include <vector>

namespace pstein {

struct CheckResult
{
    std::string id;
    std::string name;
    bool passed = false;
    bool gating = true;   // non-gating results are reported but never fail a run
    std::string summary;
    double seconds = 0;
    std::vector<EstimatorRow> estimates;
};

struct CheckPlan
{
    std::uint64_t seed = 20240611;
    int workers = 0;

    Index isometry_cases = 50, isometry_reps = 200000, isometry_need = 47;
    Index product_cases = 100;
    Index identity_cases = 100;
    Index fourth_cases = 20, fourth_reps = 1000000, fourth_need = 18;
    Index positivity_cases = 500;
    Index mehler_reps = 200000;
    BesovConfig besov;
    RggPipelineConfig rgg = default_pipeline(Regime::R2);
    bool rgg_against_printed = false;  // gate the covariance on the printed limit instead of the exact one
    Index pair_reps = 200000;

    static CheckPlan full(std::uint64_t seed);
    static CheckPlan quick(std::uint64_t seed);
};

CheckResult check_isometry(const CheckPlan& plan);
CheckResult check_product_formula(const CheckPlan& plan);
CheckResult check_contraction_identity(const CheckPlan& plan);
CheckResult check_fourth_moment(const CheckPlan& plan);
/// Positivity of the fourth-moment gaps and the detailed <= compact ordering.
std::pair<CheckResult, CheckResult> check_positivity_and_ordering(const CheckPlan& plan);
CheckResult check_mehler(const CheckPlan& plan);
CheckResult check_besov(const CheckPlan& plan);
/// The gating result and a diagnostic against the other covariance.
std::pair<CheckResult, CheckResult> check_rgg(const CheckPlan& plan);
CheckResult check_pair_limits(const CheckPlan& plan);

std::vector<CheckResult> run_all_checks(const CheckPlan& plan);

}  // namespace pstein

#endif  // PSTEIN_CHECKS_HPP
