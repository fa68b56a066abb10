#include "helpers.hpp"

#include <doctest.h>

#include <set>

using namespace pstein;
using namespace testing_support;

TEST_CASE("exact combinatorics")
{
    CHECK(to_string(factorial(0)) == "1");
    CHECK(to_string(factorial(20)) == "2432902008176640000");
    CHECK(to_string(factorial(25)) == "15511210043330985984000000");
    CHECK(to_string(binomial(8, 3)) == "56");
    CHECK(to_string(binomial(60, 30)) == "118264581564861424");
    CHECK_THROWS_AS(factorial(40), std::overflow_error);
    CHECK_THROWS_AS(binomial(3, 4), std::invalid_argument);
}

TEST_CASE("product_expansion terms")
{
    auto key = [](const ExpansionTerm& t) { return std::tuple(t.r, t.l, to_string(t.coefficient), t.result_order); };
    std::set<std::tuple<int, int, std::string, int>> got;
    for (const auto& t : product_expansion(1, 1)) got.insert(key(t));
    CHECK(got == std::set<std::tuple<int, int, std::string, int>>{{0, 0, "1", 2}, {1, 0, "1", 1}, {1, 1, "1", 0}});

    got.clear();
    for (const auto& t : product_expansion(2, 1)) got.insert(key(t));
    CHECK(got == std::set<std::tuple<int, int, std::string, int>>{{0, 0, "1", 3}, {1, 0, "2", 2}, {1, 1, "2", 1}});

    for (int q = 1; q <= 4; ++q)
        for (int p = 1; p <= 4; ++p)
            for (const auto& t : product_expansion(q, p)) {
                CHECK(t.coefficient >= 1);
                CHECK(t.result_order == q + p - t.r - t.l);
            }
}

TEST_CASE("bound coefficients")
{
    CHECK(to_string(coeff_a(2, 1, 1)) == "8");
    CHECK(to_string(coeff_c(1, 1, 0, 0, 1, 1)) == "1");
    CHECK(to_string(coeff_b(3, 2, 1)) == "72");
    // a - b is the second summand of a.
    for (int p = 1; p <= 3; ++p)
        for (int q = 1; q <= 3; ++q)
            for (int r = 0; r <= std::min(p, q); ++r) {
                const BigCount rest = factorial(r) * factorial(r) * binomial(q, r) * binomial(q, r) * binomial(p, r) *
                                      binomial(p, r) * factorial(std::abs(p - q));
                CHECK(coeff_a(p, q, r) - coeff_b(p, q, r) == rest);
            }
    // c at (p, q, l, m, r, s) = (2, 2, 1, 0, 1, 2): 1*2*2*1*2*1*1*1*2! = 16
    CHECK(to_string(coeff_c(2, 2, 1, 0, 1, 2)) == "16");
    CHECK_THROWS_AS(coeff_c(1, 1, 2, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("index set I")
{
    CHECK(index_set_I(1, 1) == std::vector<IndexTuple>{{1, 1, 0, 0}});
    for (int q = 1; q <= 3; ++q)
        for (int p = 1; p <= 3; ++p) {
            const int mn = std::min(q, p);
            std::set<IndexTuple> brute;
            for (int code = 0; code < 10000; ++code) {
                const int r = code % 10, s = code / 10 % 10, l = code / 100 % 10, m = code / 1000;
                if (r > mn || s > mn || l > r || m > s || r + l != s + m) continue;
                if (r == 0 && s == 0 && l == 0 && m == 0) continue;
                if (r == mn && s == mn && l == mn && m == mn) continue;
                brute.insert({r, s, l, m});
            }
            const auto got = index_set_I(q, p);
            CHECK(std::set<IndexTuple>(got.begin(), got.end()) == brute);
            CHECK(got.size() == brute.size());
        }
    const auto i22 = index_set_I(2, 2);
    CHECK(std::set<IndexTuple>(i22.begin(), i22.end()) ==
          std::set<IndexTuple>{{1, 1, 0, 0}, {1, 1, 1, 1}, {1, 2, 1, 0}, {2, 1, 0, 1}, {2, 2, 0, 0}, {2, 2, 1, 1}});
}

TEST_CASE("ChaosVector validation")
{
    std::mt19937_64 rng(10);
    auto g = random_grid(3, rng);
    ChaosVector x(g, 2);
    CHECK_THROWS_AS(x.add(random_kernel(g, 2, 3, rng)), std::invalid_argument);
    CHECK_THROWS_AS(x.add(random_kernel(g, 2, 2, rng, false, false)), std::invalid_argument);
    CHECK_THROWS_AS(x.add(random_kernel(random_grid(3, rng), 1, 2, rng)), std::invalid_argument);
    x.add(random_kernel(g, 2, 2, rng));
    CHECK(x.max_order() == 2);
    CHECK(x.centered());
}

TEST_CASE("second moment and covariance")
{
    auto one = make_grid(MeasureGrid::uniform(1, 0.7));
    ChaosVector x(one, 1);
    x.add(Kernel(one, 1, 1, Eigen::MatrixXd::Ones(1, 1)));
    CHECK(second_moment(x) == doctest::Approx(0.7));

    std::mt19937_64 rng(11);
    auto g = random_grid(4, rng);
    const ChaosVector y = random_chaos(g, 3, 3, rng);
    const CovarianceMatrix s = covariance(y);
    CHECK(s.min_eigenvalue() >= -1e-10);
    CHECK(s.trace() == doctest::Approx(second_moment(y)));
    double additive = 0;
    for (const auto& [q, f] : y.kernels()) additive += to_double(factorial(q)) * norm_sq(f);
    CHECK(second_moment(y) == doctest::Approx(additive).epsilon(1e-12));
}

TEST_CASE("fourth moment of a first-order integral on one atom")
{
    // I_1(c 1_a) = c (N - w) with N ~ Poisson(w): E = c^4 (w + 3 w^2).
    for (double w : {0.3, 1.0, 4.5}) {
        const double c = 1.7;
        auto one = make_grid(MeasureGrid::uniform(1, w));
        ChaosVector x(one, 1);
        x.add(Kernel(one, 1, 1, Eigen::MatrixXd::Constant(1, 1, c)));
        const double expect = std::pow(c, 4) * (w + 3 * w * w);
        CHECK(fourth_moment_expansion(x) == doctest::Approx(expect).epsilon(1e-12));
        const auto ms = moment_summary(x);
        CHECK(ms.mixed.at({1, 1}) == doctest::Approx(expect).epsilon(1e-12));
    }
    auto g = make_grid(MeasureGrid::uniform(2, 1.0));
    ChaosVector z(g, 1);
    z.add(Kernel(g, 1, 1));
    CHECK(fourth_moment_expansion(z) == 0.0);
}

TEST_CASE("single-chaos fourth moment: chaos-of-norm route equals c-coefficient route")
{
    std::mt19937_64 rng(12);
    for (int q = 1; q <= 3; ++q)
        for (int k : {1, 2}) {
            auto g = random_grid(4, rng);
            ChaosVector x(g, k);
            x.add(random_kernel(g, q, k, rng));
            const auto ms = moment_summary(x);
            CAPTURE(q);
            CAPTURE(k);
            CHECK(rel_err(ms.m4, ms.mixed.at({q, q})) < 1e-10);
            CHECK(rel_err(ms.true_gap, ms.split_gap) < 1e-10);
            CHECK(ms.true_gap >= -1e-9);
            CHECK(ms.min_pair_gap >= -1e-9);
        }
}

TEST_CASE("positivity on random chaos vectors")
{
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_grid(3, rng, 0.05, 2.0);
        const ChaosVector x = random_chaos(g, 1 + trial % 3, 1 + trial % 2, rng);
        const auto ms = moment_summary(x);
        CHECK(ms.true_gap >= -1e-9);
        CHECK(ms.split_gap >= -1e-9);
        CHECK(ms.min_pair_gap >= -1e-9);
        for (const auto& [q, gq] : ms.gap_q) CHECK(gq >= -1e-9);
    }
}

TEST_CASE("non-symmetrized contraction identity")
{
    std::mt19937_64 rng(14);
    auto g = random_grid(4, rng);
    for (int q = 1; q <= 3; ++q)
        for (int p = 1; p <= 3; ++p) {
            const Kernel f = random_kernel(g, q, 0, rng);
            const Kernel h = random_kernel(g, p, 0, rng);
            const auto [lhs, rhs] = contraction00_identity_check(f, h);
            CAPTURE(q);
            CAPTURE(p);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * lhs);
        }
    // q = p = 1, f = g: both sides are 2 ||f||^4.
    const Kernel f = random_kernel(g, 1, 0, rng);
    const auto [lhs, rhs] = contraction00_identity_check(f, f);
    CHECK(lhs == doctest::Approx(2 * std::pow(norm_sq(f), 2)));
    CHECK(rhs == doctest::Approx(2 * std::pow(norm_sq(f), 2)));
}

TEST_CASE("gamma tilde")
{
    std::mt19937_64 rng(15);
    auto g = random_grid(4, rng);
    const Kernel f = random_kernel(g, 2, 0, rng);
    const ChaosVector gf = gamma_tilde(f, f);
    CHECK(gf.kernel(0).values()(0, 0) == doctest::Approx(2 * 2 * norm_sq(f)).epsilon(1e-12));
    CHECK(norm_sq(gf.kernel(4)) == doctest::Approx(0.0).epsilon(1e-14));

    const Kernel h = random_kernel(g, 2, 0, rng);
    const double efg = 2 * dot(f, h);
    CHECK(gamma_tilde(f, h).kernel(0).values()(0, 0) == doctest::Approx(2 * efg).epsilon(1e-12));
    CHECK(!gamma_tilde(f, random_kernel(g, 1, 0, rng)).has(0));
}

TEST_CASE("moment summary with two orders")
{
    std::mt19937_64 rng(16);
    auto g = random_grid(3, rng);
    const ChaosVector x = random_chaos(g, 2, 2, rng);
    const auto ms = moment_summary(x);
    CHECK(ms.N == 2);
    CHECK(ms.m2 == doctest::Approx(ms.m2_q.at(1) + ms.m2_q.at(2)));
    CHECK(ms.cross.size() == 2);
    CHECK(ms.cross.at({1, 2}) == doctest::Approx(ms.cross.at({2, 1})).epsilon(1e-12));
    // Scaling every kernel by c scales fourth-order quantities by c^4.
    const auto ms2 = moment_summary(x.scaled(2.0));
    CHECK(ms2.m4 == doctest::Approx(16 * ms.m4).epsilon(1e-12));
    CHECK(ms2.split_gap == doctest::Approx(16 * ms.split_gap).epsilon(1e-10));
}
