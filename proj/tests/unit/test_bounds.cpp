#include "helpers.hpp"
#include "pstein/bounds.hpp"

#include <doctest.h>

#include <set>
#include <tuple>

using namespace pstein;
using namespace testing_support;

TEST_CASE("hs_diff")
{
    CovarianceMatrix a(Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix());
    CovarianceMatrix b(Eigen::Vector2d(0, 1).asDiagonal().toDenseMatrix());
    CHECK(hs_diff(a, a) == 0.0);
    CHECK(hs_diff(a, b) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(hs_diff(a, CovarianceMatrix(Eigen::MatrixXd::Identity(3, 3))), std::invalid_argument);

    std::mt19937_64 rng(31);
    Eigen::MatrixXd m1 = Eigen::MatrixXd::Random(4, 4), m2 = Eigen::MatrixXd::Random(4, 4);
    const CovarianceMatrix s1(m1 * m1.transpose()), s2(m2 * m2.transpose());
    double loop = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) loop += std::pow(s1.matrix()(i, j) - s2.matrix()(i, j), 2);
    CHECK(hs_diff(s1, s2) == doctest::Approx(std::sqrt(loop)).epsilon(1e-13));
}

TEST_CASE("radicand clamping")
{
    CHECK(checked_sqrt(-5e-10, "x") == 0.0);
    CHECK(checked_sqrt(4.0, "x") == 2.0);
    CHECK_THROWS_AS(checked_sqrt(-1e-6, "x"), NegativeRadicandError);
}

TEST_CASE("four-moment bound")
{
    std::mt19937_64 rng(32);
    SUBCASE("single first-order chaos carries the 1/4 coefficient")
    {
        auto g = random_grid(4, rng);
        ChaosVector x(g, 2);
        x.add(random_kernel(g, 1, 2, rng));
        const auto rep = four_moment_bound(x, covariance(x));
        CHECK(rep.covariance_term == 0.0);
        bool found = false;
        for (const auto& t : rep.per_pair_terms)
            if (t.kind == "gap" && t.q == 1) {
                found = true;
                CHECK(t.coefficient == 0.25);
            }
        CHECK(found);
        CHECK(rep.split_gap == doctest::Approx(rep.exact_gap).epsilon(1e-10));
    }
    SUBCASE("vanishing gaps and matching covariance give zero")
    {
        auto g = random_grid(3, rng);
        ChaosVector x(g, 1);
        x.add(Kernel(g, 2, 1));
        const auto rep = four_moment_bound(x, covariance(x));
        CHECK(rep.total_detailed() == 0.0);
        CHECK(rep.total_compact() == 0.0);
    }
    SUBCASE("detailed form never exceeds the compact form")
    {
        for (int trial = 0; trial < 30; ++trial) {
            auto g = random_grid(3, rng, 0.05, 2.0);
            const ChaosVector x = random_chaos(g, 1 + trial % 3, 1 + trial % 2, rng);
            const auto rep = four_moment_bound(x, CovarianceMatrix(Eigen::MatrixXd::Identity(x.k_dim(), x.k_dim())));
            CHECK(rep.moment_term_detailed <= rep.moment_term_compact + 1e-9);
        }
    }
    SUBCASE("monotone in the covariance mismatch")
    {
        auto g = random_grid(3, rng);
        const ChaosVector x = random_chaos(g, 2, 2, rng);
        const Eigen::MatrixXd S = covariance(x).matrix();
        double prev_d = -1, prev_c = -1, prev_k = -1;
        for (double eps : {0.0, 0.1, 0.5, 2.0}) {
            const CovarianceMatrix Sp(S + eps * Eigen::MatrixXd::Identity(2, 2));
            const auto four = four_moment_bound(x, Sp);
            const auto con = contraction_bound(x, Sp);
            CHECK(four.total_detailed() > prev_d);
            CHECK(four.total_compact() > prev_c);
            CHECK(con.total_contraction() > prev_k);
            prev_d = four.total_detailed();
            prev_c = four.total_compact();
            prev_k = con.total_contraction();
        }
    }
}

TEST_CASE("contraction bound")
{
    std::mt19937_64 rng(33);
    SUBCASE("first-order chaos: beta is ||f *_1^0 f||^2, which equals the exact gap")
    {
        auto g = random_grid(5, rng);
        ChaosVector x(g, 3);
        const Kernel f = random_kernel(g, 1, 3, rng);
        x.add(f);
        const auto rep = contraction_bound(x, covariance(x));
        double loop = 0;
        for (Index a = 0; a < 5; ++a) loop += g->weights()[a] * std::pow(f.values().row(a).squaredNorm(), 2);
        CHECK(rep.beta == doctest::Approx(loop).epsilon(1e-12));
        CHECK(rep.beta == doctest::Approx(rep.exact_gap).epsilon(1e-10));
        int c_terms = 0;
        for (const auto& t : rep.per_pair_terms) c_terms += t.kind == "c";
        CHECK(c_terms == 1);
    }
    SUBCASE("orders one and two need exactly seven contraction norms")
    {
        auto g = random_grid(3, rng);
        const ChaosVector x = random_chaos(g, 2, 1, rng);
        std::set<std::tuple<int, int, int, int>> asked;
        const auto dense = dense_contraction_norms(x);
        contraction_bound_from_norms({1, 2}, 1.0, 0.0, [&](int q, int p, int r, int l) {
            asked.emplace(std::min(q, p), std::max(q, p), r, l);
            return dense(q, p, r, l);
        });
        const std::set<std::tuple<int, int, int, int>> expect{{1, 2, 1, 1}, {2, 2, 1, 1}, {1, 1, 1, 0}, {1, 2, 1, 0},
                                                             {2, 2, 1, 0}, {2, 2, 2, 0}, {2, 2, 2, 1}};
        CHECK(asked == expect);
    }
    SUBCASE("disjoint supports kill identified cross terms")
    {
        auto g = random_grid(4, rng);
        Eigen::MatrixXd v1 = Eigen::MatrixXd::Zero(4, 1);
        v1(0, 0) = 1.3;
        Eigen::MatrixXd v2 = Eigen::MatrixXd::Zero(16, 1);
        v2(flat_index(std::array<Index, 2>{1, 2}, 4), 0) = 0.7;
        v2(flat_index(std::array<Index, 2>{2, 1}, 4), 0) = 0.7;
        ChaosVector x(g, 1);
        x.add(Kernel(g, 1, 1, v1));
        x.add(Kernel(g, 2, 1, v2, true));
        const auto rep = contraction_bound(x, covariance(x));
        for (const auto& t : rep.per_pair_terms)
            if ((t.kind == "a" || t.kind == "c") && t.q != t.p) CHECK(t.value == 0.0);
    }
    SUBCASE("beta dominates the fourth-moment gap and scales with c^4")
    {
        for (int trial = 0; trial < 20; ++trial) {
            auto g = random_grid(3, rng, 0.05, 2.0);
            const ChaosVector x = random_chaos(g, 1 + trial % 3, 1 + trial % 2, rng);
            const auto rep = contraction_bound(x, covariance(x));
            CHECK(rep.beta >= rep.split_gap * (1 - 1e-12));
            const auto rep2 = contraction_bound(x.scaled(2.0), covariance(x.scaled(2.0)));
            CHECK(rep2.beta == doctest::Approx(16 * rep.beta).epsilon(1e-12));
            CHECK(rep2.m2 == doctest::Approx(4 * rep.m2).epsilon(1e-12));
        }
    }
    SUBCASE("printed constants")
    {
        CHECK(four_moment_constant(1, 2.0) == doctest::Approx(0.25 + std::sqrt(4.0 * 1 * 1 * 2.0)));
        CHECK(contraction_constant(1, 2.0) == doctest::Approx(0.25 + std::sqrt(2.0 * 1 * 1 * 2.0)));
        CHECK(contraction_constant(2, 1.0) == doctest::Approx(1.5 + std::sqrt(16.0 * 2 * 5)));
    }
}
