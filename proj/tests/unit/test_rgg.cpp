#include "pstein/besov.hpp"
#include "pstein/rgg.hpp"

#include <doctest.h>

#include <cmath>

using namespace pstein;

namespace {

RggConfig config_1d(double lambda, double r, double a = 0.5)
{
    RggConfig c;
    c.lambda = lambda;
    c.half_width = a;
    c.edge_radius_fn = {r, 0.0};
    return c;
}

// lambda^2 |{(x, y) in W_t^2 : |x - y| < r_t}| = lambda^2 (4 a r - r^2) for r <= 2a.
double mean_closed_form(const RggConfig& c, double t)
{
    const double a = c.half_width_at(t), r = c.radius_at(t);
    return c.lambda * c.lambda * (4 * a * r - r * r);
}

}  // namespace

TEST_CASE("regime covariance and sigma")
{
    CHECK(regime_covariance(1, 1, 50, Regime::R1).limit == 1.0);
    CHECK(regime_covariance(1, 1, 1, Regime::R2).limit == doctest::Approx(1.0));
    CHECK(regime_covariance(1, 0.25, 1, Regime::R2).finite == doctest::Approx(0.25));
    CHECK(regime_covariance(0.3, 0.7, 0.01, Regime::R3).limit == doctest::Approx(0.3));
    CHECK(regime_covariance(0.2, 0.2, 1, Regime::R2).limit_corrected == doctest::Approx((4 * std::pow(0.2, 1.5) + 0.4) / 6));
    CHECK_THROWS_AS(regime_covariance(0, 1, 1, Regime::R2), std::invalid_argument);
    CHECK(regime_from_string(to_string(Regime::R3)) == Regime::R3);
    CHECK_THROWS_AS(regime_from_string("R4"), std::invalid_argument);

    const RegimeStats st = regime_stats(config_1d(10, 0.05), Regime::R1);
    CHECK(st.ell1 == doctest::Approx(1.0));
    CHECK(st.psi1 == doctest::Approx(0.1));
    CHECK(st.sigma_sq == doctest::Approx(50.0));
    CHECK(st.sigma_sq_corrected == doctest::Approx(60.0));
}

TEST_CASE("window and edge-set geometry")
{
    for (int d : {1, 2}) {
        RggConfig c = config_1d(20, 0.3);
        c.d = d;
        for (double t : {0.1, 0.35, 0.8}) {
            CHECK(psi(c, t) / psi(c, 1) == doctest::Approx(std::sqrt(t)).epsilon(1e-12));
            CHECK(window_measure(c, t) / window_measure(c, 1) == doctest::Approx(std::sqrt(t)).epsilon(1e-12));
        }
    }
    SUBCASE("clipped disk area against a lattice count")
    {
        RggConfig c = config_1d(1, 1.3, 0.4);
        c.d = 2;
        const double B = 0.8;
        const int m = 2000;
        double cnt = 0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                const double x = -B + (i + 0.5) * 2 * B / m, y = -B + (j + 0.5) * 2 * B / m;
                cnt += x * x + y * y < 1.69 ? 1 : 0;
            }
        CHECK(psi(c, 1) == doctest::Approx(cnt * 4 * B * B / (double(m) * m)).epsilon(1e-3));
        c.edge_radius_fn = {0.2, 0};
        CHECK(psi(c, 1) == doctest::Approx(std::acos(-1.0) * 0.04));
    }
    CHECK_THROWS_AS(regime_stats(config_1d(-1, 0.1), Regime::R1), std::invalid_argument);
    RggConfig bad = config_1d(1, 0.1);
    bad.time_grid = {0.5, 1.5};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("exact kernels in d = 1")
{
    SUBCASE("f1 is 4 lambda r in the interior")
    {
        RggConfig c = config_1d(7, 0.05, 1.0);
        c.time_grid = {1.0};
        const RggKernels k = exact_kernels(c, 4);
        const auto& g = *k.f1.grid();
        for (Index i = 0; i < g.size(); ++i) {
            const double x = g.coords()(i, 0);
            if (std::abs(x) < 0.9) CHECK(k.f1.values()(i, 0) == doctest::Approx(4 * 7 * 0.05).epsilon(1e-12));
            if (std::abs(x) > 1 - 0.01) CHECK(k.f1.values()(i, 0) < 4 * 7 * 0.05);
        }
    }
    SUBCASE("cells outside W_t carry no mass")
    {
        RggConfig c = config_1d(7, 0.05);
        c.time_grid = {0.04};
        const RggKernels k = exact_kernels(c, 2);
        const auto& g = *k.f1.grid();
        for (Index i = 0; i < g.size(); ++i)
            if (std::abs(g.coords()(i, 0)) > 0.1 + 0.02) CHECK(k.f1.values()(i, 0) == 0.0);
    }
    SUBCASE("inner products against the continuous geometry")
    {
        const RggConfig c = config_1d(30, 0.04);
        const RggKernels k = exact_kernels(c, 8);
        const ExactMoments em = exact_moments(c);
        const Eigen::MatrixXd f2 = inner(k.f2, k.f2);
        const Eigen::MatrixXd f1 = inner(k.f1, k.f1);
        for (Index i = 0; i < 5; ++i) {
            CHECK(em.mean[i] == doctest::Approx(mean_closed_form(c, c.time_grid[i])).epsilon(1e-12));
            for (Index j = 0; j < 5; ++j) {
                const double t = std::min(c.time_grid[i], c.time_grid[j]);
                const double exact_f2 = em.mean[std::min(i, j)];
                CAPTURE(f2(i, j) / exact_f2);
                CAPTURE((f1(i, j) + 2 * f2(i, j)) / em.cov(i, j));
                // cell averaging loses O(h / r) of the band; the boundary strip costs r / (4 a)
                CHECK(f2(i, j) == doctest::Approx(exact_f2).epsilon(0.08));
                CHECK(exact_f2 == doctest::Approx(30.0 * 30 * psi(c, t) * window_measure(c, t)).epsilon(0.021));
                CHECK(f1(i, j) + 2 * f2(i, j) == doctest::Approx(em.cov(i, j)).epsilon(0.03));
            }
        }
    }
    SUBCASE("variance: isometry against the printed and corrected formulas")
    {
        RggConfig c = config_1d(200, 0.0025);
        c.time_grid = {1.0};
        const ExactMoments em = exact_moments(c);
        std::vector<double> err;
        for (Index m : {2, 4, 8}) {
            const RggKernels k = exact_kernels(c, m);
            err.push_back(std::abs((norm_sq(k.f1) + 2 * norm_sq(k.f2)) / em.cov(0, 0) - 1));
        }
        CHECK(err[1] < 0.6 * err[0]);
        CHECK(err[2] < 0.6 * err[1]);
        CHECK(err[2] < 0.02);
        // 4 a r^2 (8 a - 10 r / 3) lambda^3 + 2 lambda^2 (4 a r - r^2) with a = 1/2
        const double r = 0.0025, l = 200;
        CHECK(em.cov(0, 0) == doctest::Approx(4 * l * l * l * (4 * r * r - 10 * r * r * r / 3) + 2 * l * l * (2 * r - r * r)).epsilon(1e-12));
        const RegimeStats st = regime_stats(c, Regime::R2);
        CHECK(em.cov(0, 0) == doctest::Approx(st.sigma_sq_corrected).epsilon(0.005));
        CHECK(std::abs(em.cov(0, 0) / st.sigma_sq - 1) > 0.1);
    }
}

TEST_CASE("banded kernels match the dense path")
{
    RggConfig c = config_1d(40, 1.0 / 80);
    const Index m = 3;
    const RggKernels dense = exact_kernels(c, m);
    const BandedKernels band = banded_kernels(c, m);
    REQUIRE(band.n == dense.f1.grid()->size());
    ChaosVector x(dense.f1.grid(), 5);
    x.add(dense.f1).add(dense.f2);
    const auto dn = dense_contraction_norms(x);
    const auto bn = banded_contraction_norms(band);
    for (const auto& [q, p, r, l] : seven_contractions()) {
        CAPTURE(q);
        CAPTURE(p);
        CAPTURE(r);
        CAPTURE(l);
        CHECK(bn(q, p, r, l) == doctest::Approx(dn(q, p, r, l)).epsilon(1e-11));
        CHECK(bn(p, q, r, l) == bn(q, p, r, l));
    }
    CHECK((banded_covariance(band) - covariance(x).matrix()).norm() <= 1e-11 * covariance(x).matrix().norm());
    const Eigen::VectorXd sc = Eigen::VectorXd::LinSpaced(5, 0.5, 1.5);
    CHECK(banded_covariance(band.scaled(sc))(1, 3) == doctest::Approx(sc[1] * sc[3] * banded_covariance(band)(1, 3)));
    CHECK_THROWS_AS(bn(2, 2, 2, 2), std::invalid_argument);
}

TEST_CASE("edge counting")
{
    RggConfig c = config_1d(5, 0.1);
    c.time_grid = {0.25, 1.0};
    CHECK(count_edges(c, Eigen::MatrixXd(0, 1)).isZero());
    Eigen::MatrixXd two(2, 1);
    two << 0.0, 0.04;
    CHECK(count_edges(c, two) == Eigen::Vector2d(2, 2));
    two << 0.3, 0.36;  // outside W_{1/4} = [-1/4, 1/4]
    const Eigen::VectorXd e = count_edges(c, two);
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 2.0);
    two << 0.0, 0.08;  // r_{1/4} = 0.1 * 0.25^{1/2}
    CHECK(count_edges(c, two) == Eigen::Vector2d(0, 2));

    SUBCASE("d = 2 cell list agrees with brute force")
    {
        RggConfig c2 = config_1d(300, 0.07);
        c2.d = 2;
        Engine eng(5);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        Eigen::MatrixXd pts(300, 2);
        for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = u(eng);
        Eigen::VectorXd brute = Eigen::VectorXd::Zero(5);
        for (Index k = 0; k < 5; ++k) {
            const double at = c2.half_width_at(c2.time_grid[k]), rt = c2.radius_at(c2.time_grid[k]);
            for (Index i = 0; i < 300; ++i)
                for (Index j = 0; j < 300; ++j)
                    if (i != j && (pts.row(i) - pts.row(j)).norm() < rt && pts.row(i).cwiseAbs().maxCoeff() < at &&
                        pts.row(j).cwiseAbs().maxCoeff() < at)
                        brute[k] += 1;
        }
        CHECK(count_edges(c2, pts) == brute);
    }
    SUBCASE("counts are nondecreasing in t")
    {
        RggConfig c3 = config_1d(100, 0.02);
        Engine eng(9);
        for (int rep = 0; rep < 200; ++rep) {
            const Eigen::VectorXd f = simulate_edge_count(c3, eng);
            for (Index k = 1; k < f.size(); ++k) CHECK(f[k] >= f[k - 1]);
        }
    }
}

TEST_CASE("simulated moments match the exact ones")
{
    const RggConfig c = config_1d(64, 1.0 / 128);
    const ExactMoments em = exact_moments(c);
    const double sigma = std::sqrt(em.cov(4, 4));
    const CovarianceEstimate est = mc_normalized_covariance(c, em.mean, sigma, 40000, {11, 2});
    for (Index i = 0; i < 5; ++i) {
        CHECK(std::abs(est.mean[i] - em.mean[i]) < 4 * est.mean_se[i]);
        for (Index j = 0; j < 5; ++j) CHECK(std::abs(est.cov(i, j) - em.cov(i, j) / (sigma * sigma)) < 4 * est.cov_se(i, j));
    }
    const CovarianceEstimate again = mc_normalized_covariance(c, em.mean, sigma, 5000, {11, 2}, 3);
    const CovarianceEstimate serial = mc_normalized_covariance(c, em.mean, sigma, 5000, {11, 2}, 1);
    CHECK(again.cov == serial.cov);
}

TEST_CASE("pipeline scalings")
{
    SUBCASE("regime 2: bound slope -1/2, ||g1 *_1^0 g1||^2 slope -1")
    {
        RggPipelineConfig pc = default_pipeline(Regime::R2);
        pc.lambdas = {16, 32, 64, 128, 256};
        const RggReport rep = rgg_pipeline(pc, {1, 0});
        CHECK(rep.slope_bound == doctest::Approx(-0.5).epsilon(0.2));
        CHECK(rep.slope_rate_theorem == doctest::Approx(-0.5).epsilon(1e-12));
        std::vector<double> l, n1;
        for (const auto& r : rep.rows) {
            CHECK(r.lambda_psi == doctest::Approx(1.0));
            CHECK(r.m2 == doctest::Approx(0.537).epsilon(0.03));
            CHECK(r.cov_term_corrected < 0.3 * r.cov_term_printed);
            l.push_back(r.lambda);
            n1.push_back(r.norms[0]);
            for (double v : r.norms) CHECK(std::isfinite(v));
        }
        CHECK(loglog_slope(l, n1) == doctest::Approx(-1.0).epsilon(0.1));
    }
    SUBCASE("regime 1: ||g1 *_1^0 g1||^2 slope -1")
    {
        RggPipelineConfig pc = default_pipeline(Regime::R1);
        pc.lambdas = {64, 128, 256, 512};
        const RggReport rep = rgg_pipeline(pc, {1, 0});
        std::vector<double> l, n1;
        for (const auto& r : rep.rows) {
            l.push_back(r.lambda);
            n1.push_back(r.norms[0]);
        }
        CHECK(loglog_slope(l, n1) == doctest::Approx(-1.0).epsilon(0.1));
    }
    SUBCASE("regime 3 reports both rates")
    {
        RggPipelineConfig pc = default_pipeline(Regime::R3);
        pc.lambdas = {16, 32, 64};
        const RggReport rep = rgg_pipeline(pc, {1, 0});
        for (const auto& r : rep.rows) {
            CHECK(r.lambda_psi < 1);
            CHECK(r.rate_proof < r.rate_theorem);
        }
    }
    SUBCASE("d = 2 runs on the dense path")
    {
        RggPipelineConfig pc;
        pc.d = 2;
        pc.regime = Regime::R1;
        pc.radius = {0.25, 0.0};
        pc.lambdas = {4, 8};
        pc.cells_per_radius = 1;
        pc.time_grid = {0.5, 1.0};
        const RggReport rep = rgg_pipeline(pc, {1, 0});
        for (const auto& r : rep.rows) {
            CHECK(r.m2 == doctest::Approx(1.0).epsilon(0.7));
            CHECK(r.total_bound > 0);
        }
    }
    SUBCASE("time grid must contain 1")
    {
        RggPipelineConfig pc = default_pipeline(Regime::R2);
        pc.time_grid = {0.5};
        CHECK_THROWS_AS(rgg_pipeline(pc, {1, 0}), std::invalid_argument);
    }
}
