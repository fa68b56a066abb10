#include "helpers.hpp"
#include "pstein/poisson_mc.hpp"

#include <doctest.h>

#include <bit>

using namespace pstein;
using namespace testing_support;

namespace {

// Independent cell-integral oracle: list every point, then sum over subsets
// S of slots integrated against mu (sign (-1)^|S|) and ordered tuples of
// distinct points for the remaining slots.
double point_list_oracle(const Kernel& f, const PointConfiguration& cfg)
{
    const int q = f.order();
    const Index n = f.num_atoms();
    std::vector<Index> points;
    for (Index j = 0; j < n; ++j)
        for (std::int64_t c = 0; c < cfg.counts[j]; ++c) points.push_back(j);
    const Index P = static_cast<Index>(points.size());
    const Eigen::VectorXd& w = f.grid()->weights();

    double total = 0;
    for (unsigned mask = 0; mask < (1u << q); ++mask) {
        const int integrated = std::popcount(mask);
        const double sign = integrated % 2 ? -1.0 : 1.0;
        const int free = q - integrated;
        // Enumerate cell tuples for integrated slots and point tuples for free ones.
        std::vector<Index> slot(q);
        std::vector<int> free_slots, int_slots;
        for (int s = 0; s < q; ++s) ((mask >> s) & 1u ? int_slots : free_slots).push_back(s);
        const Index n_int = int_pow(n, integrated);
        const Index n_free = int_pow(P, free);
        for (Index a = 0; a < n_free; ++a) {
            std::vector<Index> pidx(free);
            Index rest = a;
            for (int s = free - 1; s >= 0; --s) {
                pidx[s] = rest % P;
                rest /= P;
            }
            bool distinct = true;
            for (int i = 0; i < free; ++i)
                for (int j = i + 1; j < free; ++j) distinct &= pidx[i] != pidx[j];
            if (!distinct) continue;
            for (int i = 0; i < free; ++i) slot[free_slots[i]] = points[pidx[i]];
            for (Index b = 0; b < n_int; ++b) {
                const Tuple t = unflatten(b, integrated, n);
                double wt = 1;
                for (int i = 0; i < integrated; ++i) {
                    slot[int_slots[i]] = t[i];
                    wt *= w[t[i]];
                }
                total += sign * wt * f(slot, 0);
            }
        }
    }
    return total;
}

PointConfiguration fixed_cfg(std::vector<std::int64_t> c)
{
    return PointConfiguration{std::move(c)};
}

}  // namespace

TEST_CASE("Poisson sampling")
{
    auto g = make_grid(MeasureGrid::from_weights(Eigen::Vector3d(0.5, 2.0, 1.0)));
    const Index reps = 100000;
    const McStats st = monte_carlo(reps, 5, {7, 0}, [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
        const auto cfg = sample(*g, e);
        for (int j = 0; j < 3; ++j) out[j] = static_cast<double>(cfg.counts[j]);
        out[3] = out[0] * out[1];
        out[4] = static_cast<double>(cfg.total());
    });
    for (int j = 0; j < 3; ++j) CHECK(std::abs(st.mean[j] - g->weights()[j]) <= 4 * std::sqrt(g->weights()[j] / reps));
    const double cov01 = st.mean[3] - st.mean[0] * st.mean[1];
    CHECK(std::abs(cov01) <= 4 * st.std_error()[3]);
    CHECK(std::abs(st.mean[4] - 3.5) <= 4 * std::sqrt(3.5 / reps));

    const auto a = sample(*g, RngSpec{11, 2});
    const auto b = sample(*g, RngSpec{11, 2});
    CHECK(a.counts == b.counts);
}

TEST_CASE("monte carlo is independent of worker count")
{
    auto g = make_grid(MeasureGrid::uniform(4, 0.8));
    auto draw = [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
        const auto cfg = sample(*g, e);
        out[0] = static_cast<double>(cfg.total());
        out[1] = out[0] * out[0];
    };
    const McStats one = monte_carlo(10000, 2, {3, 1}, draw, 1);
    const McStats three = monte_carlo(10000, 2, {3, 1}, draw, 3);
    CHECK(one.n == three.n);
    CHECK((one.mean - three.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((one.m2 - three.m2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("McStats merge equals sequential accumulation")
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    McStats all, a, b;
    for (int i = 0; i < 101; ++i) {
        Eigen::VectorXd x(2);
        x << z(rng), 3 + z(rng);
        all.push(x);
        (i < 40 ? a : b).push(x);
    }
    a.merge(b);
    CHECK((a.mean - all.mean).norm() < 1e-13);
    CHECK((a.m2 - all.m2).norm() < 1e-11);
}

TEST_CASE("multiple integral evaluation")
{
    std::mt19937_64 rng(21);
    auto g = random_grid(3, rng);
    const PointConfiguration cfg = fixed_cfg({2, 0, 3});
    const Eigen::VectorXd eta_hat = cfg.compensated(*g);

    SUBCASE("first order is the compensated sum")
    {
        const Kernel f = random_kernel(g, 1, 0, rng);
        CHECK(eval_multiple_integral(f, cfg)[0] == doctest::Approx(f.values().col(0).dot(eta_hat)));
    }
    SUBCASE("diagonal support is rejected")
    {
        const Kernel f = random_kernel(g, 2, 0, rng, true, false);
        CHECK_THROWS_AS(eval_multiple_integral(f, cfg), DiagonalSupportError);
        CHECK_NOTHROW(eval_cell_integral(f, cfg));
    }
    SUBCASE("symmetrized indicator product")
    {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(9, 1);
        v(flat_index(std::array<Index, 2>{0, 2}, 3), 0) = 1.0;
        const Kernel f = symmetrize(Kernel(g, 2, 0, v));
        CHECK(eval_multiple_integral(f, cfg)[0] == doctest::Approx(eta_hat[0] * eta_hat[2]));
    }
    SUBCASE("fast path, cell expansion and the point-list oracle agree")
    {
        for (int q = 1; q <= 3; ++q) {
            const Kernel off = random_kernel(g, q, 0, rng);
            const Kernel diag = random_kernel(g, q, 0, rng, true, false);
            CAPTURE(q);
            CHECK(eval_multiple_integral(off, cfg)[0] == doctest::Approx(point_list_oracle(off, cfg)).epsilon(1e-11));
            CHECK(eval_cell_integral(diag, cfg)[0] == doctest::Approx(point_list_oracle(diag, cfg)).epsilon(1e-11));
        }
    }
    SUBCASE("K-valued kernels evaluate slice by slice")
    {
        const Kernel f = random_kernel(g, 2, 3, rng, true, false);
        const Eigen::VectorXd all = eval_cell_integral(f, cfg);
        for (Index k = 0; k < 3; ++k) CHECK(all[k] == doctest::Approx(eval_cell_integral(f.slice(k), cfg)[0]));
    }
}

TEST_CASE("isometry and orthogonality by simulation")
{
    std::mt19937_64 rng(22);
    auto g = random_grid(4, rng, 0.2, 0.8);
    const Kernel f2 = random_kernel(g, 2, 0, rng);
    const Kernel d2 = random_kernel(g, 2, 0, rng, true, false);
    const Kernel f1 = random_kernel(g, 1, 0, rng);
    const Index reps = 60000;
    const auto e22 = mc_cross_moment(f2, f2, reps, {5, 0});
    CHECK(std::abs(e22.estimate - 2 * norm_sq(f2)) <= 3.5 * e22.std_error);
    const auto dd = mc_cross_moment(d2, d2, reps, {5, 1});
    CHECK(std::abs(dd.estimate - 2 * norm_sq(d2)) <= 3.5 * dd.std_error);
    const auto e12 = mc_cross_moment(f1, d2, reps, {5, 2});
    CHECK(std::abs(e12.estimate) <= 3.5 * e12.std_error);
    const auto mean = mc_cross_moment(d2, Kernel(g, 0, 0, Eigen::MatrixXd::Ones(1, 1)), reps, {5, 3});
    CHECK(std::abs(mean.estimate) <= 3.5 * mean.std_error);
}

TEST_CASE("thinning")
{
    auto g = make_grid(MeasureGrid::uniform(3, 1.3));
    Engine e = block_engine({9, 0}, 0);
    const PointConfiguration cfg = fixed_cfg({4, 0, 2});
    CHECK(thin_pair(cfg, 0.0, *g, e).counts == cfg.counts);
    CHECK_THROWS_AS(thin_pair(cfg, -1.0, *g, e), std::invalid_argument);

    // Large t: the pair decouples and eta^t is Poisson(mu) again.
    const McStats st = monte_carlo(50000, 2, {9, 1}, [&](Engine& en, Eigen::Ref<Eigen::VectorXd> out) {
        const auto c = sample(*g, en);
        const auto ct = thin_pair(c, 40.0, *g, en);
        out[0] = static_cast<double>(ct.counts[0]);
        out[1] = (out[0] - 1.3) * (static_cast<double>(c.counts[0]) - 1.3);
    });
    CHECK(std::abs(st.mean[0] - 1.3) <= 4 * st.std_error()[0]);
    CHECK(std::abs(st.mean[1]) <= 4 * st.std_error()[1]);
}

TEST_CASE("Mehler eigenvalue and exchangeability")
{
    std::mt19937_64 rng(23);
    auto g = random_grid(4, rng, 0.3, 1.0);
    for (int q = 1; q <= 2; ++q) {
        const Kernel f = random_kernel(g, q, 0, rng);
        const double t = 0.5;
        const auto est = mc_mehler(f, t, 60000, {12, static_cast<std::uint64_t>(q)});
        const double exact = std::exp(-q * t) * to_double(factorial(q)) * norm_sq(f);
        CHECK(std::abs(est.estimate - exact) <= 3.5 * est.std_error);
    }
}

TEST_CASE("pair limits")
{
    std::mt19937_64 rng(24);
    auto g = random_grid(3, rng, 0.3, 1.0);
    const Kernel f = random_kernel(g, 1, 0, rng);
    const auto rows = pair_limit_check(f, {0.2, 0.05}, 60000, {13, 0});
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.drift_limit == doctest::Approx(-norm_sq(f)));
        CHECK(r.square_limit == doctest::Approx(2 * norm_sq(f)));
        // Exact finite-t means: (e^{-qt} - 1)/t E F^2 and 2(1 - e^{-qt})/t E F^2.
        const double drift_t = std::expm1(-r.t) / r.t * norm_sq(f);
        CHECK(std::abs(r.drift.estimate - drift_t) <= 3.5 * r.drift.std_error);
        CHECK(std::abs(r.square.estimate + 2 * drift_t) <= 3.5 * r.square.std_error);
    }
    CHECK_THROWS_AS(pair_limit_check(f, {0.1, 0.2}, 10, {1, 0}), std::invalid_argument);
    const auto zero = pair_limit_check(Kernel(g, 1, 0), {0.1}, 100, {1, 0});
    CHECK(zero[0].drift.estimate == 0.0);
    CHECK(zero[0].square.estimate == 0.0);
}

TEST_CASE("moment estimates against the exact chaos values")
{
    std::mt19937_64 rng(25);
    auto g = random_grid(3, rng, 0.3, 0.9);
    const ChaosVector x = random_chaos(g, 2, 2, rng);
    const auto ms = moment_summary(x);
    const auto est = mc_moments(x, 200000, {14, 0});
    CHECK(std::abs(est.m2 - ms.m2) <= 3.5 * est.m2_se);
    CHECK(std::abs(est.m4 - ms.m4) <= 3.5 * est.m4_se);
    for (Index i = 0; i < 2; ++i) {
        CHECK(std::abs(est.mean[i]) <= 3.5 * est.mean_se[i]);
        for (Index j = 0; j < 2; ++j) CHECK(std::abs(est.S_hat(i, j) - ms.S(i, j)) <= 3.5 * est.S_se(i, j));
    }
}

TEST_CASE("pathwise product formula")
{
    std::mt19937_64 rng(26);
    auto g = random_grid(3, rng);
    for (int q = 1; q <= 3; ++q)
        for (int p = 1; p <= 3; ++p) {
            const Kernel f = random_kernel(g, q, 0, rng);
            const Kernel h = random_kernel(g, p, 0, rng);
            const auto cfg = sample(*g, RngSpec{15, static_cast<std::uint64_t>(q * 4 + p)});
            const auto [lhs, rhs] = product_formula_pathwise_check(f, h, cfg);
            CAPTURE(q);
            CAPTURE(p);
            CHECK(std::abs(lhs - rhs) <= 1e-8 * (1 + std::abs(lhs)));
        }
    const auto cfg = fixed_cfg({1, 2, 0});
    const Kernel f = random_kernel(g, 2, 0, rng);
    const auto [lhs, rhs] = product_formula_pathwise_check(f, Kernel(g, 1, 0), cfg);
    CHECK(lhs == 0.0);
    CHECK(rhs == 0.0);

    // Re-zeroing contractions on diagonals loses the diagonal mass:
    // I_1(1_a)^2 = eta_hat(a)^2 but the re-zeroed expansion gives eta(a).
    Eigen::MatrixXd ind = Eigen::MatrixXd::Zero(3, 1);
    ind(0, 0) = 1.0;
    const Kernel one_a(g, 1, 0, ind);
    const auto c3 = fixed_cfg({3, 0, 0});
    const double eh = 3 - g->weights()[0];
    CHECK(product_formula_pathwise_check(one_a, one_a, c3).first == doctest::Approx(eh * eh));
    CHECK(product_formula_pathwise_check(one_a, one_a, c3).second == doctest::Approx(eh * eh));
    CHECK(product_formula_rezeroed_rhs(one_a, one_a, c3) == doctest::Approx(3.0));
}

TEST_CASE("empirical smooth distance")
{
    Eigen::MatrixXd c(2, 2);
    c << 1.0, 0.3, 0.3, 0.5;
    const CovarianceMatrix cov(c);
    const Eigen::MatrixXd a = gaussian_samples(cov, 40000, {16, 0});
    const Eigen::MatrixXd b = gaussian_samples(cov, 40000, {16, 1});
    const Eigen::MatrixXd emp = a.transpose() * a / 40000.0;
    CHECK((emp - c).cwiseAbs().maxCoeff() < 0.03);
    const auto d = empirical_smooth_distance(a, b, 1, {16, 2});
    CHECK(d.value <= 4 * d.std_error);
    CHECK_THROWS_AS(empirical_smooth_distance(a, b, 0, {16, 2}), std::invalid_argument);

    // A first-order integral on many small atoms is close to Gaussian; on one
    // heavy-tailed atom it is not.
    auto fine = make_grid(MeasureGrid::uniform(1, 0.05));
    ChaosVector x(fine, 1);
    x.add(Kernel(fine, 1, 1, Eigen::MatrixXd::Constant(1, 1, 1.0 / std::sqrt(0.05))));
    const auto far = empirical_smooth_distance(x, covariance(x), 16, 40000, {17, 0});
    CHECK(far.value > 4 * far.std_error);
}
