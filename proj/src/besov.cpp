#include "pstein/besov.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <stdexcept>

namespace pstein {

namespace {

double positive_pow(double x, double e)
{
    return x > 0 ? std::pow(x, e) : 0.0;
}

boost::math::quadrature::tanh_sinh<double>& quadrature()
{
    static boost::math::quadrature::tanh_sinh<double> q;
    return q;
}

void check_beta(double beta)
{
    if (!(beta > 0 && beta < 0.5)) throw std::invalid_argument("beta must lie in (0, 1/2)");
}

// int_0^{min(p,q)} (p - x)^g (q - x)^g dx for g > 0.
double smooth_overlap(double p, double q, double g)
{
    const double m = std::min(p, q);
    if (m <= 0) return 0.0;
    if (p == q) return std::pow(m, 2 * g + 1) / (2 * g + 1);
    const double d = std::abs(p - q);
    return quadrature().integrate([&](double u) { return std::pow(u, g) * std::pow(d + u, g); }, 0.0, m, 1e-14);
}

}  // namespace

TimeGrid::TimeGrid(Index n_) : n(n_)
{
    if (n < 1) throw std::invalid_argument("TimeGrid: need at least one cell");
    nodes.resize(n);
    for (Index i = 0; i < n; ++i) nodes[i] = hi(i);
    quad_weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

void FracParams::validate() const
{
    check_beta(beta);
    if (!(lambda > 0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
}

Eigen::VectorXd frac_integral(const TimeGrid& grid, const Eigen::VectorXd& f, double beta, Side side)
{
    if (!(beta > 0)) throw std::invalid_argument("frac_integral: beta must be positive");
    if (f.size() != grid.n) throw std::invalid_argument("frac_integral: function does not match grid");
    const double scale = 1.0 / std::tgamma(beta + 1);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.n);
    for (Index i = 0; i < grid.n; ++i) {
        const double s = grid.nodes[i];
        double acc = 0;
        if (side == Side::left) {
            for (Index j = 0; j <= i; ++j) acc += f[j] * (positive_pow(s - grid.lo(j), beta) - positive_pow(s - grid.hi(j), beta));
        } else {
            for (Index j = i + 1; j < grid.n; ++j)
                acc += f[j] * (positive_pow(grid.hi(j) - s, beta) - positive_pow(grid.lo(j) - s, beta));
        }
        out[i] = scale * acc;
    }
    return out;
}

Eigen::VectorXd frac_derivative(const TimeGrid& grid, const Eigen::VectorXd& f, double beta)
{
    if (!(beta > 0 && beta < 1)) throw std::invalid_argument("frac_derivative: beta must lie in (0, 1)");
    const Eigen::VectorXd g = frac_integral(grid, f, 1 - beta, Side::left);
    Eigen::VectorXd out(grid.n);
    for (Index i = 0; i < grid.n; ++i) out[i] = (g[i] - (i > 0 ? g[i - 1] : 0.0)) * static_cast<double>(grid.n);
    return out;
}

Eigen::VectorXd frac_derivative_indicator(const TimeGrid& grid, double a, double beta)
{
    if (!(a >= 0 && a <= 1)) throw std::invalid_argument("frac_derivative_indicator: a must lie in [0, 1]");
    Eigen::VectorXd out(grid.n);
    const double c = 1.0 / std::tgamma(1 - beta);
    for (Index i = 0; i < grid.n; ++i) out[i] = grid.nodes[i] > a ? c * std::pow(grid.nodes[i] - a, -beta) : 0.0;
    return out;
}

Eigen::VectorXd frac_derivative_identity(const TimeGrid& grid, double beta)
{
    Eigen::VectorXd out(grid.n);
    const double c = 1.0 / ((1 - beta) * std::tgamma(1 - beta));
    for (Index i = 0; i < grid.n; ++i) out[i] = c * std::pow(grid.nodes[i], 1 - beta);
    return out;
}

double bm_cov_value(double r, double s, double beta)
{
    check_beta(beta);
    const double m = std::min(r, s);
    if (m <= 0) return 0.0;
    const double g2 = std::pow(std::tgamma(1 - beta), 2);
    const double d = std::abs(r - s);
    if (d == 0) return std::pow(m, 1 - 2 * beta) / ((1 - 2 * beta) * g2);
    // u = m - x, then v = u^{1-beta} removes the u^{-beta} singularity.
    const double e = 1 / (1 - beta);
    const double integral =
        e * quadrature().integrate([&](double v) { return std::pow(d + std::pow(v, e), -beta); }, 0.0, std::pow(m, 1 - beta), 1e-14);
    return integral / g2;
}

Eigen::MatrixXd bm_cov_kernel(const TimeGrid& grid, const FracParams& params)
{
    params.validate();
    Eigen::MatrixXd k(grid.n, grid.n);
    for (Index i = 0; i < grid.n; ++i)
        for (Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = bm_cov_value(grid.nodes[i], grid.nodes[j], params.beta);
    return k;
}

namespace {

Eigen::MatrixXd poisson_correction(const TimeGrid& grid, const FracParams& params)
{
    const double g = std::tgamma(1 - params.beta);
    const double c = params.lambda / (g * g * (1 - params.beta) * (1 - params.beta));
    Eigen::MatrixXd k(grid.n, grid.n);
    for (Index i = 0; i < grid.n; ++i)
        for (Index j = 0; j < grid.n; ++j) {
            const double r = grid.nodes[i], s = grid.nodes[j], m = std::min(r, s);
            k(i, j) = c * std::pow(r - m, 1 - params.beta) * std::pow(s - m, 1 - params.beta);
        }
    return k;
}

}  // namespace

Eigen::MatrixXd poisson_cov_kernel(const TimeGrid& grid, const FracParams& params)
{
    return bm_cov_kernel(grid, params) - poisson_correction(grid, params);
}

double hs_on_L2(const TimeGrid& grid, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (a.rows() != grid.n || a.cols() != grid.n || b.rows() != grid.n || b.cols() != grid.n)
        throw std::invalid_argument("hs_on_L2: kernel does not match grid");
    return (a - b).norm() / static_cast<double>(grid.n);
}

double contraction_norm_sq_closed_form(const FracParams& params)
{
    params.validate();
    const double b = params.beta;
    return 1.0 / (params.lambda * std::pow(std::tgamma(1 - b), 4) * (1 - 2 * b) * (1 - 2 * b) * (3 - 4 * b));
}

Eigen::RowVectorXd indicator_coordinates(const TimeGrid& time, double x, double beta)
{
    const double c = std::sqrt(static_cast<double>(time.n)) / std::tgamma(2 - beta);
    Eigen::RowVectorXd out(time.n);
    for (Index i = 0; i < time.n; ++i)
        out[i] = c * (positive_pow(time.hi(i) - x, 1 - beta) - positive_pow(time.lo(i) - x, 1 - beta));
    return out;
}

Eigen::RowVectorXd identity_coordinates(const TimeGrid& time, double beta)
{
    const double c = std::sqrt(static_cast<double>(time.n)) / std::tgamma(3 - beta);
    Eigen::RowVectorXd out(time.n);
    for (Index i = 0; i < time.n; ++i) out[i] = c * (std::pow(time.hi(i), 2 - beta) - std::pow(time.lo(i), 2 - beta));
    return out;
}

Kernel besov_kernel(const FracParams& params, Index n_time, Index m_jump)
{
    params.validate();
    if (m_jump < 1) throw std::invalid_argument("besov_kernel: need at least one jump cell");
    const TimeGrid time(n_time);
    Eigen::VectorXd x(m_jump);
    for (Index j = 0; j < m_jump; ++j) x[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(m_jump);
    auto grid = make_grid(MeasureGrid::from_weights(Eigen::VectorXd::Constant(m_jump, params.lambda / static_cast<double>(m_jump)), x));
    Eigen::MatrixXd v(m_jump, n_time);
    const double s = 1.0 / std::sqrt(params.lambda);
    for (Index j = 0; j < m_jump; ++j) v.row(j) = s * indicator_coordinates(time, x[j], params.beta);
    return Kernel(grid, 1, static_cast<int>(n_time), std::move(v));
}

Eigen::MatrixXd projected_bm_covariance(Index n_time, double beta)
{
    check_beta(beta);
    const double g = 1 - beta;
    const Index n = n_time;
    Eigen::MatrixXd J(n + 1, n + 1);
    for (Index a = 0; a <= n; ++a)
        for (Index b = 0; b <= a; ++b)
            J(a, b) = J(b, a) = smooth_overlap(static_cast<double>(a) / n, static_cast<double>(b) / n, g);
    const double c = static_cast<double>(n) / std::pow(std::tgamma(2 - beta), 2);
    Eigen::MatrixXd S(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) S(i, k) = c * (J(i + 1, k + 1) - J(i + 1, k) - J(i, k + 1) + J(i, k));
    return 0.5 * (S + S.transpose());
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    const Index n = static_cast<Index>(x.size());
    Eigen::VectorXd lx(n), ly(n);
    for (Index i = 0; i < n; ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("loglog_slope: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const Eigen::VectorXd cx = lx.array() - lx.mean();
    const Eigen::VectorXd cy = ly.array() - ly.mean();
    return cx.dot(cy) / cx.squaredNorm();
}

std::vector<BesovRateRow> besov_contraction_rate(double beta, const std::vector<double>& lambdas, Index n_time, Index m_jump)
{
    std::vector<BesovRateRow> rows;
    for (double lambda : lambdas) {
        const FracParams p{beta, lambda};
        const Kernel f = besov_kernel(p, n_time, m_jump);
        rows.push_back({lambda, norm_sq(contract(f, f, 1, 0)), contraction_norm_sq_closed_form(p)});
    }
    return rows;
}

namespace {

BoundReport besov_bound(const FracParams& params, Index n_time, Index m_jump, double covariance_term)
{
    const Kernel f = besov_kernel(params, n_time, m_jump);
    ChaosVector x(f.grid(), static_cast<int>(n_time));
    x.add(f);
    return contraction_bound_from_norms({1}, covariance(x).trace(), covariance_term, dense_contraction_norms(x));
}

double lemma_covariance_term(const FracParams& params, Index n_cov)
{
    const TimeGrid tg(n_cov);
    return 0.5 * hs_on_L2(tg, poisson_cov_kernel(tg, params), bm_cov_kernel(tg, params));
}

}  // namespace

BoundReport besov_pipeline(const FracParams& params, Index n_time, Index m_jump, Index n_cov)
{
    params.validate();
    return besov_bound(params, n_time, m_jump, lemma_covariance_term(params, n_cov));
}

Eigen::MatrixXd simulate_besov_paths(const FracParams& params, Index n_time, Index reps, const RngSpec& rng)
{
    params.validate();
    const TimeGrid time(n_time);
    const Eigen::RowVectorXd drift = params.lambda * identity_coordinates(time, params.beta);
    const double s = 1.0 / std::sqrt(params.lambda);
    Eigen::MatrixXd out(reps, n_time);
    const Index blocks = (reps + 1023) / 1024;
    for (Index b = 0; b < blocks; ++b) {
        Engine e = block_engine(rng, static_cast<std::uint64_t>(b));
        std::exponential_distribution<double> gap(params.lambda);
        for (Index i = b * 1024; i < std::min(reps, (b + 1) * 1024); ++i) {
            Eigen::RowVectorXd row = -drift;
            for (double t = gap(e); t <= 1.0; t += gap(e)) row += indicator_coordinates(time, t, params.beta);
            out.row(i) = s * row;
        }
    }
    return out;
}

BesovReport run_besov(const BesovConfig& cfg, const RngSpec& rng)
{
    if (cfg.lambdas.size() < 2) throw std::invalid_argument("run_besov: need at least two intensities");
    check_beta(cfg.beta);
    BesovReport rep;
    const TimeGrid cov_grid(cfg.n_cov);
    const Eigen::MatrixXd bm = bm_cov_kernel(cov_grid, {cfg.beta, 1.0});
    const Eigen::MatrixXd S_proj = projected_bm_covariance(cfg.n_time, cfg.beta);
    std::vector<double> lam, norm2, bound;
    for (std::size_t k = 0; k < cfg.lambdas.size(); ++k) {
        const FracParams p{cfg.beta, cfg.lambdas[k]};
        p.validate();
        const double cov_term = 0.5 * hs_on_L2(cov_grid, bm - poisson_correction(cov_grid, p), bm);
        const BoundReport b = besov_bound(p, cfg.n_time, cfg.m_jump, cov_term);
        const Kernel f = besov_kernel(p, cfg.n_time, cfg.m_jump);
        ChaosVector x(f.grid(), static_cast<int>(cfg.n_time));
        x.add(f);
        const CovarianceMatrix S = covariance(x);

        BesovRow row;
        row.lambda = p.lambda;
        row.contraction_norm_sq = b.beta;
        row.contraction_norm = std::sqrt(b.beta);
        row.closed_form = contraction_norm_sq_closed_form(p);
        row.hs_diff = 2 * cov_term;
        row.hs_diff_discrete = (S.matrix() - S_proj).norm();
        row.m2 = b.m2;
        row.total_bound = b.total_contraction();
        if (cfg.reps > 0) {
            const RngSpec sub{rng.seed, rng.stream * 1000 + k};
            const Eigen::MatrixXd xs = simulate_besov_paths(p, cfg.n_time, cfg.reps, {sub.seed, sub.stream * 3});
            const Eigen::MatrixXd zs = gaussian_samples(CovarianceMatrix(S_proj), cfg.reps, {sub.seed, sub.stream * 3 + 1});
            const SmoothDistance d = empirical_smooth_distance(xs, zs, cfg.dictionary, {sub.seed, sub.stream * 3 + 2});
            row.smooth_distance = d.value;
            row.smooth_distance_se = d.std_error;
        }
        rep.rows.push_back(row);
        lam.push_back(p.lambda);
        norm2.push_back(row.contraction_norm_sq);
        bound.push_back(row.total_bound);
    }
    rep.slope_norm_sq = loglog_slope(lam, norm2);
    rep.slope_bound = loglog_slope(lam, bound);
    return rep;
}

}  // namespace pstein
