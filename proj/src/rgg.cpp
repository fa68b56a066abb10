#include "pstein/rgg.hpp"
#include "pstein/besov.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace pstein {

namespace {

// |[x - r, x + r] intersect [c, d]|
double overlap(double x, double r, double c, double d)
{
    return std::max(0.0, std::min(x + r, d) - std::max(x - r, c));
}

// Integral of a piecewise quadratic g over [lo, hi]; breaks must contain every kink.
template <class G>
double piecewise_simpson(G&& g, double lo, double hi, std::vector<double> breaks)
{
    if (!(hi > lo)) return 0.0;
    breaks.push_back(lo);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    double acc = 0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double u = std::max(breaks[k], lo), v = std::min(breaks[k + 1], hi);
        if (v > u) acc += (v - u) / 6 * (g(u) + 4 * g(0.5 * (u + v)) + g(v));
    }
    return acc;
}

// int_lo^hi |[x - r, x + r] intersect [c, d]| dx
double overlap_integral(double lo, double hi, double r, double c, double d)
{
    if (!(d > c)) return 0.0;
    return piecewise_simpson([&](double x) { return overlap(x, r, c, d); }, lo, hi, {c - r, c + r, d - r, d + r});
}

// Area of the open disk of radius r about (px, py) inside [-A, A]^2.
double disk_box_area(double px, double py, double r, double A)
{
    static boost::math::quadrature::tanh_sinh<double> q;
    const double lo = std::max(py - r, -A), hi = std::min(py + r, A);
    if (!(hi > lo)) return 0.0;
    return q.integrate(
        [&](double y) {
            const double u = y - py;
            return overlap(px, std::sqrt(std::max(r * r - u * u, 0.0)), -A, A);
        },
        lo, hi, 1e-10);
}

// Area of the radius-r disk about 0 inside [-B, B]^2.
double disk_centered_box_area(double r, double B)
{
    auto P = [r](double y) { return 0.5 * (y * std::sqrt(std::max(r * r - y * y, 0.0)) + r * r * std::asin(std::min(y / r, 1.0))); };
    if (r <= B) return std::numbers::pi * r * r;
    const double y0 = std::min(std::sqrt(r * r - B * B), B);
    return 4 * (B * y0 + (y0 < B ? P(B) - P(y0) : 0.0));
}

}  // namespace

std::string to_string(Regime r)
{
    switch (r) {
    case Regime::R1: return "R1";
    case Regime::R2: return "R2";
    case Regime::R3: return "R3";
    }
    return "?";
}

Regime regime_from_string(const std::string& s)
{
    if (s == "R1") return Regime::R1;
    if (s == "R2") return Regime::R2;
    if (s == "R3") return Regime::R3;
    throw std::invalid_argument("unknown regime '" + s + "' (expected R1, R2 or R3)");
}

double RadiusLaw::operator()(double lambda) const
{
    return scale * std::pow(lambda, -exponent);
}

RadiusLaw regime_fixture(Regime r)
{
    switch (r) {
    case Regime::R1: return {0.05, 0.0};
    case Regime::R2: return {0.5, 1.0};
    case Regime::R3: return {0.5, 1.5};
    }
    throw std::invalid_argument("regime_fixture: bad regime");
}

void RggConfig::validate() const
{
    if (d != 1 && d != 2) throw std::invalid_argument("rgg: dimension must be 1 or 2");
    if (!(lambda > 0) || !std::isfinite(lambda)) throw std::invalid_argument("rgg: lambda must be positive");
    if (!(half_width > 0)) throw std::invalid_argument("rgg: window half-width must be positive");
    const double r = radius();
    if (!(r > 0) || !std::isfinite(r)) throw std::invalid_argument("rgg: edge radius must be positive");
    if (time_grid.empty()) throw std::invalid_argument("rgg: empty time grid");
    for (double t : time_grid)
        if (!(t > 0 && t <= 1)) throw std::invalid_argument("rgg: time grid values must lie in (0, 1]");
}

double RggConfig::half_width_at(double t) const
{
    return std::pow(t, 1.0 / (2 * d)) * half_width;
}

double RggConfig::radius_at(double t) const
{
    return std::pow(t, 1.0 / (2 * d)) * radius();
}

double window_measure(const RggConfig& cfg, double t)
{
    return std::pow(2 * cfg.half_width_at(t), cfg.d);
}

double psi(const RggConfig& cfg, double t)
{
    const double r = cfg.radius_at(t), B = 2 * cfg.half_width_at(t);
    return cfg.d == 1 ? 2 * std::min(r, B) : disk_centered_box_area(r, B);
}

RegimeStats regime_stats(const RggConfig& cfg, Regime regime)
{
    cfg.validate();
    RegimeStats s;
    s.ell1 = window_measure(cfg, 1.0);
    s.psi1 = psi(cfg, 1.0);
    const double l = cfg.lambda;
    s.lambda_psi = l * s.psi1;
    s.sigma_sq = 4 * s.ell1 * l * l * l * s.psi1 * s.psi1 + s.ell1 * l * l * s.psi1;
    s.sigma_sq_corrected = 4 * s.ell1 * l * l * l * s.psi1 * s.psi1 + 2 * s.ell1 * l * l * s.psi1;
    s.regime = regime;
    return s;
}

namespace {

Index cells_across(const RggConfig& cfg, Index cells_per_radius)
{
    if (cells_per_radius < 1) throw std::invalid_argument("rgg: need at least one cell per radius");
    const double h = cfg.radius() / static_cast<double>(cells_per_radius);
    return std::max<Index>(1, static_cast<Index>(std::ceil(2 * cfg.half_width / h - 1e-9)));
}

RggKernels kernels_1d(const RggConfig& cfg, Index cells_per_radius)
{
    const Index n = cells_across(cfg, cells_per_radius);
    const Index T = static_cast<Index>(cfg.time_grid.size());
    const double a = cfg.half_width, h = 2 * a / static_cast<double>(n);
    Eigen::MatrixXd coords(n, 1);
    for (Index i = 0; i < n; ++i) coords(i, 0) = -a + (i + 0.5) * h;
    auto grid = make_grid(MeasureGrid::from_weights(Eigen::VectorXd::Constant(n, cfg.lambda * h), coords));
    Eigen::MatrixXd v1 = Eigen::MatrixXd::Zero(n, T), v2 = Eigen::MatrixXd::Zero(n * n, T);
    for (Index k = 0; k < T; ++k) {
        const double at = cfg.half_width_at(cfg.time_grid[k]), rt = cfg.radius_at(cfg.time_grid[k]);
        for (Index i = 0; i < n; ++i) {
            const double lo = std::max(-a + i * h, -at), hi = std::min(-a + (i + 1) * h, at);
            if (!(hi > lo)) continue;
            v1(i, k) = 2 * cfg.lambda * overlap_integral(lo, hi, rt, -at, at) / h;
            for (Index j = 0; j < n; ++j) {
                const double c = std::max(-a + j * h, -at), d = std::min(-a + (j + 1) * h, at);
                v2(i * n + j, k) = overlap_integral(lo, hi, rt, c, d) / (h * h);
            }
        }
    }
    return {Kernel(grid, 1, static_cast<int>(T), v1), Kernel(grid, 2, static_cast<int>(T), v2, true)};
}

RggKernels kernels_2d(const RggConfig& cfg, Index cells_per_radius, Index subcells)
{
    const Index n = cells_across(cfg, cells_per_radius);
    if (n * n > 400) throw std::invalid_argument("rgg: d = 2 kernels are limited to 400 cells");
    if (subcells < 1) throw std::invalid_argument("rgg: need at least one sub-cell");
    const Index T = static_cast<Index>(cfg.time_grid.size()), N = n * n, s = subcells;
    const double a = cfg.half_width, h = 2 * a / static_cast<double>(n), hs = h / static_cast<double>(s);
    Eigen::MatrixXd coords(N, 2);
    std::vector<Eigen::MatrixXd> sub(N, Eigen::MatrixXd(s * s, 2));
    for (Index ix = 0; ix < n; ++ix)
        for (Index iy = 0; iy < n; ++iy) {
            const Index c = ix * n + iy;
            coords.row(c) << -a + (ix + 0.5) * h, -a + (iy + 0.5) * h;
            for (Index u = 0; u < s; ++u)
                for (Index w = 0; w < s; ++w) sub[c].row(u * s + w) << -a + ix * h + (u + 0.5) * hs, -a + iy * h + (w + 0.5) * hs;
        }
    auto grid = make_grid(MeasureGrid::from_weights(Eigen::VectorXd::Constant(N, cfg.lambda * h * h), coords));
    Eigen::MatrixXd v1 = Eigen::MatrixXd::Zero(N, T), v2 = Eigen::MatrixXd::Zero(N * N, T);
    const double m = static_cast<double>(s * s);
    for (Index k = 0; k < T; ++k) {
        const double at = cfg.half_width_at(cfg.time_grid[k]), rt = cfg.radius_at(cfg.time_grid[k]);
        auto inside = [at](const Eigen::RowVector2d& p) { return std::abs(p[0]) < at && std::abs(p[1]) < at; };
        for (Index c = 0; c < N; ++c) {
            double acc = 0;
            for (Index u = 0; u < s * s; ++u) {
                const Eigen::RowVector2d p = sub[c].row(u);
                if (inside(p)) acc += disk_box_area(p[0], p[1], rt, at);
            }
            v1(c, k) = 2 * cfg.lambda * acc / m;
            for (Index e = 0; e < N; ++e) {
                if ((coords.row(c) - coords.row(e)).cwiseAbs().maxCoeff() > rt + h) continue;
                double cnt = 0;
                for (Index u = 0; u < s * s; ++u) {
                    const Eigen::RowVector2d p = sub[c].row(u);
                    if (!inside(p)) continue;
                    for (Index w = 0; w < s * s; ++w) {
                        const Eigen::RowVector2d q = sub[e].row(w);
                        if (inside(q) && (p - q).norm() < rt) cnt += 1;
                    }
                }
                v2(c * N + e, k) = cnt / (m * m);
            }
        }
    }
    return {Kernel(grid, 1, static_cast<int>(T), v1), Kernel(grid, 2, static_cast<int>(T), v2, true)};
}

}  // namespace

RggKernels exact_kernels(const RggConfig& cfg, Index cells_per_radius, Index subcells)
{
    cfg.validate();
    return cfg.d == 1 ? kernels_1d(cfg, cells_per_radius) : kernels_2d(cfg, cells_per_radius, subcells);
}

double BandedKernels::f2_at(Index t, Index i, Index j) const
{
    const Index k = j - i + width;
    return (k < 0 || k > 2 * width) ? 0.0 : f2[static_cast<std::size_t>(t)](i, k);
}

BandedKernels BandedKernels::scaled(const Eigen::VectorXd& per_time) const
{
    if (per_time.size() != f1.cols()) throw std::invalid_argument("BandedKernels::scaled: one factor per time required");
    BandedKernels out = *this;
    for (Index t = 0; t < per_time.size(); ++t) {
        out.f1.col(t) *= per_time[t];
        out.f2[static_cast<std::size_t>(t)] *= per_time[t];
    }
    return out;
}

BandedKernels banded_kernels(const RggConfig& cfg, Index cells_per_radius)
{
    cfg.validate();
    if (cfg.d != 1) throw std::invalid_argument("banded_kernels: only d = 1 is supported");
    BandedKernels b;
    b.n = cells_across(cfg, cells_per_radius);
    const Index T = static_cast<Index>(cfg.time_grid.size());
    const double a = cfg.half_width, h = 2 * a / static_cast<double>(b.n);
    b.width = static_cast<Index>(std::ceil(cfg.radius() / h)) + 1;
    b.mu = cfg.lambda * h;
    b.f1 = Eigen::MatrixXd::Zero(b.n, T);
    b.f2.assign(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(b.n, 2 * b.width + 1));
    for (Index k = 0; k < T; ++k) {
        const double at = cfg.half_width_at(cfg.time_grid[k]), rt = cfg.radius_at(cfg.time_grid[k]);
        for (Index i = 0; i < b.n; ++i) {
            const double lo = std::max(-a + i * h, -at), hi = std::min(-a + (i + 1) * h, at);
            if (!(hi > lo)) continue;
            b.f1(i, k) = 2 * cfg.lambda * overlap_integral(lo, hi, rt, -at, at) / h;
            for (Index j = std::max<Index>(0, i - b.width); j <= std::min(b.n - 1, i + b.width); ++j) {
                const double c = std::max(-a + j * h, -at), d = std::min(-a + (j + 1) * h, at);
                b.f2[static_cast<std::size_t>(k)](i, j - i + b.width) = overlap_integral(lo, hi, rt, c, d) / (h * h);
            }
        }
    }
    return b;
}

std::vector<std::tuple<int, int, int, int>> seven_contractions()
{
    return {{1, 1, 1, 0}, {1, 2, 1, 1}, {1, 2, 1, 0}, {2, 2, 1, 1}, {2, 2, 1, 0}, {2, 2, 2, 0}, {2, 2, 2, 1}};
}

ContractionNormSq banded_contraction_norms(const BandedKernels& k)
{
    const Index n = k.n, w = k.width, T = k.f1.cols();
    const double mu = k.mu;
    auto F2 = [&k](Index t, Index a, Index b) { return k.f2_at(t, a, b); };
    Eigen::VectorXd f1sq = k.f1.rowwise().squaredNorm();
    std::map<std::tuple<int, int, int, int>, double> v;

    double n1 = 0, n2 = 0, n3 = 0, n4 = 0, n5 = 0, n6 = 0, n7 = 0;
    Eigen::MatrixXd G(T, T), H(T, T);
    Eigen::VectorXd col(T);
    for (Index a = 0; a < n; ++a) {
        n1 += mu * f1sq[a] * f1sq[a];
        double row_sq = 0;
        H.setZero();
        for (Index b = std::max<Index>(0, a - w); b <= std::min(n - 1, a + w); ++b) {
            for (Index t = 0; t < T; ++t) col[t] = F2(t, a, b);
            const double s2 = col.squaredNorm();
            row_sq += s2;
            n3 += mu * mu * f1sq[a] * s2;
            n6 += mu * mu * s2 * s2;
            H.noalias() += mu * col * col.transpose();
        }
        n5 += mu * mu * mu * row_sq * row_sq;
        n7 += mu * H.squaredNorm();

        // f1 *_1^1 f2 at b = a: sum_c mu f1(c) f2(c, a)
        G.setZero();
        for (Index c = std::max<Index>(0, a - w); c <= std::min(n - 1, a + w); ++c) {
            for (Index t = 0; t < T; ++t) col[t] = F2(t, c, a);
            G.noalias() += mu * k.f1.row(c).transpose() * col.transpose();
        }
        n2 += mu * G.squaredNorm();

        // f2 *_1^1 f2 at (a, b): sum_c mu f2(c, a) f2(c, b)
        Eigen::VectorXd ca(T), cb(T);
        for (Index b = std::max<Index>(0, a - 2 * w); b <= std::min(n - 1, a + 2 * w); ++b) {
            H.setZero();
            for (Index c = std::max<Index>(0, std::max(a, b) - w); c <= std::min(n - 1, std::min(a, b) + w); ++c) {
                for (Index t = 0; t < T; ++t) {
                    ca[t] = F2(t, c, a);
                    cb[t] = F2(t, c, b);
                }
                H.noalias() += mu * ca * cb.transpose();
            }
            n4 += mu * mu * H.squaredNorm();
        }
    }
    const auto keys = seven_contractions();
    const double vals[] = {n1, n2, n3, n4, n5, n6, n7};
    for (std::size_t i = 0; i < keys.size(); ++i) v[keys[i]] = vals[i];
    return [v](int q, int p, int r, int l) {
        auto it = v.find(std::make_tuple(std::min(q, p), std::max(q, p), r, l));
        if (it == v.end()) throw std::invalid_argument("banded_contraction_norms: contraction not available");
        return it->second;
    };
}

Eigen::MatrixXd banded_covariance(const BandedKernels& k)
{
    const Index T = k.f1.cols();
    Eigen::MatrixXd S = k.mu * k.f1.transpose() * k.f1;
    for (Index t = 0; t < T; ++t)
        for (Index s = 0; s <= t; ++s) {
            const double v = 2 * k.mu * k.mu *
                             (k.f2[static_cast<std::size_t>(t)].array() * k.f2[static_cast<std::size_t>(s)].array()).sum();
            S(t, s) += v;
            if (s != t) S(s, t) += v;
        }
    return S;
}

ExactMoments exact_moments(const RggConfig& cfg)
{
    cfg.validate();
    if (cfg.d != 1) throw std::invalid_argument("exact_moments: only d = 1 is supported");
    const Index T = static_cast<Index>(cfg.time_grid.size());
    const double l = cfg.lambda;
    ExactMoments m;
    m.mean.resize(T);
    m.cov.resize(T, T);
    for (Index k = 0; k < T; ++k) {
        const double at = cfg.half_width_at(cfg.time_grid[k]), rt = cfg.radius_at(cfg.time_grid[k]);
        m.mean[k] = l * l * overlap_integral(-at, at, rt, -at, at);
    }
    for (Index i = 0; i < T; ++i)
        for (Index j = 0; j <= i; ++j) {
            const double ai = cfg.half_width_at(cfg.time_grid[i]), ri = cfg.radius_at(cfg.time_grid[i]);
            const double aj = cfg.half_width_at(cfg.time_grid[j]), rj = cfg.radius_at(cfg.time_grid[j]);
            const double lo = std::min(ai, aj);
            const double first = 4 * l * l * l *
                                 piecewise_simpson([&](double x) { return overlap(x, ri, -ai, ai) * overlap(x, rj, -aj, aj); }, -lo, lo,
                                                   {-ai - ri, -ai + ri, ai - ri, ai + ri, -aj - rj, -aj + rj, aj - rj, aj + rj});
            const Index mn = cfg.time_grid[i] <= cfg.time_grid[j] ? i : j;
            m.cov(i, j) = m.cov(j, i) = first + 2 * m.mean[mn];
        }
    return m;
}

namespace {

void count_pair(const RggConfig& cfg, const std::vector<double>& at, const std::vector<double>& rt, const double* p,
                const double* q, double dist, Eigen::VectorXd& out)
{
    for (std::size_t k = 0; k < at.size(); ++k) {
        if (!(dist < rt[k])) continue;
        bool in = true;
        for (int c = 0; c < cfg.d; ++c) in = in && std::abs(p[c]) < at[k] && std::abs(q[c]) < at[k];
        if (in) out[static_cast<Index>(k)] += 2;
    }
}

}  // namespace

Eigen::VectorXd count_edges(const RggConfig& cfg, const Eigen::MatrixXd& points)
{
    if (points.rows() > 0 && points.cols() != cfg.d) throw std::invalid_argument("count_edges: one column per dimension required");
    const Index T = static_cast<Index>(cfg.time_grid.size());
    std::vector<double> at, rt;
    for (double t : cfg.time_grid) {
        at.push_back(cfg.half_width_at(t));
        rt.push_back(cfg.radius_at(t));
    }
    const double rmax = *std::max_element(rt.begin(), rt.end());
    const std::size_t N = static_cast<std::size_t>(points.rows());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(T);
    if (cfg.d == 1) {
        std::vector<double> x(points.data(), points.data() + N);
        std::sort(x.begin(), x.end());
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = i + 1; j < N && x[j] - x[i] < rmax; ++j) count_pair(cfg, at, rt, &x[i], &x[j], x[j] - x[i], out);
        return out;
    }
    const double lo = points.minCoeff() - 1e-12, span = points.maxCoeff() + 1e-12 - lo;
    const Index nc = std::clamp<Index>(static_cast<Index>(std::floor(span / rmax)), 1, 4096);
    const double cw = span / static_cast<double>(nc);
    auto cell_of = [&](double v) { return std::clamp<Index>(static_cast<Index>((v - lo) / cw), 0, nc - 1); };
    std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(nc * nc));
    std::vector<std::array<double, 2>> pts(N);
    for (std::size_t i = 0; i < N; ++i) {
        pts[i] = {points(static_cast<Index>(i), 0), points(static_cast<Index>(i), 1)};
        cells[static_cast<std::size_t>(cell_of(pts[i][0]) * nc + cell_of(pts[i][1]))].push_back(i);
    }
    for (std::size_t i = 0; i < N; ++i) {
        const Index cx = cell_of(pts[i][0]), cy = cell_of(pts[i][1]);
        for (Index dx = -1; dx <= 1; ++dx)
            for (Index dy = -1; dy <= 1; ++dy) {
                const Index ex = cx + dx, ey = cy + dy;
                if (ex < 0 || ey < 0 || ex >= nc || ey >= nc) continue;
                for (std::size_t j : cells[static_cast<std::size_t>(ex * nc + ey)]) {
                    if (j <= i) continue;
                    const double dist = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
                    count_pair(cfg, at, rt, pts[i].data(), pts[j].data(), dist, out);
                }
            }
    }
    return out;
}

Eigen::VectorXd simulate_edge_count(const RggConfig& cfg, Engine& engine)
{
    const double a = cfg.half_width;
    std::poisson_distribution<long> count(cfg.lambda * std::pow(2 * a, cfg.d));
    std::uniform_real_distribution<double> u(-a, a);
    Eigen::MatrixXd pts(count(engine), cfg.d);
    for (Index i = 0; i < pts.rows(); ++i)
        for (Index c = 0; c < cfg.d; ++c) pts(i, c) = u(engine);
    return count_edges(cfg, pts);
}

Eigen::VectorXd simulate_edge_count(const RggConfig& cfg, const RngSpec& rng)
{
    cfg.validate();
    Engine e = block_engine(rng, 0);
    return simulate_edge_count(cfg, e);
}

CovarianceEstimate mc_normalized_covariance(const RggConfig& cfg, const Eigen::VectorXd& mean, double sigma, Index reps,
                                            const RngSpec& rng, int workers)
{
    cfg.validate();
    const Index T = static_cast<Index>(cfg.time_grid.size());
    if (mean.size() != T) throw std::invalid_argument("mc_normalized_covariance: one mean per time required");
    if (!(sigma > 0)) throw std::invalid_argument("mc_normalized_covariance: sigma must be positive");
    const Index P = T * (T + 1) / 2;
    const McStats st = monte_carlo(reps, T + P, rng, [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
        const Eigen::VectorXd F = simulate_edge_count(cfg, e);
        const Eigen::VectorXd z = (F - mean) / sigma;
        out.head(T) = F;
        Index p = T;
        for (Index i = 0; i < T; ++i)
            for (Index j = 0; j <= i; ++j) out[p++] = z[i] * z[j];
    }, workers);
    CovarianceEstimate est;
    est.reps = reps;
    est.mean = st.mean.head(T);
    const Eigen::VectorXd se = st.std_error();
    est.mean_se = se.head(T);
    est.cov.resize(T, T);
    est.cov_se.resize(T, T);
    Index p = T;
    for (Index i = 0; i < T; ++i)
        for (Index j = 0; j <= i; ++j, ++p) {
            est.cov(i, j) = est.cov(j, i) = st.mean[p];
            est.cov_se(i, j) = est.cov_se(j, i) = se[p];
        }
    return est;
}

RegimeCovariance regime_covariance(double t, double s, double lambda_psi, Regime regime)
{
    if (!(t > 0 && t <= 1 && s > 0 && s <= 1)) throw std::invalid_argument("regime_covariance: t, s must lie in (0, 1]");
    if (!(lambda_psi >= 0)) throw std::invalid_argument("regime_covariance: lambda psi must be nonnegative");
    const double m = std::min(t, s), g = std::sqrt(t * s * m);
    RegimeCovariance c;
    c.finite = (4 * g * lambda_psi + m) / (4 * lambda_psi + 1);
    c.finite_corrected = (4 * g * lambda_psi + 2 * m) / (4 * lambda_psi + 2);
    switch (regime) {
    case Regime::R1: c.limit = c.limit_corrected = g; break;
    case Regime::R2:
        c.limit = (4 * g + m) / 5;
        c.limit_corrected = (4 * g + 2 * m) / 6;
        break;
    case Regime::R3: c.limit = c.limit_corrected = m; break;
    }
    return c;
}

RggPipelineConfig default_pipeline(Regime r)
{
    RggPipelineConfig c;
    c.regime = r;
    c.radius = regime_fixture(r);
    if (r == Regime::R3) c.lambdas = {16, 32, 64, 128, 256};
    return c;
}

namespace {

double stated_rate(Regime r, double lambda, double psi1)
{
    switch (r) {
    case Regime::R1: return 1 / std::sqrt(lambda) + 1 / (lambda * psi1);
    case Regime::R2: return 1 / std::sqrt(lambda) + std::abs(lambda * psi1 - 1);
    case Regime::R3: return 1 / (lambda * std::sqrt(psi1)) + lambda * psi1;
    }
    return 0;
}

}  // namespace

RggReport rgg_pipeline(const RggPipelineConfig& pc, const RngSpec& rng)
{
    if (pc.lambdas.size() < 2) throw std::invalid_argument("rgg_pipeline: need at least two intensities");
    const Index T = static_cast<Index>(pc.time_grid.size());
    const auto one = std::find(pc.time_grid.begin(), pc.time_grid.end(), 1.0);
    if (one == pc.time_grid.end()) throw std::invalid_argument("rgg_pipeline: the time grid must contain t = 1");
    const Index t1 = one - pc.time_grid.begin();
    const double omega = 1.0 / static_cast<double>(T);

    RggReport rep;
    std::vector<double> lam, bound, con, rth, rpr;
    for (std::size_t li = 0; li < pc.lambdas.size(); ++li) {
        RggConfig cfg{pc.d, pc.lambdas[li], pc.half_width, pc.radius, pc.time_grid};
        cfg.validate();
        const RegimeStats st = regime_stats(cfg, pc.regime);

        Eigen::MatrixXd S;
        ContractionNormSq norms;
        double sigma_sq = 0;
        if (pc.d == 1) {
            const BandedKernels raw = banded_kernels(cfg, pc.cells_per_radius);
            sigma_sq = banded_covariance(raw)(t1, t1);
            const BandedKernels g = raw.scaled(Eigen::VectorXd::Constant(T, std::sqrt(omega / sigma_sq)));
            norms = banded_contraction_norms(g);
            // the continuous geometry gives S without the cell-averaging loss
            const ExactMoments em = exact_moments(cfg);
            S = omega * em.cov / em.cov(t1, t1);
        } else {
            const RggKernels raw = exact_kernels(cfg, pc.cells_per_radius);
            ChaosVector x(raw.f1.grid(), static_cast<int>(T));
            x.add(raw.f1).add(raw.f2);
            sigma_sq = covariance(x).matrix()(t1, t1);
            const ChaosVector g = x.scaled(std::sqrt(omega / sigma_sq));
            S = covariance(g).matrix();
            norms = dense_contraction_norms(g);
        }
        Eigen::MatrixXd printed(T, T), corrected(T, T);
        for (Index i = 0; i < T; ++i)
            for (Index j = 0; j < T; ++j) {
                const RegimeCovariance c = regime_covariance(pc.time_grid[i], pc.time_grid[j], st.lambda_psi, pc.regime);
                printed(i, j) = omega * c.limit;
                corrected(i, j) = omega * c.limit_corrected;
            }

        RggRow row;
        row.lambda = cfg.lambda;
        row.regime = pc.regime;
        row.radius = cfg.radius();
        row.psi1 = st.psi1;
        row.lambda_psi = st.lambda_psi;
        row.sigma_sq_printed = st.sigma_sq;
        row.sigma_sq_kernel = sigma_sq;
        row.cov_term_printed = 0.5 * (S - printed).norm();
        row.cov_term_corrected = 0.5 * (S - corrected).norm();
        const BoundReport b = contraction_bound_from_norms({1, 2}, S.trace(), row.cov_term_corrected, norms);
        for (const auto& [q, p, r, l] : seven_contractions()) row.norms.push_back(norms(q, p, r, l));
        row.m2 = b.m2;
        row.beta = b.beta;
        row.contraction_term = b.contraction_term;
        row.total_bound = b.total_contraction();
        row.rate_theorem = stated_rate(pc.regime, cfg.lambda, st.psi1);
        row.rate_proof = pc.regime == Regime::R3 ? 1 / (cfg.lambda * cfg.lambda * st.psi1) + st.lambda_psi : row.rate_theorem;

        const bool mc = pc.reps > 0 && pc.d == 1 &&
                        std::find(pc.mc_lambdas.begin(), pc.mc_lambdas.end(), cfg.lambda) != pc.mc_lambdas.end();
        if (mc) {
            const ExactMoments em = exact_moments(cfg);
            const double sigma = std::sqrt(em.cov(t1, t1));
            const RngSpec sub{rng.seed, rng.stream * 1000 + li};
            const CovarianceEstimate est = mc_normalized_covariance(cfg, em.mean, sigma, pc.reps, sub, pc.workers);
            double dev = 0, dev_se = 0, dev_c = 0, dev_m = 0;
            for (Index i = 0; i < T; ++i) {
                dev_m = std::max(dev_m, std::abs(est.mean[i] - em.mean[i]) / est.mean_se[i]);
                for (Index j = 0; j < T; ++j) {
                    const double d = std::abs(est.cov(i, j) - printed(i, j) / omega);
                    dev = std::max(dev, d);
                    dev_se = std::max(dev_se, d / est.cov_se(i, j));
                    dev_c = std::max(dev_c, std::abs(est.cov(i, j) - em.cov(i, j) / (sigma * sigma)) / est.cov_se(i, j));
                }
            }
            row.cov_max_dev = dev;
            row.cov_max_dev_se = dev_se;
            row.cov_max_dev_corrected_se = dev_c;
            row.mean_max_dev_se = dev_m;
        }
        rep.rows.push_back(row);
        lam.push_back(row.lambda);
        bound.push_back(row.total_bound);
        con.push_back(row.contraction_term);
        rth.push_back(row.rate_theorem);
        rpr.push_back(row.rate_proof);
    }
    rep.slope_bound = loglog_slope(lam, bound);
    rep.slope_contraction = loglog_slope(lam, con);
    rep.slope_rate_theorem = loglog_slope(lam, rth);
    rep.slope_rate_proof = loglog_slope(lam, rpr);
    return rep;
}

}  // namespace pstein
