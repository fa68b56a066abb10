#include "pstein/poisson_mc.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

namespace pstein {

namespace {

constexpr Index kBlockSize = 2048;

Index block_count(Index reps)
{
    return (reps + kBlockSize - 1) / kBlockSize;
}

/// Calls fn(block, begin, end, engine) for every block, spread over workers.
template <typename Fn>
void for_blocks(Index reps, const RngSpec& rng, int workers, Fn&& fn)
{
    const Index blocks = block_count(reps);
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const Index nthreads = std::clamp<Index>(workers > 0 ? workers : static_cast<Index>(hw), 1, std::max<Index>(blocks, 1));
    std::atomic<Index> next{0};
    auto work = [&] {
        for (Index b = next++; b < blocks; b = next++) {
            Engine engine = block_engine(rng, static_cast<std::uint64_t>(b));
            fn(b, b * kBlockSize, std::min(reps, (b + 1) * kBlockSize), engine);
        }
    };
    if (nthreads == 1) {
        work();
        return;
    }
    std::vector<std::jthread> pool;
    for (Index i = 0; i < nthreads; ++i) pool.emplace_back(work);
}

McStats pairwise_merge(std::vector<McStats>& parts, std::size_t lo, std::size_t hi)
{
    if (hi - lo == 1) return parts[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    McStats left = pairwise_merge(parts, lo, mid);
    left.merge(pairwise_merge(parts, mid, hi));
    return left;
}

Eigen::VectorXd tensor_weights_of(const Kernel& f, int order)
{
    return f.grid()->tensor_weights(order);
}

}  // namespace

Engine block_engine(const RngSpec& rng, std::uint64_t block)
{
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(rng.seed), hi(rng.seed), lo(rng.stream), hi(rng.stream), lo(block), hi(block)};
    return Engine(seq);
}

Eigen::VectorXd PointConfiguration::compensated(const MeasureGrid& grid) const
{
    if (size() != grid.size()) throw std::invalid_argument("PointConfiguration: size differs from grid");
    Eigen::VectorXd out(size());
    for (Index j = 0; j < size(); ++j) out[j] = static_cast<double>(counts[j]) - grid.weights()[j];
    return out;
}

std::int64_t PointConfiguration::total() const
{
    std::int64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

PointConfiguration sample(const MeasureGrid& grid, Engine& engine)
{
    PointConfiguration cfg;
    cfg.counts.resize(static_cast<std::size_t>(grid.size()));
    for (Index j = 0; j < grid.size(); ++j) {
        std::poisson_distribution<std::int64_t> pois(grid.weights()[j]);
        cfg.counts[j] = pois(engine);
    }
    return cfg;
}

PointConfiguration sample(const MeasureGrid& grid, const RngSpec& rng)
{
    Engine engine = block_engine(rng, 0);
    return sample(grid, engine);
}

PointConfiguration thin_pair(const PointConfiguration& cfg, double t, const MeasureGrid& grid, Engine& engine)
{
    if (!(t >= 0)) throw std::invalid_argument("thin_pair: t must be non-negative");
    if (cfg.size() != grid.size()) throw std::invalid_argument("thin_pair: configuration does not match grid");
    if (t == 0) return cfg;
    const double keep = std::exp(-t);
    PointConfiguration out;
    out.counts.resize(cfg.counts.size());
    for (Index j = 0; j < cfg.size(); ++j) {
        std::int64_t kept = 0;
        if (cfg.counts[j] > 0) {
            std::binomial_distribution<std::int64_t> bin(cfg.counts[j], keep);
            kept = bin(engine);
        }
        const double fresh_mean = -std::expm1(-t) * grid.weights()[j];
        std::int64_t fresh = 0;
        if (fresh_mean > 0) {
            std::poisson_distribution<std::int64_t> pois(fresh_mean);
            fresh = pois(engine);
        }
        out.counts[j] = kept + fresh;
    }
    return out;
}

// ---------------------------------------------------------------------------

MultipleIntegral::MultipleIntegral(Kernel f) : f_(std::move(f))
{
    if (!f_.symmetric()) throw std::invalid_argument("MultipleIntegral: kernel must be symmetric");
    off_diagonal_ = max_diagonal_abs(f_) == 0.0;
    if (!off_diagonal_) {
        const int q = f_.order();
        const Index n = f_.num_atoms();
        for (int k = 0; k <= q; ++k) {
            const Eigen::VectorXd w = tensor_weights_of(f_, q - k);
            Eigen::MatrixXd h(int_pow(n, k), f_.k_slots());
            for (Index c = 0; c < f_.k_slots(); ++c) {
                Eigen::Map<const Eigen::MatrixXd> m(f_.values().col(c).data(), int_pow(n, q - k), int_pow(n, k));
                h.col(c) = m.transpose() * w;
            }
            partials_.push_back(std::move(h));
        }
    }
}

void MultipleIntegral::accumulate(const PointConfiguration& cfg, Eigen::Ref<Eigen::VectorXd> out) const
{
    const int q = f_.order();
    const Index n = f_.num_atoms();
    const Index ks = f_.k_slots();
    if (cfg.size() != n) throw std::invalid_argument("MultipleIntegral: configuration does not match grid");
    if (q == 0) {
        out += f_.values().row(0).transpose();
        return;
    }
    if (off_diagonal_) {
        const Eigen::VectorXd v = cfg.compensated(*f_.grid());
        Eigen::RowVectorXd cur = v.transpose() * Eigen::Map<const Eigen::MatrixXd>(f_.values().data(), n, int_pow(n, q - 1) * ks);
        for (int s = 1; s < q; ++s) {
            Eigen::RowVectorXd next = v.transpose() * Eigen::Map<const Eigen::MatrixXd>(cur.data(), n, cur.size() / n);
            cur = std::move(next);
        }
        out += cur.transpose();
        return;
    }

    // I_q = sum_k C(q,k) (-1)^{q-k} sum over ordered distinct point k-tuples of h_k(cells).
    std::vector<std::int64_t> used(static_cast<std::size_t>(n), 0);
    for (int k = 0; k <= q; ++k) {
        const double sign = ((q - k) % 2 == 0) ? 1.0 : -1.0;
        const double coef = sign * to_double(binomial(q, k));
        const Eigen::MatrixXd& h = partials_[k];
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(ks);
        auto visit = [&](auto&& self, int depth, Index flat, double mult) -> void {
            if (depth == k) {
                acc += mult * h.row(flat);
                return;
            }
            for (Index j = 0; j < n; ++j) {
                const std::int64_t avail = cfg.counts[j] - used[j];
                if (avail <= 0) continue;
                ++used[j];
                self(self, depth + 1, flat * n + j, mult * static_cast<double>(avail));
                --used[j];
            }
        };
        visit(visit, 0, 0, 1.0);
        out += coef * acc.transpose();
    }
}

Eigen::VectorXd MultipleIntegral::operator()(const PointConfiguration& cfg) const
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(f_.k_slots());
    accumulate(cfg, out);
    return out;
}

Eigen::VectorXd eval_multiple_integral(const Kernel& f, const PointConfiguration& cfg)
{
    if (!f.symmetric()) throw std::invalid_argument("eval_multiple_integral: kernel must be symmetric");
    if (max_diagonal_abs(f) > 1e-14) throw DiagonalSupportError("eval_multiple_integral: kernel has diagonal support");
    return MultipleIntegral(zero_diagonals(f))(cfg);
}

Eigen::VectorXd eval_cell_integral(const Kernel& f, const PointConfiguration& cfg)
{
    return MultipleIntegral(f)(cfg);
}

ChaosEvaluator::ChaosEvaluator(const ChaosVector& x) : k_dim_(x.k_dim()), constant_(Eigen::VectorXd::Zero(x.k_dim()))
{
    for (const auto& [q, f] : x.kernels()) {
        if (q == 0) constant_ += f.values().row(0).transpose();
        else terms_.emplace_back(f);
    }
}

Eigen::VectorXd ChaosEvaluator::operator()(const PointConfiguration& cfg) const
{
    Eigen::VectorXd out = constant_;
    for (const auto& t : terms_) t.accumulate(cfg, out);
    return out;
}

// ---------------------------------------------------------------------------

void McStats::push(const Eigen::VectorXd& x)
{
    if (n == 0) {
        mean = Eigen::VectorXd::Zero(x.size());
        m2 = Eigen::VectorXd::Zero(x.size());
    }
    ++n;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta.cwiseProduct(x - mean);
}

void McStats::merge(const McStats& other)
{
    if (other.n == 0) return;
    if (n == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(other.n);
    const double nt = na + nb;
    const Eigen::VectorXd delta = other.mean - mean;
    mean += delta * (nb / nt);
    m2 += other.m2 + delta.cwiseAbs2() * (na * nb / nt);
    n += other.n;
}

Eigen::VectorXd McStats::variance() const
{
    if (n < 2) return Eigen::VectorXd::Zero(mean.size());
    return m2 / static_cast<double>(n - 1);
}

Eigen::VectorXd McStats::std_error() const
{
    if (n < 2) return Eigen::VectorXd::Zero(mean.size());
    return (variance() / static_cast<double>(n)).cwiseSqrt();
}

McStats monte_carlo(Index reps, Index dim, const RngSpec& rng, const ReplicationFn& draw, int workers)
{
    if (reps < 1) throw std::invalid_argument("monte_carlo: need at least one replication");
    std::vector<McStats> parts(static_cast<std::size_t>(block_count(reps)));
    for_blocks(reps, rng, workers, [&](Index b, Index begin, Index end, Engine& engine) {
        McStats local;
        Eigen::VectorXd x(dim);
        for (Index i = begin; i < end; ++i) {
            x.setZero();
            draw(engine, x);
            local.push(x);
        }
        parts[static_cast<std::size_t>(b)] = std::move(local);
    });
    return pairwise_merge(parts, 0, parts.size());
}

MomentEstimates mc_moments(const ChaosVector& x, Index reps, const RngSpec& rng, int workers)
{
    if (reps < 2) throw std::invalid_argument("mc_moments: need at least two replications");
    const ChaosEvaluator eval(x);
    const MeasureGrid& grid = *x.grid();
    const Index k = x.k_dim();
    const McStats st = monte_carlo(
        reps, 2 + k + k * k, rng,
        [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
            const Eigen::VectorXd v = eval(sample(grid, e));
            const double n2 = v.squaredNorm();
            out[0] = n2;
            out[1] = n2 * n2;
            out.segment(2, k) = v;
            Eigen::Map<Eigen::MatrixXd>(out.data() + 2 + k, k, k) = v * v.transpose();
        },
        workers);
    const Eigen::VectorXd se = st.std_error();
    MomentEstimates m;
    m.reps = reps;
    m.m2 = st.mean[0];
    m.m2_se = se[0];
    m.m4 = st.mean[1];
    m.m4_se = se[1];
    m.mean = st.mean.segment(2, k);
    m.mean_se = se.segment(2, k);
    m.S_hat = Eigen::Map<const Eigen::MatrixXd>(st.mean.data() + 2 + k, k, k);
    m.S_se = Eigen::Map<const Eigen::MatrixXd>(se.data() + 2 + k, k, k);
    return m;
}

namespace {

ScalarEstimate scalar_of(const McStats& st, Index reps, Index i = 0)
{
    return {st.mean[i], st.std_error()[i], reps};
}

void require_scalar(const Kernel& f, const char* who)
{
    if (f.k_slots() != 1) throw std::invalid_argument(std::string(who) + ": scalar kernel required");
}

}  // namespace

ScalarEstimate mc_cross_moment(const Kernel& f, const Kernel& g, Index reps, const RngSpec& rng, int workers)
{
    require_scalar(f, "mc_cross_moment");
    require_scalar(g, "mc_cross_moment");
    if (!same_grid(f.grid(), g.grid())) throw std::invalid_argument("mc_cross_moment: kernels live on different grids");
    const MultipleIntegral If(f), Ig(g);
    const MeasureGrid& grid = *f.grid();
    const McStats st = monte_carlo(
        reps, 1, rng,
        [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
            const auto cfg = sample(grid, e);
            out[0] = If(cfg)[0] * Ig(cfg)[0];
        },
        workers);
    return scalar_of(st, reps);
}

ScalarEstimate mc_mehler(const Kernel& f, double t, Index reps, const RngSpec& rng, int workers)
{
    require_scalar(f, "mc_mehler");
    const MultipleIntegral If(f);
    const MeasureGrid& grid = *f.grid();
    const McStats st = monte_carlo(
        reps, 1, rng,
        [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
            const auto cfg = sample(grid, e);
            const auto cfg_t = thin_pair(cfg, t, grid, e);
            out[0] = If(cfg_t)[0] * If(cfg)[0];
        },
        workers);
    return scalar_of(st, reps);
}

std::vector<PairLimitRow> pair_limit_check(const Kernel& f, const std::vector<double>& t_list, Index reps, const RngSpec& rng,
                                           int workers)
{
    require_scalar(f, "pair_limit_check");
    for (std::size_t i = 0; i < t_list.size(); ++i) {
        if (!(t_list[i] > 0)) throw std::invalid_argument("pair_limit_check: times must be positive");
        if (i > 0 && !(t_list[i] < t_list[i - 1])) throw std::invalid_argument("pair_limit_check: times must decrease");
    }
    const MultipleIntegral If(f);
    const MeasureGrid& grid = *f.grid();
    const double ef2 = to_double(factorial(f.order())) * norm_sq(f);
    std::vector<PairLimitRow> rows;
    for (std::size_t i = 0; i < t_list.size(); ++i) {
        const double t = t_list[i];
        const RngSpec sub{rng.seed, rng.stream * 1000003u + i};
        const McStats st = monte_carlo(
            reps, 2, sub,
            [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
                const auto cfg = sample(grid, e);
                const auto cfg_t = thin_pair(cfg, t, grid, e);
                const double F = If(cfg)[0];
                const double d = If(cfg_t)[0] - F;
                out[0] = d * F / t;
                out[1] = d * d / t;
            },
            workers);
        PairLimitRow row;
        row.t = t;
        row.drift = scalar_of(st, reps, 0);
        row.square = scalar_of(st, reps, 1);
        row.drift_limit = -f.order() * ef2;
        row.square_limit = 2.0 * f.order() * ef2;
        rows.push_back(row);
    }
    return rows;
}

ScalarEstimate mc_remainder_fourth(const ChaosVector& x, double t, Index reps, const RngSpec& rng, int workers)
{
    if (!(t > 0)) throw std::invalid_argument("mc_remainder_fourth: t must be positive");
    const ChaosEvaluator eval(x);
    const MeasureGrid& grid = *x.grid();
    const McStats st = monte_carlo(
        reps, 1, rng,
        [&](Engine& e, Eigen::Ref<Eigen::VectorXd> out) {
            const auto cfg = sample(grid, e);
            const auto cfg_t = thin_pair(cfg, t, grid, e);
            const double d2 = (eval(cfg_t) - eval(cfg)).squaredNorm();
            out[0] = d2 * d2 / t;
        },
        workers);
    return scalar_of(st, reps);
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd chaos_samples(const ChaosVector& x, Index reps, const RngSpec& rng)
{
    const ChaosEvaluator eval(x);
    const MeasureGrid& grid = *x.grid();
    Eigen::MatrixXd out(reps, x.k_dim());
    for_blocks(reps, rng, 0, [&](Index, Index begin, Index end, Engine& e) {
        for (Index i = begin; i < end; ++i) out.row(i) = eval(sample(grid, e)).transpose();
    });
    return out;
}

Eigen::MatrixXd gaussian_samples(const CovarianceMatrix& cov, Index reps, const RngSpec& rng)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.matrix());
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd sqrt_cov = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    Eigen::MatrixXd z(reps, cov.dim());
    for_blocks(reps, rng, 0, [&](Index, Index begin, Index end, Engine& e) {
        std::normal_distribution<double> normal;
        for (Index i = begin; i < end; ++i)
            for (Index j = 0; j < cov.dim(); ++j) z(i, j) = normal(e);
    });
    return z * sqrt_cov;
}

SmoothDistance empirical_smooth_distance(const Eigen::MatrixXd& x_samples, const Eigen::MatrixXd& z_samples,
                                         Index dictionary_size, const RngSpec& rng)
{
    if (dictionary_size < 1) throw std::invalid_argument("empirical_smooth_distance: empty dictionary");
    if (x_samples.cols() != z_samples.cols()) throw std::invalid_argument("empirical_smooth_distance: dimension mismatch");
    if (x_samples.rows() < 2 || z_samples.rows() < 2) throw std::invalid_argument("empirical_smooth_distance: too few samples");
    const Index k = x_samples.cols();
    Engine e = block_engine(rng, 0);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd u(k, dictionary_size);
    Eigen::RowVectorXd b(dictionary_size);
    for (Index d = 0; d < dictionary_size; ++d) {
        Eigen::VectorXd dir(k);
        for (Index j = 0; j < k; ++j) dir[j] = normal(e);
        const double radius = std::pow(unif(e), 1.0 / static_cast<double>(k));
        u.col(d) = dir.normalized() * radius;
        b[d] = 2.0 * std::numbers::pi * unif(e);
    }
    auto moments = [&](const Eigen::MatrixXd& s) {
        const Eigen::MatrixXd h = ((s * u).rowwise() + b).array().cos().matrix();
        const Eigen::RowVectorXd mean = h.colwise().mean();
        const Eigen::RowVectorXd var =
            (h.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(s.rows() - 1);
        return std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>(mean, var / static_cast<double>(s.rows()));
    };
    const auto [mx, vx] = moments(x_samples);
    const auto [mz, vz] = moments(z_samples);
    SmoothDistance out;
    for (Index d = 0; d < dictionary_size; ++d) {
        const double diff = std::abs(mx[d] - mz[d]);
        if (d == 0 || diff > out.value) {
            out.value = diff;
            out.std_error = std::sqrt(vx[d] + vz[d]);
            out.argmax = d;
        }
    }
    return out;
}

SmoothDistance empirical_smooth_distance(const ChaosVector& x, const CovarianceMatrix& gauss_cov, Index dictionary_size,
                                         Index reps, const RngSpec& rng)
{
    if (gauss_cov.dim() != x.k_dim()) throw std::invalid_argument("empirical_smooth_distance: covariance dimension mismatch");
    const Eigen::MatrixXd xs = chaos_samples(x, reps, {rng.seed, rng.stream * 3 + 0});
    const Eigen::MatrixXd zs = gaussian_samples(gauss_cov, reps, {rng.seed, rng.stream * 3 + 1});
    return empirical_smooth_distance(xs, zs, dictionary_size, {rng.seed, rng.stream * 3 + 2});
}

// ---------------------------------------------------------------------------

std::pair<double, double> product_formula_pathwise_check(const Kernel& f, const Kernel& g, const PointConfiguration& cfg)
{
    require_scalar(f, "product_formula_pathwise_check");
    require_scalar(g, "product_formula_pathwise_check");
    const double lhs = eval_cell_integral(f, cfg)[0] * eval_cell_integral(g, cfg)[0];
    double rhs = 0.0;
    for (const auto& term : product_expansion(f.order(), g.order()))
        rhs += to_double(term.coefficient) * eval_cell_integral(symmetrize(contract(f, g, term.r, term.l)), cfg)[0];
    return {lhs, rhs};
}

double product_formula_rezeroed_rhs(const Kernel& f, const Kernel& g, const PointConfiguration& cfg)
{
    require_scalar(f, "product_formula_rezeroed_rhs");
    require_scalar(g, "product_formula_rezeroed_rhs");
    double rhs = 0.0;
    for (const auto& term : product_expansion(f.order(), g.order()))
        rhs += to_double(term.coefficient) *
               eval_multiple_integral(zero_diagonals(symmetrize(contract(f, g, term.r, term.l))), cfg)[0];
    return rhs;
}

}  // namespace pstein
