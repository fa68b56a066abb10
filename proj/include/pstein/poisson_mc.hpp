// Monte Carlo on an atomic grid: Poisson sampling, pathwise multiple
// integrals, the thinning exchangeable pair and moment estimators.
//
// Atoms are treated as cells of a diffuse space: points falling in the same
// atom are distinct points, so I_q is defined for every kernel, not only for
// kernels vanishing on diagonals. For off-diagonal kernels the cell integral
// reduces to sum_{j distinct} f(j) prod (counts - weights).

#ifndef PSTEIN_POISSON_MC_HPP
#define PSTEIN_POISSON_MC_HPP

#include "pstein/chaos_algebra.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pstein {

using Engine = std::mt19937_64;

struct RngSpec
{
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// Engine for one block of replications; depends only on (seed, stream, block).
Engine block_engine(const RngSpec& rng, std::uint64_t block);

struct PointConfiguration
{
    std::vector<std::int64_t> counts;

    Index size() const { return static_cast<Index>(counts.size()); }
    Eigen::VectorXd compensated(const MeasureGrid& grid) const;
    std::int64_t total() const;
};

PointConfiguration sample(const MeasureGrid& grid, Engine& engine);
PointConfiguration sample(const MeasureGrid& grid, const RngSpec& rng);

/// eta^t: each point survives with probability e^{-t}, plus an independent
/// Poisson((1 - e^{-t}) mu) configuration.
PointConfiguration thin_pair(const PointConfiguration& cfg, double t, const MeasureGrid& grid, Engine& engine);

class DiagonalSupportError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Distinct-atom compensated sum; f must be symmetric and vanish on diagonals.
Eigen::VectorXd eval_multiple_integral(const Kernel& f, const PointConfiguration& cfg);

/// Cell integral of a symmetric kernel (diagonal entries allowed).
Eigen::VectorXd eval_cell_integral(const Kernel& f, const PointConfiguration& cfg);

/// Reusable evaluator: validates once, then picks the multilinear fast path
/// for off-diagonal kernels and the cell expansion otherwise.
class MultipleIntegral
{
public:
    explicit MultipleIntegral(Kernel f);

    const Kernel& kernel() const { return f_; }
    bool off_diagonal() const { return off_diagonal_; }
    /// Adds I_q(f) at the configuration to `out` (one entry per k-slot).
    void accumulate(const PointConfiguration& cfg, Eigen::Ref<Eigen::VectorXd> out) const;
    Eigen::VectorXd operator()(const PointConfiguration& cfg) const;

private:
    Kernel f_;
    bool off_diagonal_;
    std::vector<Eigen::MatrixXd> partials_;  // h_k: integral over the last q - k slots
};

/// Evaluates X = sum_q I_q(f_q) (plus its constant term) pathwise.
class ChaosEvaluator
{
public:
    explicit ChaosEvaluator(const ChaosVector& x);

    Index dim() const { return k_dim_; }
    Eigen::VectorXd operator()(const PointConfiguration& cfg) const;

private:
    Index k_dim_;
    Eigen::VectorXd constant_;
    std::vector<MultipleIntegral> terms_;
};

/// Running mean and variance of a vector statistic (Chan's merge).
struct McStats
{
    Index n = 0;
    Eigen::VectorXd mean;
    Eigen::VectorXd m2;  // sum of squared deviations

    void push(const Eigen::VectorXd& x);
    void merge(const McStats& other);
    Eigen::VectorXd variance() const;
    /// sd / sqrt(n); for a sample mean this equals the delete-one jackknife error.
    Eigen::VectorXd std_error() const;
};

using ReplicationFn = std::function<void(Engine&, Eigen::Ref<Eigen::VectorXd>)>;

/// Runs `reps` replications of `draw` in fixed blocks; the result is
/// bitwise independent of `workers` (0 = hardware concurrency).
McStats monte_carlo(Index reps, Index dim, const RngSpec& rng, const ReplicationFn& draw, int workers = 0);

struct MomentEstimates
{
    Index reps = 0;
    double m2 = 0, m2_se = 0;
    double m4 = 0, m4_se = 0;
    Eigen::VectorXd mean, mean_se;
    Eigen::MatrixXd S_hat, S_se;  // E[X X^T]; X is centered so this is the covariance
};

MomentEstimates mc_moments(const ChaosVector& x, Index reps, const RngSpec& rng, int workers = 0);

struct ScalarEstimate
{
    double estimate = 0;
    double std_error = 0;
    Index reps = 0;
};

/// E[I_q(f) I_p(g)] for scalar kernels.
ScalarEstimate mc_cross_moment(const Kernel& f, const Kernel& g, Index reps, const RngSpec& rng, int workers = 0);

/// E[F^t F] for F = I_q(f) scalar.
ScalarEstimate mc_mehler(const Kernel& f, double t, Index reps, const RngSpec& rng, int workers = 0);

struct PairLimitRow
{
    double t = 0;
    ScalarEstimate drift;    // (1/t) E[(F^t - F) F]
    ScalarEstimate square;   // (1/t) E[(F^t - F)^2]
    double drift_limit = 0;  // -q E[F^2]
    double square_limit = 0; // 2q E[F^2]
};

std::vector<PairLimitRow> pair_limit_check(const Kernel& f, const std::vector<double>& t_list, Index reps, const RngSpec& rng,
                                           int workers = 0);

/// (1/t) E||X^t - X||^4.
ScalarEstimate mc_remainder_fourth(const ChaosVector& x, double t, Index reps, const RngSpec& rng, int workers = 0);

struct SmoothDistance
{
    double value = 0;      // max over the dictionary of |E h(X) - E h(Z)|
    double std_error = 0;  // standard error of the maximizing difference
    Index argmax = 0;
};

/// Lower-bound surrogate for d_3 over h(x) = cos(<x, u> + b), |u| <= 1.
/// Rows of the sample matrices are draws.
SmoothDistance empirical_smooth_distance(const Eigen::MatrixXd& x_samples, const Eigen::MatrixXd& z_samples,
                                         Index dictionary_size, const RngSpec& rng);

SmoothDistance empirical_smooth_distance(const ChaosVector& x, const CovarianceMatrix& gauss_cov, Index dictionary_size,
                                         Index reps, const RngSpec& rng);

/// Draws of a centered Gaussian with covariance `cov` (symmetric square root).
Eigen::MatrixXd gaussian_samples(const CovarianceMatrix& cov, Index reps, const RngSpec& rng);

/// Draws of X, one row per replication, in block order.
Eigen::MatrixXd chaos_samples(const ChaosVector& x, Index reps, const RngSpec& rng);

/// I_q(f) I_p(g) against the product-formula expansion at one configuration.
std::pair<double, double> product_formula_pathwise_check(const Kernel& f, const Kernel& g, const PointConfiguration& cfg);

/// Right-hand side with every contraction re-zeroed on diagonals and
/// evaluated by the distinct-atom sum. Kept to document that this variant
/// does not reproduce I_q(f) I_p(g).
double product_formula_rezeroed_rhs(const Kernel& f, const Kernel& g, const PointConfiguration& cfg);

struct EstimatorRow
{
    std::string quantity;
    double estimate = 0;
    std::optional<double> exact;
    double std_error = 0;
    Index reps = 0;
    std::uint64_t seed = 0;
};

}  // namespace pstein

#endif  // PSTEIN_POISSON_MC_HPP
