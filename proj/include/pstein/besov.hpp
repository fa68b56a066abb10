// Fractional calculus on [0,1] and the Brownian approximation of a
// compensated Poisson process in the Besov-Liouville space I_{beta,2}.
//
// K = I_{beta,2} is identified with L^2([0,1]) through D^beta; the truncated
// K basis is the orthonormal family sqrt(n) 1_{cell i} on the time grid.

#ifndef PSTEIN_BESOV_HPP
#define PSTEIN_BESOV_HPP

#include "pstein/bounds.hpp"
#include "pstein/poisson_mc.hpp"

#include <vector>

namespace pstein {

/// Uniform grid on [0,1]: cell i is [i/n, (i+1)/n], node i its right end.
struct TimeGrid
{
    Index n = 0;
    Eigen::VectorXd nodes;
    Eigen::VectorXd quad_weights;

    explicit TimeGrid(Index n);
    double lo(Index i) const { return static_cast<double>(i) / static_cast<double>(n); }
    double hi(Index i) const { return static_cast<double>(i + 1) / static_cast<double>(n); }
};

struct FracParams
{
    double beta = 0.25;
    double lambda = 1.0;

    void validate() const;
};

enum class Side { left, right };

/// Riemann-Liouville integral of a function constant on cells (value f[i] on
/// cell i), evaluated at the nodes; exact for such functions.
Eigen::VectorXd frac_integral(const TimeGrid& grid, const Eigen::VectorXd& f, double beta, Side side = Side::left);

/// D^beta f = d/ds I^{1-beta} f, by differencing I^{1-beta} f over each cell.
Eigen::VectorXd frac_derivative(const TimeGrid& grid, const Eigen::VectorXd& f, double beta);

/// (r - a)_+^{-beta} / Gamma(1 - beta) at the nodes; 0 where r <= a.
Eigen::VectorXd frac_derivative_indicator(const TimeGrid& grid, double a, double beta);

/// r^{1-beta} / ((1 - beta) Gamma(1 - beta)) at the nodes.
Eigen::VectorXd frac_derivative_identity(const TimeGrid& grid, double beta);

/// E[(D^beta Z)(r) (D^beta Z)(s)] for Brownian motion Z.
double bm_cov_value(double r, double s, double beta);

Eigen::MatrixXd bm_cov_kernel(const TimeGrid& grid, const FracParams& params);

/// Brownian kernel minus lambda (r - r^s)^{1-beta} (s - r^s)^{1-beta} / (Gamma(1-beta)^2 (1-beta)^2).
Eigen::MatrixXd poisson_cov_kernel(const TimeGrid& grid, const FracParams& params);

/// L^2([0,1]^2) distance of two kernels sampled on the grid.
double hs_on_L2(const TimeGrid& grid, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// ||f *_1^0 f||^2 = 1 / (lambda Gamma(1-beta)^4 (1-2 beta)^2 (3 - 4 beta)).
double contraction_norm_sq_closed_form(const FracParams& params);

/// Coordinates of D^beta 1_{[x, inf)} in the cell basis of `time`.
Eigen::RowVectorXd indicator_coordinates(const TimeGrid& time, double x, double beta);

/// Coordinates of D^beta Id in the cell basis of `time`.
Eigen::RowVectorXd identity_coordinates(const TimeGrid& time, double beta);

/// The order-1 kernel x -> lambda^{-1/2} 1_{[x, inf)} on a jump grid of
/// `m_jump` cells of mass lambda / m_jump, K-valued in the cell basis.
Kernel besov_kernel(const FracParams& params, Index n_time, Index m_jump);

/// Covariance of the Brownian motion in the cell basis, exact up to quadrature.
Eigen::MatrixXd projected_bm_covariance(Index n_time, double beta);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct BesovRateRow
{
    double lambda = 0;
    double value = 0;        // discretized ||f *_1^0 f||^2
    double closed_form = 0;
};

std::vector<BesovRateRow> besov_contraction_rate(double beta, const std::vector<double>& lambdas, Index n_time, Index m_jump);

/// Contraction bound for X_lambda = I_1(f); the covariance term comes from
/// the two lemma kernels on a grid of n_cov points.
BoundReport besov_pipeline(const FracParams& params, Index n_time, Index m_jump, Index n_cov);

/// D^beta-coordinates of X_lambda from simulated jump times, one row per path.
Eigen::MatrixXd simulate_besov_paths(const FracParams& params, Index n_time, Index reps, const RngSpec& rng);

struct BesovConfig
{
    double beta = 0.25;
    std::vector<double> lambdas{10, 100, 1000, 10000};
    Index n_time = 32;
    Index m_jump = 256;
    Index n_cov = 512;
    Index reps = 0;          // 0 disables the simulation
    Index dictionary = 32;
};

struct BesovRow
{
    double lambda = 0;
    double contraction_norm_sq = 0;
    double contraction_norm = 0;
    double closed_form = 0;
    double hs_diff = 0;            // lemma kernels
    double hs_diff_discrete = 0;   // jump-grid covariance against the projected Brownian covariance
    double m2 = 0;
    double total_bound = 0;
    double smooth_distance = -1;
    double smooth_distance_se = 0;
};

struct BesovReport
{
    std::vector<BesovRow> rows;
    double slope_norm_sq = 0;
    double slope_bound = 0;
};

BesovReport run_besov(const BesovConfig& cfg, const RngSpec& rng);

}  // namespace pstein

#endif  // PSTEIN_BESOV_HPP
