// Edge counts of a Poisson random geometric graph on growing windows.
//
// W_t = t^{1/(2d)} W with W = [-a, a]^d, H_{lambda,t} = {|x - y| < t^{1/(2d)} r_lambda}.
// F(t) counts ordered pairs of distinct points (x, y) with x, y in W_t and
// |x - y| < r_t, so F(t) = E F(t) + I_1(f_1(t)) + I_2(f_2(t)) with
// f_1(t)(x) = 2 lambda int 1(x, y) dy and f_2(t) = 1, and
// Var F(t) = ||f_1(t)||^2 + 2 ||f_2(t)||^2.

#ifndef PSTEIN_RGG_HPP
#define PSTEIN_RGG_HPP

#include "pstein/bounds.hpp"
#include "pstein/poisson_mc.hpp"

#include <string>
#include <tuple>
#include <vector>

namespace pstein {

enum class Regime { R1, R2, R3 };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// r_lambda = scale * lambda^{-exponent}.
struct RadiusLaw
{
    double scale = 0.5;
    double exponent = 1.0;

    double operator()(double lambda) const;
};

/// R1: r = 0.05; R2: r = 1/(2 lambda), so lambda psi = 1 on W = [-1/2, 1/2];
/// R3: r = lambda^{-3/2} / 2, so lambda psi -> 0 and lambda sqrt(psi) -> inf.
RadiusLaw regime_fixture(Regime r);

struct RggConfig
{
    int d = 1;
    double lambda = 64;
    double half_width = 0.5;
    RadiusLaw edge_radius_fn;
    std::vector<double> time_grid{0.2, 0.4, 0.6, 0.8, 1.0};

    void validate() const;
    double radius() const { return edge_radius_fn(lambda); }
    /// Half-width of W_t and edge radius at time t.
    double half_width_at(double t) const;
    double radius_at(double t) const;
};

/// Lebesgue measure of W_t.
double window_measure(const RggConfig& cfg, double t);
/// Lebesgue measure of the open r_t ball intersected with W_t - W_t.
double psi(const RggConfig& cfg, double t);

struct RegimeStats
{
    double ell1 = 0;
    double psi1 = 0;
    double lambda_psi = 0;
    double sigma_sq = 0;            // 4 ell lambda^3 psi^2 + ell lambda^2 psi
    double sigma_sq_corrected = 0;  // 4 ell lambda^3 psi^2 + 2 ell lambda^2 psi
    Regime regime = Regime::R2;
};

RegimeStats regime_stats(const RggConfig& cfg, Regime regime);

/// Cell kernels on a grid of cells of side about r / cells_per_radius covering
/// W_1, with cell mass lambda h^d; K-index = time index, no K weights.
/// Values are cell averages (d = 1 exact, d = 2 by sub-cell midpoints).
struct RggKernels
{
    Kernel f1;
    Kernel f2;
};

RggKernels exact_kernels(const RggConfig& cfg, Index cells_per_radius, Index subcells = 4);

/// d = 1 kernels with f_2 stored as a band: f2[t](i, k) is the value at cells
/// (i, i + k - width).
struct BandedKernels
{
    Index n = 0;
    Index width = 0;
    double mu = 0;  // lambda h
    Eigen::MatrixXd f1;               // n x T
    std::vector<Eigen::MatrixXd> f2;  // T matrices n x (2 width + 1)

    double f2_at(Index t, Index i, Index j) const;
    BandedKernels scaled(const Eigen::VectorXd& per_time) const;
};

BandedKernels banded_kernels(const RggConfig& cfg, Index cells_per_radius);

/// ||f_q *_r^l f_p||^2 for the seven contractions of orders (1, 2).
ContractionNormSq banded_contraction_norms(const BandedKernels& k);

/// E[<g_1(t), g_1(s)>] + 2 <g_2(t), g_2(s)>, the covariance of the chaos sum.
Eigen::MatrixXd banded_covariance(const BandedKernels& k);

struct ExactMoments
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Mean and covariance of F on the time grid from the continuous geometry (d = 1).
ExactMoments exact_moments(const RggConfig& cfg);

/// F(t) on the time grid for a given point set (one row per point).
Eigen::VectorXd count_edges(const RggConfig& cfg, const Eigen::MatrixXd& points);

/// F(t) on the time grid for one Poisson sample on W_1.
Eigen::VectorXd simulate_edge_count(const RggConfig& cfg, Engine& engine);
Eigen::VectorXd simulate_edge_count(const RggConfig& cfg, const RngSpec& rng);

struct CovarianceEstimate
{
    Eigen::VectorXd mean, mean_se;  // of F
    Eigen::MatrixXd cov, cov_se;    // E[Fbar(t) Fbar(s)], Fbar normalized by the given mean and sigma
    Index reps = 0;
};

CovarianceEstimate mc_normalized_covariance(const RggConfig& cfg, const Eigen::VectorXd& mean, double sigma, Index reps,
                                            const RngSpec& rng, int workers = 0);

struct RegimeCovariance
{
    double limit = 0;              // phi(t, s) as printed
    double finite = 0;             // (4 sqrt(ts(t^s)) lambda psi + t^s) / (4 lambda psi + 1)
    double limit_corrected = 0;    // with the second-order variance 2 ell lambda^2 psi
    double finite_corrected = 0;
};

RegimeCovariance regime_covariance(double t, double s, double lambda_psi, Regime regime);

struct RggPipelineConfig
{
    Regime regime = Regime::R2;
    int d = 1;
    double half_width = 0.5;
    RadiusLaw radius;
    std::vector<double> lambdas{16, 32, 64, 128, 256, 512, 1024};
    std::vector<double> time_grid{0.2, 0.4, 0.6, 0.8, 1.0};
    Index cells_per_radius = 4;
    Index reps = 0;              // MC replications per lambda in mc_lambdas
    std::vector<double> mc_lambdas;
    int workers = 0;
};

RggPipelineConfig default_pipeline(Regime r);

struct RggRow
{
    double lambda = 0;
    Regime regime = Regime::R2;
    double radius = 0;
    double psi1 = 0;
    double lambda_psi = 0;
    double sigma_sq_printed = 0;
    double sigma_sq_kernel = 0;
    double m2 = 0;
    std::vector<double> norms;          // the seven contraction norms, squared
    double beta = 0;
    double contraction_term = 0;
    double cov_term_printed = 0;        // 1/2 ||S - S'||_HS with the printed limit
    double cov_term_corrected = 0;
    double total_bound = 0;             // contraction term + corrected covariance term
    double rate_theorem = 0;            // the regime rate as stated
    double rate_proof = 0;              // R3: lambda^{-2} psi^{-1} + lambda psi; otherwise the stated rate
    // MC, when run for this lambda (negative otherwise)
    double cov_max_dev = -1;            // max |hat C - phi printed|
    double cov_max_dev_se = -1;         // same, in standard errors
    double cov_max_dev_corrected_se = -1;  // against the exact covariance, in standard errors
    double mean_max_dev_se = -1;
};

struct RggReport
{
    std::vector<RggRow> rows;
    double slope_bound = 0;
    double slope_contraction = 0;
    double slope_rate_theorem = 0;
    double slope_rate_proof = 0;
};

/// The seven norms in the order used by RggRow::norms.
std::vector<std::tuple<int, int, int, int>> seven_contractions();

RggReport rgg_pipeline(const RggPipelineConfig& cfg, const RngSpec& rng);

}  // namespace pstein

#endif  // PSTEIN_RGG_HPP
