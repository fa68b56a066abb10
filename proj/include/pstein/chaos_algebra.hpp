// Chaos-level algebra for finite Poisson chaos expansions: the product
// formula, the combinatorial coefficients of the contraction bound,
// isometry-based moments and exact fourth moments.

#ifndef PSTEIN_CHAOS_ALGEBRA_HPP
#define PSTEIN_CHAOS_ALGEBRA_HPP

#include "pstein/measure_kernels.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pstein {

/// Exact non-negative integer for factorial/binomial products.
using BigCount = unsigned __int128;

BigCount factorial(int n);
BigCount binomial(int n, int k);
double to_double(BigCount v);
std::string to_string(BigCount v);

/// One summand r! C(q,r) C(p,r) C(r,l) I_{q+p-r-l}(f *_r^l g) of the product formula.
struct ExpansionTerm
{
    int r = 0;
    int l = 0;
    BigCount coefficient = 0;
    int result_order = 0;
};

std::vector<ExpansionTerm> product_expansion(int q, int p);

BigCount coeff_a(int p, int q, int r);
BigCount coeff_b(int p, int q, int r);
BigCount coeff_c(int p, int q, int l, int m, int r, int s);

struct IndexTuple
{
    int r = 0;
    int s = 0;
    int l = 0;
    int m = 0;
    friend bool operator==(const IndexTuple&, const IndexTuple&) = default;
    friend auto operator<=>(const IndexTuple&, const IndexTuple&) = default;
};

/// Tuples (r, s, l, m) with r + l = s + m, both corners excluded.
std::vector<IndexTuple> index_set_I(int q, int p);

/// X = sum_q I_q(f_q) with K-valued symmetric kernels on a shared grid.
/// An order-0 kernel, when present, is the (constant) mean of X.
class ChaosVector
{
public:
    ChaosVector(GridPtr grid, int k_dim);

    /// Adds (or accumulates into) the order-q kernel. The kernel must be
    /// flagged symmetric and carry k_dim slices.
    ChaosVector& add(const Kernel& f);

    const GridPtr& grid() const { return grid_; }
    int k_dim() const { return k_dim_; }
    const std::map<int, Kernel>& kernels() const { return kernels_; }
    bool has(int q) const { return kernels_.count(q) > 0; }
    const Kernel& kernel(int q) const;
    /// Highest order present (N); 0 for the empty vector.
    int max_order() const;
    bool centered() const { return !has(0); }
    ChaosVector scaled(double c) const;

private:
    GridPtr grid_;
    int k_dim_;
    std::map<int, Kernel> kernels_;
};

/// Covariance operator of a K-valued variable in the truncated K basis.
class CovarianceMatrix
{
public:
    explicit CovarianceMatrix(Eigen::MatrixXd entries);

    const Eigen::MatrixXd& matrix() const { return entries_; }
    Index dim() const { return entries_.rows(); }
    double trace() const { return entries_.trace(); }
    double hs_norm_sq() const { return entries_.squaredNorm(); }
    double min_eigenvalue() const;

private:
    Eigen::MatrixXd entries_;
};

/// Chaos expansion of I_q(f) I_p(g) as symmetrized K (x) K valued kernels
/// keyed by chaos order; order 0 holds the constant term.
std::map<int, Kernel> product_chaos(const Kernel& f, const Kernel& g);

CovarianceMatrix covariance(const ChaosVector& x);
CovarianceMatrix covariance_of_order(const ChaosVector& x, int q);
double second_moment(const ChaosVector& x);

/// Chaos expansion of the scalar ||X||_K^2.
ChaosVector norm_sq_chaos(const ChaosVector& x);

/// Exact E||X||_K^4, from the chaos expansion of ||X||_K^2.
double fourth_moment_expansion(const ChaosVector& x);

/// E[F_{q,i}^2 F_{p,j}^2] for all (i, j), from the c-coefficient expansion
/// over pairs of symmetrized contractions with r + l = s + m.
Eigen::MatrixXd pair_fourth_moments(const Kernel& fq, const Kernel& fp);

/// Moments and fourth-moment gaps of a centered chaos vector.
struct MomentSummary
{
    int N = 0;
    double m2 = 0;                         // E||X||^2
    double m4 = 0;                         // E||X||^4 (exact, all cross terms)
    Eigen::MatrixXd S;                     // covariance of X
    std::map<int, Eigen::MatrixXd> S_q;    // covariance of F_q
    std::map<int, double> m2_q;            // E||F_q||^2
    std::map<std::pair<int, int>, double> mixed;  // E||F_q||^2 ||F_p||^2, including q = p
    std::map<int, double> gap_q;           // E||F_q||^4 - (E||F_q||^2)^2 - 2||S_q||^2
    std::map<std::pair<int, int>, double> cross;  // p != q: E||F_p||^2||F_q||^2 - E||F_p||^2 E||F_q||^2
    double split_gap = 0;                  // sum of gap_q and cross terms
    double true_gap = 0;                   // m4 - m2^2 - 2||S||^2
    double min_pair_gap = 0;               // min over (q,i,p,j) of the per-pair positivity quantity
};

MomentSummary moment_summary(const ChaosVector& x);

/// Both sides of the identity expressing (q+p)! ||f (x)~ g||^2 through
/// non-symmetrized contraction norms. Scalar symmetric kernels.
std::pair<double, double> contraction00_identity_check(const Kernel& f, const Kernel& g);

/// Chaos expansion of the carre du champ of I_q(f) and I_p(g): the order-k
/// term of the product carries the multiplier (q + p - k) / 2.
ChaosVector gamma_tilde(const Kernel& f, const Kernel& g);

}  // namespace pstein

#endif  // PSTEIN_CHAOS_ALGEBRA_HPP
