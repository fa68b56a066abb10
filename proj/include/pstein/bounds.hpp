// The four-moment and contraction bounds on d_3(X, Z) for a finite chaos
// expansion X and a Gaussian Z with covariance S'.

#ifndef PSTEIN_BOUNDS_HPP
#define PSTEIN_BOUNDS_HPP

#include "pstein/chaos_algebra.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pstein {

class NegativeRadicandError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// sqrt(x) for x >= -1e-9 (clamped to 0); NegativeRadicandError below.
double checked_sqrt(double x, const std::string& what);

/// Frobenius norm of S - Sp.
double hs_diff(const CovarianceMatrix& S, const CovarianceMatrix& Sp);

/// One summand of a bound; unused indices are -1.
struct BoundTerm
{
    std::string kind;
    int q = -1, p = -1, r = -1, s = -1, l = -1, m = -1;
    double coefficient = 0;
    double value = 0;  // coefficient times the norm (or norm product, or square root)
};

struct BoundReport
{
    int N = 0;
    double m2 = 0;                     // E||X||^2
    double covariance_term = 0;        // 1/2 ||S - S'||_HS
    double moment_term_detailed = 0;
    double moment_term_compact = 0;    // uses the sum of per-order and cross-order gaps
    double moment_term_compact_exact_gap = -1;  // same constant times sqrt(m4 - m2^2 - 2||S||^2); -1 if not computed
    double split_gap = 0;
    double exact_gap = 0;
    double beta = 0;
    double contraction_term = 0;       // constant times sqrt(beta)
    std::vector<BoundTerm> per_pair_terms;

    double total_detailed() const { return covariance_term + moment_term_detailed; }
    double total_compact() const { return covariance_term + moment_term_compact; }
    double total_contraction() const { return covariance_term + contraction_term; }
};

/// Leading constants of the compact forms, as printed for each theorem.
double four_moment_constant(int N, double m2);
double contraction_constant(int N, double m2);

BoundReport four_moment_bound(const ChaosVector& x, const CovarianceMatrix& Sp);

/// Squared K (x) K norm of f_q *_r^l f_p (not symmetrized).
using ContractionNormSq = std::function<double(int q, int p, int r, int l)>;

/// beta and the contraction bound from externally supplied contraction norms.
BoundReport contraction_bound_from_norms(const std::vector<int>& orders, double m2, double covariance_term,
                                         const ContractionNormSq& norm_sq_of);

BoundReport contraction_bound(const ChaosVector& x, const CovarianceMatrix& Sp);

/// Memoized contraction norms of the kernels of x.
ContractionNormSq dense_contraction_norms(const ChaosVector& x);

}  // namespace pstein

#endif  // PSTEIN_BOUNDS_HPP
