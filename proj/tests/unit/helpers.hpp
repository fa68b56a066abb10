#ifndef PSTEIN_TEST_HELPERS_HPP
#define PSTEIN_TEST_HELPERS_HPP

#include "pstein/chaos_algebra.hpp"

#include <random>

namespace testing_support {

using namespace pstein;

inline GridPtr random_grid(Index n, std::mt19937_64& rng, double lo = 0.2, double hi = 1.5)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd w(n);
    for (Index i = 0; i < n; ++i) w[i] = u(rng);
    return make_grid(MeasureGrid::from_weights(w));
}

/// Random kernel; optionally symmetrized and zeroed on diagonals.
inline Kernel random_kernel(const GridPtr& grid, int q, int k_dim, std::mt19937_64& rng, bool sym = true, bool offdiag = true)
{
    std::normal_distribution<double> z;
    const Index rows = int_pow(grid->size(), q);
    Eigen::MatrixXd v(rows, std::max(k_dim, 1));
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = z(rng);
    Kernel f(grid, q, k_dim, v);
    if (sym) f = symmetrize(f);
    if (offdiag) f = zero_diagonals(f);
    return f;
}

inline ChaosVector random_chaos(const GridPtr& grid, int N, int k_dim, std::mt19937_64& rng, double scale = 1.0)
{
    ChaosVector x(grid, k_dim);
    for (int q = 1; q <= N; ++q) x.add(random_kernel(grid, q, k_dim, rng).scaled(scale));
    return x;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testing_support

#endif
