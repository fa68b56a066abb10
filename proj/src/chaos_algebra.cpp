#include "pstein/chaos_algebra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pstein {

namespace {

BigCount checked_mul(BigCount a, BigCount b)
{
    BigCount out = 0;
    if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("combinatorial coefficient overflows 128 bits");
    return out;
}

}  // namespace

BigCount factorial(int n)
{
    if (n < 0) throw std::invalid_argument("factorial of a negative number");
    BigCount out = 1;
    for (int i = 2; i <= n; ++i) out = checked_mul(out, static_cast<BigCount>(i));
    return out;
}

BigCount binomial(int n, int k)
{
    if (n < 0 || k < 0 || k > n) throw std::invalid_argument("binomial: need 0 <= k <= n");
    k = std::min(k, n - k);
    BigCount out = 1;
    // Exact at every step: out * (n - k + i) is divisible by i.
    for (int i = 1; i <= k; ++i) out = checked_mul(out, static_cast<BigCount>(n - k + i)) / static_cast<BigCount>(i);
    return out;
}

double to_double(BigCount v)
{
    return static_cast<double>(v);
}

std::string to_string(BigCount v)
{
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

std::vector<ExpansionTerm> product_expansion(int q, int p)
{
    if (q < 0 || p < 0) throw std::invalid_argument("product_expansion: negative order");
    std::vector<ExpansionTerm> terms;
    for (int r = 0; r <= std::min(q, p); ++r) {
        const BigCount base = checked_mul(checked_mul(factorial(r), binomial(q, r)), binomial(p, r));
        for (int l = 0; l <= r; ++l)
            terms.push_back({r, l, checked_mul(base, binomial(r, l)), q + p - r - l});
    }
    return terms;
}

BigCount coeff_a(int p, int q, int r)
{
    if (p < 1 || q < 1 || r < 0 || r > std::min(p, q)) throw std::invalid_argument("coeff_a: invalid indices");
    const BigCount first = checked_mul(checked_mul(checked_mul(factorial(p), factorial(q)), binomial(q, r)), binomial(p, r));
    const BigCount rf = factorial(r);
    const BigCount bq = binomial(q, r);
    const BigCount bp = binomial(p, r);
    const BigCount second = checked_mul(checked_mul(checked_mul(checked_mul(rf, rf), checked_mul(bq, bq)), checked_mul(bp, bp)),
                                        factorial(std::abs(p - q)));
    return first + second;
}

BigCount coeff_b(int p, int q, int r)
{
    if (p < 1 || q < 1 || r < 0 || r > std::min(p, q)) throw std::invalid_argument("coeff_b: invalid indices");
    return checked_mul(checked_mul(checked_mul(factorial(p), factorial(q)), binomial(q, r)), binomial(p, r));
}

BigCount coeff_c(int p, int q, int l, int m, int r, int s)
{
    const int mn = std::min(p, q);
    if (p < 1 || q < 1 || r < 0 || s < 0 || r > mn || s > mn || l < 0 || l > r || m < 0 || m > s)
        throw std::invalid_argument("coeff_c: invalid indices");
    BigCount c = checked_mul(factorial(r), factorial(s));
    c = checked_mul(c, checked_mul(binomial(q, r), binomial(q, s)));
    c = checked_mul(c, checked_mul(binomial(p, r), binomial(p, s)));
    c = checked_mul(c, checked_mul(binomial(r, l), binomial(s, m)));
    return checked_mul(c, factorial(p + q - r - l));
}

std::vector<IndexTuple> index_set_I(int q, int p)
{
    if (q < 1 || p < 1) throw std::invalid_argument("index_set_I: orders must be positive");
    const int mn = std::min(q, p);
    std::vector<IndexTuple> out;
    for (int r = 0; r <= mn; ++r)
        for (int s = 0; s <= mn; ++s)
            for (int l = 0; l <= r; ++l)
                for (int m = 0; m <= s; ++m) {
                    if (r + l != s + m) continue;
                    const IndexTuple t{r, s, l, m};
                    if (t == IndexTuple{0, 0, 0, 0} || t == IndexTuple{mn, mn, mn, mn}) continue;
                    out.push_back(t);
                }
    return out;
}

// ---------------------------------------------------------------------------

ChaosVector::ChaosVector(GridPtr grid, int k_dim) : grid_(std::move(grid)), k_dim_(k_dim)
{
    if (!grid_) throw std::invalid_argument("ChaosVector: null grid");
    if (k_dim_ < 1) throw std::invalid_argument("ChaosVector: k_dim must be positive");
}

ChaosVector& ChaosVector::add(const Kernel& f)
{
    if (!f.symmetric()) throw std::invalid_argument("ChaosVector: kernels must be symmetric");
    if (f.k_slots() != k_dim_) throw std::invalid_argument("ChaosVector: kernel k_dim mismatch");
    if (!same_grid(f.grid(), grid_)) throw std::invalid_argument("ChaosVector: kernel grid mismatch");
    auto it = kernels_.find(f.order());
    if (it == kernels_.end()) kernels_.emplace(f.order(), f);
    else it->second = it->second + f;
    return *this;
}

const Kernel& ChaosVector::kernel(int q) const
{
    auto it = kernels_.find(q);
    if (it == kernels_.end()) throw std::out_of_range("ChaosVector: no kernel of order " + std::to_string(q));
    return it->second;
}

int ChaosVector::max_order() const
{
    return kernels_.empty() ? 0 : kernels_.rbegin()->first;
}

ChaosVector ChaosVector::scaled(double c) const
{
    ChaosVector out(grid_, k_dim_);
    for (const auto& [q, f] : kernels_) out.add(f.scaled(c));
    return out;
}

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries))
{
    if (entries_.rows() != entries_.cols()) throw std::invalid_argument("CovarianceMatrix: not square");
    const double scale = std::max(1.0, entries_.cwiseAbs().maxCoeff());
    if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument("CovarianceMatrix: not symmetric");
    entries_ = 0.5 * (entries_ + entries_.transpose()).eval();
}

double CovarianceMatrix::min_eigenvalue() const
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(entries_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------

std::map<int, Kernel> product_chaos(const Kernel& f, const Kernel& g)
{
    std::map<int, Kernel> out;
    for (const auto& term : product_expansion(f.order(), g.order())) {
        Kernel h = symmetrize(contract(f, g, term.r, term.l)).scaled(to_double(term.coefficient));
        auto it = out.find(term.result_order);
        if (it == out.end()) out.emplace(term.result_order, std::move(h));
        else it->second = it->second + h;
    }
    return out;
}

CovarianceMatrix covariance_of_order(const ChaosVector& x, int q)
{
    if (!x.has(q)) return CovarianceMatrix(Eigen::MatrixXd::Zero(x.k_dim(), x.k_dim()));
    const Kernel& f = x.kernel(q);
    if (q == 0) return CovarianceMatrix(Eigen::MatrixXd::Zero(x.k_dim(), x.k_dim()));
    return CovarianceMatrix(to_double(factorial(q)) * inner(f, f));
}

CovarianceMatrix covariance(const ChaosVector& x)
{
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(x.k_dim(), x.k_dim());
    for (const auto& [q, f] : x.kernels()) s += covariance_of_order(x, q).matrix();
    return CovarianceMatrix(std::move(s));
}

double second_moment(const ChaosVector& x)
{
    double m = covariance(x).trace();
    if (x.has(0)) m += norm_sq(x.kernel(0));
    return m;
}

ChaosVector norm_sq_chaos(const ChaosVector& x)
{
    const Index k = x.k_dim();
    ChaosVector out(x.grid(), 1);
    for (auto it = x.kernels().begin(); it != x.kernels().end(); ++it) {
        for (auto jt = it; jt != x.kernels().end(); ++jt) {
            const double mult = (it == jt) ? 1.0 : 2.0;
            for (auto& [order, h] : product_chaos(it->second, jt->second)) {
                Eigen::VectorXd diag = Eigen::VectorXd::Zero(h.num_tuples());
                for (Index i = 0; i < k; ++i) diag += h.values().col(i * k + i);
                out.add(Kernel(x.grid(), order, 0, mult * diag, true));
            }
        }
    }
    return out;
}

double fourth_moment_expansion(const ChaosVector& x)
{
    double m4 = 0.0;
    const ChaosVector sq = norm_sq_chaos(x);
    for (const auto& [order, h] : sq.kernels()) m4 += to_double(factorial(order)) * norm_sq(h);
    return m4;
}

namespace {

/// Column-wise weighted inner products <a_c, b_c>.
Eigen::VectorXd columnwise_inner(const Kernel& a, const Kernel& b)
{
    const auto w = a.grid()->tensor_weights(a.order());
    return a.values().cwiseProduct(b.values()).transpose() * w;
}

}  // namespace

Eigen::MatrixXd pair_fourth_moments(const Kernel& fq, const Kernel& fp)
{
    const int q = fq.order();
    const int p = fp.order();
    const int mn = std::min(q, p);
    const Index kq = fq.k_slots();
    const Index kp = fp.k_slots();

    std::map<std::pair<int, int>, Kernel> sym;
    for (int r = 0; r <= mn; ++r)
        for (int l = 0; l <= r; ++l) sym.emplace(std::make_pair(r, l), symmetrize(contract(fq, fp, r, l)));

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(kq * kp);
    for (int r = 0; r <= mn; ++r)
        for (int l = 0; l <= r; ++l)
            for (int s = 0; s <= mn; ++s)
                for (int m = 0; m <= s; ++m) {
                    if (r + l != s + m) continue;
                    const double c = to_double(coeff_c(p, q, l, m, r, s));
                    acc += c * columnwise_inner(sym.at({r, l}), sym.at({s, m}));
                }
    Eigen::MatrixXd out(kq, kp);
    for (Index i = 0; i < kq; ++i)
        for (Index j = 0; j < kp; ++j) out(i, j) = acc[i * kp + j];
    return out;
}

MomentSummary moment_summary(const ChaosVector& x)
{
    if (!x.centered()) throw std::invalid_argument("moment_summary: chaos vector has a constant term");
    MomentSummary ms;
    ms.N = x.max_order();
    ms.S = covariance(x).matrix();
    ms.m2 = ms.S.trace();
    ms.m4 = fourth_moment_expansion(x);
    for (const auto& [q, f] : x.kernels()) {
        ms.S_q[q] = covariance_of_order(x, q).matrix();
        ms.m2_q[q] = ms.S_q[q].trace();
    }
    ms.min_pair_gap = std::numeric_limits<double>::infinity();
    for (const auto& [q, fq] : x.kernels()) {
        for (const auto& [p, fp] : x.kernels()) {
            const Eigen::MatrixXd e4 = pair_fourth_moments(fq, fp);
            ms.mixed[{q, p}] = e4.sum();
            const Eigen::VectorXd dq = ms.S_q[q].diagonal();
            const Eigen::VectorXd dp = ms.S_q[p].diagonal();
            for (Index i = 0; i < e4.rows(); ++i)
                for (Index j = 0; j < e4.cols(); ++j) {
                    const double cross_cov = (q == p) ? ms.S_q[q](i, j) : 0.0;
                    const double g = e4(i, j) - dq[i] * dp[j] - 2.0 * cross_cov * cross_cov;
                    ms.min_pair_gap = std::min(ms.min_pair_gap, g);
                }
        }
    }
    ms.split_gap = 0.0;
    for (const auto& [q, f] : x.kernels()) {
        ms.gap_q[q] = ms.mixed[{q, q}] - ms.m2_q[q] * ms.m2_q[q] - 2.0 * ms.S_q[q].squaredNorm();
        ms.split_gap += ms.gap_q[q];
    }
    for (const auto& [q, fq] : x.kernels())
        for (const auto& [p, fp] : x.kernels()) {
            if (p == q) continue;
            ms.cross[{p, q}] = ms.mixed[{p, q}] - ms.m2_q[p] * ms.m2_q[q];
            ms.split_gap += ms.cross[{p, q}];
        }
    ms.true_gap = ms.m4 - ms.m2 * ms.m2 - 2.0 * ms.S.squaredNorm();
    if (x.kernels().empty()) ms.min_pair_gap = 0.0;
    return ms;
}

std::pair<double, double> contraction00_identity_check(const Kernel& f, const Kernel& g)
{
    if (f.k_slots() != 1 || g.k_slots() != 1) throw std::invalid_argument("contraction00_identity_check: scalar kernels required");
    const int q = f.order();
    const int p = g.order();
    const int mn = std::min(q, p);
    const double qf = to_double(factorial(q));
    const double pf = to_double(factorial(p));

    const double lhs = to_double(factorial(q + p)) * norm_sq(symmetrize(contract(f, g, 0, 0)));

    double rhs = qf * pf * norm_sq(f) * norm_sq(g);
    if (q == p) {
        const double fg = dot(f, g);
        rhs += qf * qf * fg * fg;
    } else {
        rhs += qf * pf * to_double(binomial(q, mn)) * to_double(binomial(p, mn)) * norm_sq(contract(f, g, mn, mn));
    }
    for (int r = 1; r <= mn - 1; ++r)
        rhs += qf * pf * to_double(binomial(q, r)) * to_double(binomial(p, r)) * norm_sq(contract(f, g, r, r));
    return {lhs, rhs};
}

ChaosVector gamma_tilde(const Kernel& f, const Kernel& g)
{
    if (f.k_slots() != 1 || g.k_slots() != 1) throw std::invalid_argument("gamma_tilde: scalar kernels required");
    const int top = f.order() + g.order();
    ChaosVector out(f.grid(), 1);
    for (auto& [order, h] : product_chaos(f, g)) out.add(h.scaled(0.5 * static_cast<double>(top - order)));
    return out;
}

}  // namespace pstein
