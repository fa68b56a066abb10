#include "pstein/bounds.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <tuple>

namespace pstein {

double checked_sqrt(double x, const std::string& what)
{
    if (std::isnan(x) || x < -1e-9) throw NegativeRadicandError("negative radicand in " + what + ": " + std::to_string(x));
    return std::sqrt(std::max(x, 0.0));
}

double hs_diff(const CovarianceMatrix& S, const CovarianceMatrix& Sp)
{
    if (S.dim() != Sp.dim()) throw std::invalid_argument("hs_diff: dimension mismatch");
    return (S.matrix() - Sp.matrix()).norm();
}

double four_moment_constant(int N, double m2)
{
    const double n = N;
    return n * (2 * n - 1) / 4 + std::sqrt(std::ldexp(1.0, 3 * N - 1) * n * (4 * n - 3) * m2);
}

double contraction_constant(int N, double m2)
{
    const double n = N;
    return n * (2 * n - 1) / 4 + std::sqrt(std::ldexp(1.0, 3 * N - 2) * n * (4 * n - 3) * m2);
}

BoundReport four_moment_bound(const ChaosVector& x, const CovarianceMatrix& Sp)
{
    if (x.kernels().empty()) throw std::invalid_argument("four_moment_bound: empty chaos vector");
    const MomentSummary ms = moment_summary(x);
    BoundReport rep;
    rep.N = ms.N;
    rep.m2 = ms.m2;
    rep.covariance_term = 0.5 * hs_diff(CovarianceMatrix(ms.S), Sp);
    rep.split_gap = ms.split_gap;
    rep.exact_gap = ms.true_gap;
    rep.per_pair_terms.push_back({"covariance", -1, -1, -1, -1, -1, -1, 0.5, rep.covariance_term});

    double detailed = 0.0;
    double remainder_sum = 0.0;
    for (const auto& [q, gap] : ms.gap_q) {
        const double coef = (2.0 * q - 1) / (4.0 * q);
        const double v = coef * checked_sqrt(gap, "fourth-moment gap of order " + std::to_string(q));
        rep.per_pair_terms.push_back({"gap", q, q, -1, -1, -1, -1, coef, v});
        detailed += v;
        remainder_sum += std::ldexp(1.0, 3 * q - 1) * (4.0 * q - 3) * gap;
    }
    for (const auto& [pq, cross] : ms.cross) {
        const auto [p, q] = pq;
        const double coef = (p + q - 1.0) / (4.0 * p);
        const double v = coef * checked_sqrt(cross, "cross-order gap");
        rep.per_pair_terms.push_back({"cross", q, p, -1, -1, -1, -1, coef, v});
        detailed += v;
    }
    const double rem = std::sqrt(rep.N * ms.m2) * checked_sqrt(remainder_sum, "remainder sum");
    rep.per_pair_terms.push_back({"remainder", -1, -1, -1, -1, -1, -1, std::sqrt(rep.N * ms.m2), rem});
    detailed += rem;
    rep.moment_term_detailed = detailed;

    const double c = four_moment_constant(rep.N, ms.m2);
    rep.moment_term_compact = c * checked_sqrt(ms.split_gap, "split fourth-moment gap");
    rep.moment_term_compact_exact_gap = c * checked_sqrt(ms.true_gap, "fourth-moment gap");
    rep.per_pair_terms.push_back({"compact", -1, -1, -1, -1, -1, -1, c, rep.moment_term_compact});
    return rep;
}

BoundReport contraction_bound_from_norms(const std::vector<int>& orders, double m2, double covariance_term,
                                         const ContractionNormSq& norm_sq_of)
{
    if (orders.empty()) throw std::invalid_argument("contraction_bound: no chaos orders");
    BoundReport rep;
    rep.m2 = m2;
    rep.covariance_term = covariance_term;
    for (int q : orders) {
        if (q < 1) throw std::invalid_argument("contraction_bound: orders must be positive");
        rep.N = std::max(rep.N, q);
    }
    rep.per_pair_terms.push_back({"covariance", -1, -1, -1, -1, -1, -1, 0.5, covariance_term});

    double beta = 0.0;
    for (int q : orders) {
        for (int p : orders) {
            const int mn = std::min(q, p);
            if (q != p) {
                const double coef = to_double(coeff_a(p, q, mn));
                const double v = coef * norm_sq_of(q, p, mn, mn);
                rep.per_pair_terms.push_back({"a", q, p, mn, -1, mn, -1, coef, v});
                beta += v;
            }
            for (int r = 1; r <= mn - 1; ++r) {
                const double coef = to_double(coeff_b(p, q, r));
                const double v = coef * norm_sq_of(q, p, r, r);
                rep.per_pair_terms.push_back({"b", q, p, r, -1, r, -1, coef, v});
                beta += v;
            }
            for (const auto& t : index_set_I(q, p)) {
                const double coef = to_double(coeff_c(p, q, t.l, t.m, t.r, t.s));
                const double v = coef * std::sqrt(norm_sq_of(q, p, t.r, t.l)) * std::sqrt(norm_sq_of(q, p, t.s, t.m));
                rep.per_pair_terms.push_back({"c", q, p, t.r, t.s, t.l, t.m, coef, v});
                beta += v;
            }
        }
    }
    rep.beta = beta;
    const double c = contraction_constant(rep.N, m2);
    rep.contraction_term = c * checked_sqrt(beta, "beta");
    rep.per_pair_terms.push_back({"beta", -1, -1, -1, -1, -1, -1, 1.0, beta});
    rep.per_pair_terms.push_back({"contraction", -1, -1, -1, -1, -1, -1, c, rep.contraction_term});
    return rep;
}

ContractionNormSq dense_contraction_norms(const ChaosVector& x)
{
    auto cache = std::make_shared<std::map<std::tuple<int, int, int, int>, double>>();
    return [x, cache](int q, int p, int r, int l) {
        // ||f_q * f_p|| = ||f_p * f_q||: the two differ by a slot permutation and a k transposition.
        const auto key = std::make_tuple(std::min(q, p), std::max(q, p), r, l);
        auto it = cache->find(key);
        if (it != cache->end()) return it->second;
        double v = 0.0;
        if (x.has(q) && x.has(p)) v = norm_sq(contract(x.kernel(std::get<0>(key)), x.kernel(std::get<1>(key)), r, l));
        cache->emplace(key, v);
        return v;
    };
}

BoundReport contraction_bound(const ChaosVector& x, const CovarianceMatrix& Sp)
{
    std::vector<int> orders;
    for (const auto& [q, f] : x.kernels()) {
        if (q == 0) throw std::invalid_argument("contraction_bound: chaos vector must be centered");
        orders.push_back(q);
    }
    const CovarianceMatrix S = covariance(x);
    BoundReport rep = contraction_bound_from_norms(orders, S.trace(), 0.5 * hs_diff(S, Sp), dense_contraction_norms(x));
    const MomentSummary ms = moment_summary(x);
    rep.split_gap = ms.split_gap;
    rep.exact_gap = ms.true_gap;
    return rep;
}

}  // namespace pstein
