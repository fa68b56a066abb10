// Discretized measure spaces and order-q kernel tensors.
//
// A kernel of order q over a grid with n atoms is stored as a dense
// (n^q x k) matrix: rows are atom tuples in lexicographic order (last slot
// fastest), columns are the k-slices of a K-valued kernel (one column for a
// scalar kernel). Contractions of two K-valued kernels carry both k-indices
// flattened as i * k_g + j.

#ifndef PSTEIN_MEASURE_KERNELS_HPP
#define PSTEIN_MEASURE_KERNELS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace pstein {

using Index = Eigen::Index;

/// Largest tensor order the index helpers support (two order-4 kernels
/// contracted with r = l = 0).
inline constexpr int kMaxOrder = 8;

using Tuple = std::array<Index, kMaxOrder>;

inline Index int_pow(Index base, int exponent)
{
    Index result = 1;
    for (int i = 0; i < exponent; ++i) result *= base;
    return result;
}

/// Lexicographic flat index of an atom tuple, last slot fastest.
inline Index flat_index(std::span<const Index> tuple, Index n)
{
    Index idx = 0;
    for (Index a : tuple) idx = idx * n + a;
    return idx;
}

inline Tuple unflatten(Index flat, int order, Index n)
{
    Tuple t{};
    for (int s = order - 1; s >= 0; --s) {
        t[s] = flat % n;
        flat /= n;
    }
    return t;
}

/// True when at least two slots of the tuple hold the same atom.
inline bool on_diagonal(const Tuple& t, int order)
{
    for (int i = 0; i < order; ++i)
        for (int j = i + 1; j < order; ++j)
            if (t[i] == t[j]) return true;
    return false;
}

template <typename Scalar>
class BasicMeasureGrid
{
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Coords = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    BasicMeasureGrid(std::vector<std::string> labels, Vector weights, Coords coords = Coords())
        : labels_(std::move(labels)), weights_(std::move(weights)), coords_(std::move(coords))
    {
        if (labels_.empty()) throw std::invalid_argument("MeasureGrid: atom list is empty");
        if (static_cast<Index>(labels_.size()) != weights_.size())
            throw std::invalid_argument("MeasureGrid: labels and weights differ in length");
        std::unordered_set<std::string> seen;
        for (const auto& l : labels_)
            if (!seen.insert(l).second) throw std::invalid_argument("MeasureGrid: duplicate atom label '" + l + "'");
        for (Index i = 0; i < weights_.size(); ++i)
            if (!(weights_[i] > Scalar(0)) || !std::isfinite(static_cast<double>(weights_[i])))
                throw std::invalid_argument("MeasureGrid: weights must be positive and finite");
        if (coords_.size() != 0 && coords_.rows() != weights_.size())
            throw std::invalid_argument("MeasureGrid: one coordinate row per atom required");
    }

    /// Grid of n atoms labelled "0".."n-1", each of mass `mass`.
    static BasicMeasureGrid uniform(Index n, Scalar mass)
    {
        return from_weights(Vector::Constant(n, mass));
    }

    static BasicMeasureGrid from_weights(Vector weights, Coords coords = Coords())
    {
        std::vector<std::string> labels;
        labels.reserve(static_cast<std::size_t>(weights.size()));
        for (Index i = 0; i < weights.size(); ++i) labels.push_back(std::to_string(i));
        return BasicMeasureGrid(std::move(labels), std::move(weights), std::move(coords));
    }

    Index size() const { return weights_.size(); }
    const Vector& weights() const { return weights_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const Coords& coords() const { return coords_; }
    Scalar total_mass() const { return weights_.sum(); }

    /// Product measure of every tuple of `order` atoms, lexicographic.
    Vector tensor_weights(int order) const
    {
        Vector w = Vector::Ones(1);
        for (int s = 0; s < order; ++s) {
            Vector next(w.size() * size());
            for (Index i = 0; i < w.size(); ++i) next.segment(i * size(), size()) = w[i] * weights_;
            w = std::move(next);
        }
        return w;
    }

    friend bool operator==(const BasicMeasureGrid& a, const BasicMeasureGrid& b)
    {
        return a.labels_ == b.labels_ && a.weights_ == b.weights_;
    }

private:
    std::vector<std::string> labels_;
    Vector weights_;
    Coords coords_;
};

using MeasureGrid = BasicMeasureGrid<double>;

template <typename Scalar>
using BasicGridPtr = std::shared_ptr<const BasicMeasureGrid<Scalar>>;
using GridPtr = BasicGridPtr<double>;

template <typename Scalar>
BasicGridPtr<Scalar> make_grid(BasicMeasureGrid<Scalar> grid)
{
    return std::make_shared<const BasicMeasureGrid<Scalar>>(std::move(grid));
}

template <typename Scalar>
bool same_grid(const BasicGridPtr<Scalar>& a, const BasicGridPtr<Scalar>& b)
{
    return a == b || (a && b && *a == *b);
}

template <typename Scalar>
class BasicKernel
{
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    /// Zero kernel.
    BasicKernel(BasicGridPtr<Scalar> grid, int order, int k_dim = 0)
        : BasicKernel(grid, order, k_dim, Matrix::Zero(tuples_for(grid, order), std::max(k_dim, 1)), true)
    {
    }

    BasicKernel(BasicGridPtr<Scalar> grid, int order, int k_dim, Matrix values, bool symmetric = false)
        : grid_(std::move(grid)), order_(order), k_dim_(k_dim), values_(std::move(values)), symmetric_(symmetric || order <= 1)
    {
        if (!grid_) throw std::invalid_argument("Kernel: null grid");
        if (order_ < 0 || order_ > kMaxOrder) throw std::invalid_argument("Kernel: order out of range");
        if (k_dim_ < 0) throw std::invalid_argument("Kernel: negative k_dim");
        if (values_.rows() != tuples_for(grid_, order_) || values_.cols() != std::max(k_dim_, 1))
            throw std::invalid_argument("Kernel: value matrix has wrong shape");
        if (!values_.allFinite()) throw std::invalid_argument("Kernel: non-finite values");
    }

    static Index tuples_for(const BasicGridPtr<Scalar>& grid, int order)
    {
        if (!grid) throw std::invalid_argument("Kernel: null grid");
        return int_pow(grid->size(), order);
    }

    const BasicGridPtr<Scalar>& grid() const { return grid_; }
    int order() const { return order_; }
    int k_dim() const { return k_dim_; }
    Index k_slots() const { return values_.cols(); }
    Index num_tuples() const { return values_.rows(); }
    Index num_atoms() const { return grid_->size(); }
    const Matrix& values() const { return values_; }
    bool symmetric() const { return symmetric_; }

    Scalar operator()(std::span<const Index> tuple, Index k = 0) const
    {
        return values_(flat_index(tuple, num_atoms()), k);
    }

    /// Scalar kernel holding one k-slice of this one.
    BasicKernel slice(Index k) const
    {
        return BasicKernel(grid_, order_, 0, values_.col(k), symmetric_);
    }

    BasicKernel scaled(Scalar c) const { return BasicKernel(grid_, order_, k_dim_, c * values_, symmetric_); }

private:
    BasicGridPtr<Scalar> grid_;
    int order_;
    int k_dim_;
    Matrix values_;
    bool symmetric_;
};

using Kernel = BasicKernel<double>;

// ---------------------------------------------------------------------------
// Slot permutations and symmetrization

/// g(t_0, ..., t_{q-1}) = f(t_{perm[0]}, ..., t_{perm[q-1]}).
template <typename Scalar>
BasicKernel<Scalar> permute_slots(const BasicKernel<Scalar>& f, std::span<const int> perm)
{
    const int q = f.order();
    if (static_cast<int>(perm.size()) != q) throw std::invalid_argument("permute_slots: permutation length differs from order");
    const Index n = f.num_atoms();
    typename BasicKernel<Scalar>::Matrix out(f.num_tuples(), f.k_slots());
    std::array<Index, kMaxOrder> src{};
    for (Index row = 0; row < f.num_tuples(); ++row) {
        const Tuple t = unflatten(row, q, n);
        for (int s = 0; s < q; ++s) src[s] = t[perm[s]];
        out.row(row) = f.values().row(flat_index(std::span<const Index>(src.data(), q), n));
    }
    return BasicKernel<Scalar>(f.grid(), q, f.k_dim(), std::move(out));
}

/// Average over all q! slot permutations, slice by slice.
template <typename Scalar>
BasicKernel<Scalar> symmetrize(const BasicKernel<Scalar>& f)
{
    const int q = f.order();
    if (q <= 1) return f;
    std::vector<int> perm(q);
    std::iota(perm.begin(), perm.end(), 0);
    const Index n = f.num_atoms();
    typename BasicKernel<Scalar>::Matrix acc = BasicKernel<Scalar>::Matrix::Zero(f.num_tuples(), f.k_slots());
    std::vector<Index> src_rows(static_cast<std::size_t>(f.num_tuples()));
    std::array<Index, kMaxOrder> src{};
    Index count = 0;
    do {
        for (Index row = 0; row < f.num_tuples(); ++row) {
            const Tuple t = unflatten(row, q, n);
            for (int s = 0; s < q; ++s) src[s] = t[perm[s]];
            src_rows[static_cast<std::size_t>(row)] = flat_index(std::span<const Index>(src.data(), q), n);
        }
        acc += f.values()(src_rows, Eigen::all);
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    acc /= static_cast<Scalar>(count);
    return BasicKernel<Scalar>(f.grid(), q, f.k_dim(), std::move(acc), true);
}

/// Largest deviation |f - f o pi| over all slot permutations.
template <typename Scalar>
Scalar symmetry_defect(const BasicKernel<Scalar>& f)
{
    return (symmetrize(f).values() - f.values()).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Diagonals

template <typename Scalar>
Scalar max_diagonal_abs(const BasicKernel<Scalar>& f)
{
    Scalar m(0);
    if (f.order() < 2) return m;
    for (Index row = 0; row < f.num_tuples(); ++row)
        if (on_diagonal(unflatten(row, f.order(), f.num_atoms()), f.order()))
            m = std::max(m, f.values().row(row).cwiseAbs().maxCoeff());
    return m;
}

template <typename Scalar>
BasicKernel<Scalar> zero_diagonals(const BasicKernel<Scalar>& f)
{
    auto v = f.values();
    if (f.order() >= 2)
        for (Index row = 0; row < f.num_tuples(); ++row)
            if (on_diagonal(unflatten(row, f.order(), f.num_atoms()), f.order())) v.row(row).setZero();
    return BasicKernel<Scalar>(f.grid(), f.order(), f.k_dim(), std::move(v), f.symmetric());
}

// ---------------------------------------------------------------------------
// Contractions and inner products

/// f *_r^l g: identify the first r slots of f and g, integrate the first l
/// of those against the grid weights. Output slots are ordered as
/// (r - l shared, q - r from f, p - r from g). The result is not symmetrized.
template <typename Scalar>
BasicKernel<Scalar> contract(const BasicKernel<Scalar>& f, const BasicKernel<Scalar>& g, int r, int l)
{
    const int q = f.order();
    const int p = g.order();
    if (l < 0 || l > r || r > std::min(q, p)) throw std::invalid_argument("contract: need 0 <= l <= r <= min(q, p)");
    if (!same_grid(f.grid(), g.grid())) throw std::invalid_argument("contract: kernels live on different grids");
    const int out_order = q + p - r - l;
    if (out_order > kMaxOrder) throw std::invalid_argument("contract: result order too large");

    using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using ConstStrided = Eigen::Map<const RowMajor, 0, Eigen::OuterStride<>>;
    using Strided = Eigen::Map<RowMajor, 0, Eigen::OuterStride<>>;

    const Index n = f.num_atoms();
    const Index L = int_pow(n, l);
    const Index Y = int_pow(n, r - l);
    const Index A = int_pow(n, q - r);
    const Index Z = int_pow(n, p - r);
    const auto wl = f.grid()->tensor_weights(l);

    int k_dim = 0;
    if (f.k_dim() > 0 && g.k_dim() > 0) k_dim = f.k_dim() * g.k_dim();
    else k_dim = std::max(f.k_dim(), g.k_dim());

    typename BasicKernel<Scalar>::Matrix out(Y * A * Z, f.k_slots() * g.k_slots());
    for (Index cf = 0; cf < f.k_slots(); ++cf) {
        for (Index cg = 0; cg < g.k_slots(); ++cg) {
            const Scalar* fv = f.values().col(cf).data();
            const Scalar* gv = g.values().col(cg).data();
            Scalar* ov = out.col(cf * g.k_slots() + cg).data();
            for (Index y = 0; y < Y; ++y) {
                ConstStrided fm(fv + y * A, L, A, Eigen::OuterStride<>(Y * A));
                ConstStrided gm(gv + y * Z, L, Z, Eigen::OuterStride<>(Y * Z));
                Strided om(ov + y * A * Z, A, Z, Eigen::OuterStride<>(Z));
                om.noalias() = fm.transpose() * wl.asDiagonal() * gm;
            }
        }
    }
    return BasicKernel<Scalar>(f.grid(), out_order, k_dim, std::move(out), out_order <= 1);
}

/// Gram matrix of k-slices: entry (i, j) = <f_i, g_j> in L^2(mu^q).
template <typename Scalar>
typename BasicKernel<Scalar>::Matrix inner(const BasicKernel<Scalar>& f, const BasicKernel<Scalar>& g)
{
    if (f.order() != g.order()) throw std::invalid_argument("inner: kernels of different order");
    if (!same_grid(f.grid(), g.grid())) throw std::invalid_argument("inner: kernels live on different grids");
    const auto w = f.grid()->tensor_weights(f.order());
    return f.values().transpose() * w.asDiagonal() * g.values();
}

/// Slice-wise pairing sum_k <f_k, g_k>; the L^2(mu^q) (x) K inner product.
template <typename Scalar>
Scalar dot(const BasicKernel<Scalar>& f, const BasicKernel<Scalar>& g)
{
    if (f.order() != g.order() || f.k_slots() != g.k_slots()) throw std::invalid_argument("dot: shape mismatch");
    if (!same_grid(f.grid(), g.grid())) throw std::invalid_argument("dot: kernels live on different grids");
    const auto w = f.grid()->tensor_weights(f.order());
    return (f.values().cwiseProduct(g.values()).transpose() * w).sum();
}

template <typename Scalar>
Scalar norm_sq(const BasicKernel<Scalar>& f)
{
    const auto w = f.grid()->tensor_weights(f.order());
    return (f.values().cwiseAbs2().transpose() * w).sum();
}

/// Swap the k-indices of a K (x) K valued contraction: column i*kg + j -> j*kf + i.
template <typename Scalar>
BasicKernel<Scalar> transpose_k(const BasicKernel<Scalar>& h, Index kf, Index kg)
{
    if (kf * kg != h.k_slots()) throw std::invalid_argument("transpose_k: slot count mismatch");
    typename BasicKernel<Scalar>::Matrix out(h.num_tuples(), h.k_slots());
    for (Index i = 0; i < kf; ++i)
        for (Index j = 0; j < kg; ++j) out.col(j * kf + i) = h.values().col(i * kg + j);
    return BasicKernel<Scalar>(h.grid(), h.order(), h.k_dim(), std::move(out), h.symmetric());
}

template <typename Scalar>
BasicKernel<Scalar> operator+(const BasicKernel<Scalar>& a, const BasicKernel<Scalar>& b)
{
    if (a.order() != b.order() || a.k_slots() != b.k_slots() || !same_grid(a.grid(), b.grid()))
        throw std::invalid_argument("Kernel addition: shape mismatch");
    return BasicKernel<Scalar>(a.grid(), a.order(), a.k_dim(), a.values() + b.values(), a.symmetric() && b.symmetric());
}

}  // namespace pstein

#endif  // PSTEIN_MEASURE_KERNELS_HPP
