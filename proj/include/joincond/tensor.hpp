#pragma once

// Dense tensors, rank-one terms and the multilinear kernels shared by the
// Segre and Veronese code.
//
// Vectorization: element (i_1, ..., i_d) of an m_1 x ... x m_d tensor lives at
// ((i_1 * m_2 + i_2) * m_3 + ...) * m_d + i_d, last index fastest. Under this
// convention vec(a^1 (x) ... (x) a^d) == kron(a^1, ..., a^d).

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "joincond/errors.hpp"

namespace joincond {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance on the Euclidean norm of stored unit vectors.
inline constexpr double kUnitTolerance = 1e-12;

class Shape {
public:
    Shape() = default;

    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
        if (dims_.empty())
            throw UsageError("shape must have at least one mode");
        for (std::size_t m : dims_)
            if (m == 0)
                throw UsageError("shape dimensions must be positive");
    }

    std::size_t order() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t k) const { return dims_.at(k); }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    /// N = m_1 * ... * m_d.
    std::size_t size() const noexcept {
        return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>{});
    }

    std::size_t linear_index(std::span<const std::size_t> index) const {
        if (index.size() != dims_.size())
            throw UsageError("multi-index has wrong order");
        std::size_t lin = 0;
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            if (index[k] >= dims_[k])
                throw UsageError("multi-index out of range");
            lin = lin * dims_[k] + index[k];
        }
        return lin;
    }

    std::vector<std::size_t> multi_index(std::size_t linear) const {
        if (linear >= size())
            throw UsageError("linear index out of range");
        std::vector<std::size_t> idx(dims_.size());
        for (std::size_t k = dims_.size(); k-- > 0;) {
            idx[k] = linear % dims_[k];
            linear /= dims_[k];
        }
        return idx;
    }

    friend bool operator==(const Shape&, const Shape&) = default;

private:
    std::vector<std::size_t> dims_;
};

class DenseTensor {
public:
    explicit DenseTensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_.size())) {}

    DenseTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::size_t>(data_.size()) != shape_.size())
            throw UsageError("tensor data length does not match its shape");
    }

    const Shape& shape() const noexcept { return shape_; }
    const Vector& data() const noexcept { return data_; }
    Vector& data() noexcept { return data_; }

    double operator()(std::span<const std::size_t> index) const { return data_[shape_.linear_index(index)]; }
    double& operator()(std::span<const std::size_t> index) { return data_[shape_.linear_index(index)]; }

private:
    Shape shape_;
    Vector data_;
};

/// mu * a^1 (x) ... (x) a^d with mu > 0 and unit a^k.
class RankOneTerm {
public:
    RankOneTerm(double mu, std::vector<Vector> vectors) : mu_(mu), vectors_(std::move(vectors)) {
        if (!(mu_ > 0.0) || !std::isfinite(mu_))
            throw UsageError("rank-one term scale must be positive and finite");
        if (vectors_.empty())
            throw UsageError("rank-one term needs at least one factor");
        for (const auto& v : vectors_) {
            if (v.size() == 0)
                throw UsageError("rank-one term factor is empty");
            if (std::abs(v.norm() - 1.0) > kUnitTolerance)
                throw UsageError("rank-one term factors must have unit norm");
        }
    }

    double mu() const noexcept { return mu_; }
    std::size_t order() const noexcept { return vectors_.size(); }
    const std::vector<Vector>& vectors() const noexcept { return vectors_; }
    const Vector& vector(std::size_t k) const { return vectors_.at(k); }

    Shape shape() const {
        std::vector<std::size_t> dims;
        dims.reserve(vectors_.size());
        for (const auto& v : vectors_)
            dims.push_back(static_cast<std::size_t>(v.size()));
        return Shape(std::move(dims));
    }

private:
    double mu_;
    std::vector<Vector> vectors_;
};

class CPDecomposition {
public:
    CPDecomposition(Shape shape, std::vector<RankOneTerm> terms)
        : shape_(std::move(shape)), terms_(std::move(terms)) {
        if (terms_.empty())
            throw UsageError("decomposition needs at least one term");
        for (const auto& t : terms_)
            if (!(t.shape() == shape_))
                throw UsageError("rank-one term shape does not match the decomposition");
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return terms_.size(); }
    std::size_t order() const noexcept { return shape_.order(); }
    const std::vector<RankOneTerm>& terms() const noexcept { return terms_; }
    const RankOneTerm& term(std::size_t i) const { return terms_.at(i); }

private:
    Shape shape_;
    std::vector<RankOneTerm> terms_;
};

// --- Kronecker products -----------------------------------------------------

inline Vector kron(std::span<const Vector> vectors) {
    if (vectors.empty())
        throw UsageError("kron of an empty list");
    Vector out = vectors[0];
    for (std::size_t k = 1; k < vectors.size(); ++k) {
        const Vector& v = vectors[k];
        Vector next(out.size() * v.size());
        for (Eigen::Index i = 0; i < out.size(); ++i)
            next.segment(i * v.size(), v.size()) = out[i] * v;
        out = std::move(next);
    }
    return out;
}

inline Vector kron(std::initializer_list<Vector> vectors) {
    return kron(std::span<const Vector>(vectors.begin(), vectors.size()));
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Kronecker product of a list of matrices (vectors enter as one-column matrices).
inline Matrix kron_matrices(std::span<const Matrix> factors) {
    if (factors.empty())
        throw UsageError("kron of an empty list");
    Matrix out = factors[0];
    for (std::size_t k = 1; k < factors.size(); ++k)
        out = kron(out, factors[k]);
    return out;
}

// --- Decompositions ---------------------------------------------------------

inline Vector rank_one_vector(const RankOneTerm& term) {
    return term.mu() * kron(std::span<const Vector>(term.vectors()));
}

inline DenseTensor assemble_cpd(const CPDecomposition& decomp) {
    DenseTensor out(decomp.shape());
    for (const auto& t : decomp.terms())
        out.data() += rank_one_vector(t);
    return out;
}

/// Factor matrices A_k (m_k x r) to normalized (mu, unit vectors) form.
inline CPDecomposition normalize_decomposition(std::span<const Matrix> factors) {
    if (factors.empty())
        throw UsageError("no factor matrices");
    const Eigen::Index r = factors[0].cols();
    if (r == 0)
        throw UsageError("factor matrices have no columns");
    std::vector<std::size_t> dims;
    for (const auto& a : factors) {
        if (a.cols() != r)
            throw UsageError("factor matrices disagree on the rank");
        if (a.rows() == 0)
            throw UsageError("factor matrix has no rows");
        if (!a.allFinite())
            throw UsageError("factor matrix has non-finite entries");
        dims.push_back(static_cast<std::size_t>(a.rows()));
    }

    std::vector<RankOneTerm> terms;
    terms.reserve(static_cast<std::size_t>(r));
    for (Eigen::Index i = 0; i < r; ++i) {
        double mu = 1.0;
        std::vector<Vector> vectors;
        for (const auto& a : factors) {
            const double nrm = a.col(i).norm();
            if (!(nrm > 0.0))
                throw DegenerateError("degenerate rank-one term");
            mu *= nrm;
            vectors.emplace_back(a.col(i) / nrm);
        }
        terms.emplace_back(mu, std::move(vectors));
    }
    return CPDecomposition(Shape(std::move(dims)), std::move(terms));
}

inline CPDecomposition normalize_decomposition(std::initializer_list<Matrix> factors) {
    return normalize_decomposition(std::span<const Matrix>(factors.begin(), factors.size()));
}

/// Factor matrices with each term's scale spread evenly, mu^{1/d} per mode.
inline std::vector<Matrix> balanced_factors(const CPDecomposition& decomp) {
    const std::size_t d = decomp.order();
    std::vector<Matrix> factors;
    for (std::size_t k = 0; k < d; ++k)
        factors.emplace_back(static_cast<Eigen::Index>(decomp.shape().dim(k)),
                             static_cast<Eigen::Index>(decomp.rank()));
    for (std::size_t i = 0; i < decomp.rank(); ++i) {
        const auto& t = decomp.term(i);
        const double scale = std::pow(t.mu(), 1.0 / static_cast<double>(d));
        for (std::size_t k = 0; k < d; ++k)
            factors[k].col(static_cast<Eigen::Index>(i)) = scale * t.vector(k);
    }
    return factors;
}

// --- Orthonormal completion -------------------------------------------------

/// Orthonormal basis (m x (m-1)) of the complement of the unit vector v.
///
/// Uses the Householder reflector H that maps v to -sign(v_0) e_1; H is an
/// involution, so its first column is +-v and the trailing columns span v's
/// complement. The same v always yields the same Q.
inline Matrix orthonormal_complement(const Vector& v) {
    const Eigen::Index m = v.size();
    if (m == 0)
        throw UsageError("orthonormal complement of an empty vector");
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-10)
        throw UsageError("orthonormal complement requires a unit vector");
    if (m == 1)
        return Matrix(1, 0);

    Vector w = v;
    const double sign = v[0] >= 0.0 ? 1.0 : -1.0;
    w[0] += sign * v.norm();
    const double ww = w.squaredNorm();

    Matrix h = Matrix::Identity(m, m) - (2.0 / ww) * (w * w.transpose());
    return h.rightCols(m - 1);
}

// --- Norms ------------------------------------------------------------------

inline double frobenius_norm(const DenseTensor& t) { return t.data().norm(); }

inline double frobenius_inner(const DenseTensor& a, const DenseTensor& b) {
    if (!(a.shape() == b.shape()))
        throw UsageError("inner product of tensors with different shapes");
    return a.data().dot(b.data());
}

} // namespace joincond
