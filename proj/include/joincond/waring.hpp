#pragma once

// Waring decompositions A = sum_i mu_i a_i^{(x)d} of symmetric tensors and
// their condition number. The Veronese tangent space at mu a^{(x)d} is spanned
// by a^{(x)d} and the symmetrized products Q (x) a^{(x)d-1} + ... + a^{(x)d-1} (x) Q.
// Each symmetrized column is a sum of d mutually orthogonal unit vectors, so it
// is scaled by 1/sqrt(d) to make the basis orthonormal.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "joincond/condition.hpp"
#include "joincond/errors.hpp"
#include "joincond/tensor.hpp"

namespace joincond {

class SymmetricRankOneTerm {
public:
    SymmetricRankOneTerm(double mu, Vector vector) : mu_(mu), vector_(std::move(vector)) {
        if (mu_ == 0.0 || !std::isfinite(mu_))
            throw UsageError("symmetric term scale must be nonzero and finite");
        if (vector_.size() == 0 || std::abs(vector_.norm() - 1.0) > kUnitTolerance)
            throw UsageError("symmetric term vector must have unit norm");
    }

    double mu() const noexcept { return mu_; }
    const Vector& vector() const noexcept { return vector_; }

private:
    double mu_;
    Vector vector_;
};

class WaringDecomposition {
public:
    WaringDecomposition(std::size_t m, std::size_t d, std::vector<SymmetricRankOneTerm> terms)
        : m_(m), d_(d), terms_(std::move(terms)) {
        if (m_ == 0 || d_ == 0)
            throw UsageError("Waring decomposition needs positive dimension and order");
        if (terms_.empty())
            throw UsageError("Waring decomposition needs at least one term");
        for (const auto& t : terms_)
            if (static_cast<std::size_t>(t.vector().size()) != m_)
                throw UsageError("symmetric term vector has the wrong length");
    }

    std::size_t dim() const noexcept { return m_; }
    std::size_t order() const noexcept { return d_; }
    std::size_t rank() const noexcept { return terms_.size(); }
    const std::vector<SymmetricRankOneTerm>& terms() const noexcept { return terms_; }
    const SymmetricRankOneTerm& term(std::size_t i) const { return terms_.at(i); }

    Shape shape() const { return Shape(std::vector<std::size_t>(d_, m_)); }

private:
    std::size_t m_;
    std::size_t d_;
    std::vector<SymmetricRankOneTerm> terms_;
};

namespace detail {

inline Matrix kron_power_with_slot(const Vector& a, std::size_t d, std::size_t slot, const Matrix& middle) {
    std::vector<Matrix> factors;
    factors.reserve(d);
    for (std::size_t j = 0; j < d; ++j)
        factors.push_back(j == slot ? middle : Matrix(a));
    return kron_matrices(factors);
}

} // namespace detail

inline DenseTensor assemble_waring(const WaringDecomposition& decomp) {
    DenseTensor out(decomp.shape());
    for (const auto& t : decomp.terms()) {
        const std::vector<Vector> copies(decomp.order(), t.vector());
        out.data() += t.mu() * kron(std::span<const Vector>(copies));
    }
    return out;
}

/// N x m orthonormal basis of the Veronese tangent space at the term.
inline Matrix veronese_tangent_basis(const SymmetricRankOneTerm& term, std::size_t d) {
    if (d == 0)
        throw UsageError("tensor order must be positive");
    const Vector& a = term.vector();
    const Eigen::Index m = a.size();
    const Matrix q = orthonormal_complement(a);

    Eigen::Index rows = 1;
    for (std::size_t j = 0; j < d; ++j)
        rows *= m;
    Matrix sym = Matrix::Zero(rows, m - 1);
    for (std::size_t slot = 0; slot < d && q.cols() > 0; ++slot)
        sym += detail::kron_power_with_slot(a, d, slot, q);

    Matrix v(sym.rows(), m);
    v.col(0) = detail::kron_power_with_slot(a, d, 0, Matrix(a));
    v.rightCols(m - 1) = sym / std::sqrt(static_cast<double>(d));
    return v;
}

inline TangentBasisTuple waring_tangent_tuple(const WaringDecomposition& decomp) {
    std::vector<Matrix> blocks;
    blocks.reserve(decomp.rank());
    for (const auto& t : decomp.terms())
        blocks.push_back(veronese_tangent_basis(t, decomp.order()));
    return TangentBasisTuple(decomp.shape().size(), std::move(blocks));
}

inline ConditionReport waring_condition_number(const WaringDecomposition& decomp) {
    return condition_number(waring_tangent_tuple(decomp));
}

/// Pairwise orthogonal vectors and r <= m.
inline bool is_symmetric_odeco(const WaringDecomposition& decomp, double tol = 1e-12) {
    if (decomp.rank() > decomp.dim())
        return false;
    for (std::size_t i = 0; i < decomp.rank(); ++i)
        for (std::size_t j = i + 1; j < decomp.rank(); ++j)
            if (std::abs(decomp.term(i).vector().dot(decomp.term(j).vector())) > tol)
                return false;
    return true;
}

} // namespace joincond
