#pragma once

// Condition numbers of canonical polyadic decompositions.
//
// The tangent space to the Segre manifold at mu a^1 (x) ... (x) a^d has the
// orthonormal basis
//
//   [ a^1 (x) ... (x) a^d | Q^1 (x) a^2 (x) ... (x) a^d | ... | a^1 (x) ... (x) Q^d ]
//
// where Q^k spans the complement of a^k; it has 1 - d + sum_k m_k columns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "joincond/condition.hpp"
#include "joincond/linalg.hpp"
#include "joincond/tensor.hpp"

namespace joincond {

inline constexpr double kWeakOrthogonalityTolerance = 1e-12;

/// dim of the Segre manifold of m_1 x ... x m_d tensors.
inline std::size_t segre_dimension(const Shape& shape) {
    std::size_t sum = 0;
    for (std::size_t m : shape.dims())
        sum += m;
    return sum + 1 - shape.order();
}

namespace detail {

// kron(a^1, ..., a^{k-1}, middle, a^{k+1}, ..., a^d) with vectors as columns.
inline Matrix kron_with_mode(const RankOneTerm& term, std::size_t k, const Matrix& middle) {
    std::vector<Matrix> factors;
    factors.reserve(term.order());
    for (std::size_t j = 0; j < term.order(); ++j)
        factors.push_back(j == k ? middle : Matrix(term.vector(j)));
    return kron_matrices(factors);
}

} // namespace detail

inline Matrix segre_tangent_basis(const RankOneTerm& term) {
    const Shape shape = term.shape();
    const auto n = static_cast<Eigen::Index>(segre_dimension(shape));
    Matrix u(static_cast<Eigen::Index>(shape.size()), n);

    u.col(0) = kron(std::span<const Vector>(term.vectors()));
    Eigen::Index at = 1;
    for (std::size_t k = 0; k < term.order(); ++k) {
        const Matrix q = orthonormal_complement(term.vector(k));
        if (q.cols() == 0)
            continue;
        u.middleCols(at, q.cols()) = detail::kron_with_mode(term, k, q);
        at += q.cols();
    }
    return u;
}

inline TangentBasisTuple cpd_tangent_tuple(const CPDecomposition& decomp) {
    std::vector<Matrix> blocks;
    blocks.reserve(decomp.rank());
    for (const auto& t : decomp.terms())
        blocks.push_back(segre_tangent_basis(t));
    return TangentBasisTuple(decomp.shape().size(), std::move(blocks));
}

inline ConditionReport cpd_condition_number(const CPDecomposition& decomp) {
    return condition_number(cpd_tangent_tuple(decomp));
}

// --- Norm-balanced condition number ------------------------------------------

/// mu^{1-1/d} [ I (x) a^2 (x) ... (x) a^d | ... | a^1 (x) ... (x) a^{d-1} (x) I ].
inline Matrix norm_balanced_block(const RankOneTerm& term) {
    const Shape shape = term.shape();
    const double d = static_cast<double>(term.order());
    Eigen::Index cols = 0;
    for (std::size_t m : shape.dims())
        cols += static_cast<Eigen::Index>(m);

    Matrix out(static_cast<Eigen::Index>(shape.size()), cols);
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < term.order(); ++k) {
        const auto m = static_cast<Eigen::Index>(shape.dim(k));
        out.middleCols(at, m) = detail::kron_with_mode(term, k, Matrix::Identity(m, m));
        at += m;
    }
    return std::pow(term.mu(), 1.0 - 1.0 / d) * out;
}

/// kappa-tilde = 1 / sigma_n([U~_1 ... U~_r]), n = r * dim(Segre).
inline double norm_balanced_condition_number(const CPDecomposition& decomp) {
    std::vector<Matrix> blocks;
    for (const auto& t : decomp.terms())
        blocks.push_back(norm_balanced_block(t));
    const Matrix u = hconcat(blocks);
    const auto n = static_cast<Eigen::Index>(decomp.rank() * segre_dimension(decomp.shape()));
    if (n > u.rows())
        return kInfinity;
    const Vector s = singular_values(u);
    const double sigma = s[n - 1];
    return sigma > kRankTolerance * std::max(1.0, s[0]) ? 1.0 / sigma : kInfinity;
}

/// sigma_n of the Segre-map derivative, block-diagonal in the U~_i.
inline double segre_map_sigma_n(const CPDecomposition& decomp) {
    std::vector<double> pooled;
    for (const auto& t : decomp.terms()) {
        const Vector s = singular_values(norm_balanced_block(t));
        pooled.insert(pooled.end(), s.begin(), s.end());
    }
    const std::size_t n = decomp.rank() * segre_dimension(decomp.shape());
    std::sort(pooled.begin(), pooled.end(), std::greater<>());
    return n <= pooled.size() ? pooled[n - 1] : 0.0;
}

// --- Structure detection ------------------------------------------------------

/// Every pair of terms is orthogonal in at least three distinct modes.
inline bool is_weak_3_orthogonal(const CPDecomposition& decomp, double tol = kWeakOrthogonalityTolerance) {
    for (std::size_t i = 0; i < decomp.rank(); ++i)
        for (std::size_t j = i + 1; j < decomp.rank(); ++j) {
            std::size_t orthogonal_modes = 0;
            for (std::size_t k = 0; k < decomp.order(); ++k)
                if (std::abs(decomp.term(i).vector(k).dot(decomp.term(j).vector(k))) <= tol)
                    ++orthogonal_modes;
            if (orthogonal_modes < 3)
                return false;
        }
    return true;
}

/// kappa * ||Phi(p)||_F / mu_j for every term.
inline std::vector<double> cpd_relative_condition_numbers(const CPDecomposition& decomp) {
    const ConditionReport rep = cpd_condition_number(decomp);
    std::vector<double> norms;
    for (const auto& t : decomp.terms())
        norms.push_back(t.mu());
    return relative_condition_numbers(rep, norms, frobenius_norm(assemble_cpd(decomp)));
}

} // namespace joincond
