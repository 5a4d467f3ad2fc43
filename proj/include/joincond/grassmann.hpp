#pragma once

// Tuples of subspaces (points of Gr(N, n_1) x ... x Gr(N, n_r)), the
// projection distance between them, and the ill-posed locus
//
//     Sigma_Gr = { (W_1, ..., W_r) : dim(W_1 + ... + W_r) < n_1 + ... + n_r }.
//
// The distance from W to Sigma_Gr is sigma_n([W_1 ... W_r]);
// nearest_intersecting_tuple() builds a tuple of Sigma_Gr attaining it.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "joincond/condition.hpp"
#include "joincond/errors.hpp"
#include "joincond/linalg.hpp"
#include "joincond/tensor.hpp"

namespace joincond {

/// Tolerances of the nearest-tuple certificate; two SVDs compound here.
inline constexpr double kCertificateTolerance = 1e-8;

class SubspaceTuple {
public:
    SubspaceTuple(std::size_t ambient_dim, std::vector<Matrix> bases)
        : ambient_dim_(ambient_dim), bases_(std::move(bases)) {
        if (bases_.empty())
            throw UsageError("subspace tuple needs at least one subspace");
        for (const auto& b : bases_) {
            if (static_cast<std::size_t>(b.rows()) != ambient_dim_)
                throw UsageError("subspace basis has wrong number of rows");
            if (b.cols() == 0)
                throw UsageError("subspace basis has no columns");
            if (!b.allFinite() || orthonormality_residual(b) > kBasisTolerance)
                throw UsageError("subspace basis columns are not orthonormal");
        }
    }

    explicit SubspaceTuple(const TangentBasisTuple& tangent)
        : SubspaceTuple(tangent.ambient_dim(), tangent.blocks()) {}

    std::size_t ambient_dim() const noexcept { return ambient_dim_; }
    std::size_t size() const noexcept { return bases_.size(); }
    const std::vector<Matrix>& bases() const noexcept { return bases_; }
    const Matrix& basis(std::size_t i) const { return bases_.at(i); }

    std::size_t total_dim() const noexcept {
        std::size_t n = 0;
        for (const auto& b : bases_)
            n += static_cast<std::size_t>(b.cols());
        return n;
    }

    Matrix concatenated() const { return hconcat(bases_); }

private:
    std::size_t ambient_dim_;
    std::vector<Matrix> bases_;
};

struct IllposedCertificate {
    SubspaceTuple nearest;
    double distance = 0.0;         // projection distance input -> nearest
    double sigma_n = 0.0;          // sigma_n of the input, the target distance
    double nearest_sigma_n = 0.0;  // sigma_n of nearest, ~0 on Sigma_Gr
    std::vector<Vector> witness_directions;
};

/// ||Pi_W - Pi_W'|| for subspaces of equal dimension, as ||(I - Pi_W) W'||.
inline double subspace_distance(const Matrix& w, const Matrix& w2) {
    if (w.rows() != w2.rows() || w.cols() != w2.cols())
        throw UsageError("subspaces differ in ambient or subspace dimension");
    const Matrix residual = w2 - w * (w.transpose() * w2);
    return singular_values(residual)[0];
}

inline double projection_distance(const SubspaceTuple& w, const SubspaceTuple& w2) {
    if (w.ambient_dim() != w2.ambient_dim() || w.size() != w2.size())
        throw UsageError("subspace tuples differ in ambient dimension or length");
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = subspace_distance(w.basis(i), w2.basis(i));
        sum += d * d;
    }
    return std::sqrt(sum);
}

inline double distance_to_illposed(const SubspaceTuple& w) {
    if (w.total_dim() > w.ambient_dim())
        return 0.0;
    return singular_summary(w.concatenated()).sigma_min;
}

inline bool is_intersecting(const SubspaceTuple& w, double tol) {
    return distance_to_illposed(w) <= tol;
}

namespace detail {

// Unit vector in span(B) orthogonal to y; B has orthonormal columns.
inline Vector unit_in_span_orthogonal_to(const Matrix& b, const Vector& y) {
    const Vector g = b.transpose() * y;
    // a witness numerically orthogonal to span(B) leaves all of B available
    const double gg = g.squaredNorm() > 1e-24 ? g.squaredNorm() : 0.0;
    Vector best;
    double best_norm = -1.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        Vector c = Vector::Unit(b.cols(), j);
        if (gg > 0.0)
            c -= (g[j] / gg) * g;
        const double cn = c.norm();
        if (cn > best_norm) {
            best_norm = cn;
            best = std::move(c);
        }
    }
    if (!(best_norm > 1e-12))
        throw CertificateError("no direction in the rank-deficient span is orthogonal to the witness", 1.0,
                               1.0);
    Vector z = b * best;
    return z / z.norm();
}

// W rotated minimally inside span(Pi_W x, x) so that it contains the unit x.
inline Matrix rotate_to_contain(const Matrix& w, const Vector& x) {
    Vector c = w.transpose() * x;
    const double cn = c.norm();
    if (cn > 1e-14)
        c /= cn;
    else
        c = Vector::Unit(w.cols(), 0);
    const Matrix q = orthonormal_complement(c);
    Matrix out(w.rows(), w.cols());
    out.col(0) = x;
    out.rightCols(w.cols() - 1) = w * q;
    return out;
}

} // namespace detail

/// Nearest point of Sigma_Gr, constructed from the least singular vector of
/// U = [W_1 ... W_r] and the best rank-(r-1) approximation of the unit
/// witnesses y_i = W_i v_i / ||v_i||. Throws CertificateError when the result
/// misses the 1e-8 tolerances.
inline IllposedCertificate nearest_intersecting_tuple(const SubspaceTuple& w) {
    const std::size_t r = w.size();
    if (r < 2)
        throw UsageError("a single subspace can never be intersecting; the ill-posed locus is empty");

    const std::size_t n = w.total_dim();
    const Matrix u = w.concatenated();
    const SingularSummary svd = singular_summary(u);

    std::vector<Vector> witnesses;
    witnesses.reserve(r);
    Eigen::Index offset = 0;
    for (std::size_t i = 0; i < r; ++i) {
        const Matrix& wi = w.basis(i);
        const Vector vi = svd.least_vector.segment(offset, wi.cols());
        offset += wi.cols();
        const double vn = vi.norm();
        witnesses.push_back(vn > 1e-12 ? Vector(wi * vi / vn) : Vector(wi.col(0)));
    }

    const bool already = n > w.ambient_dim() || svd.sigma_min <= kRankTolerance * std::max(1.0, svd.sigma_max);
    if (already)
        return IllposedCertificate{w, 0.0, n > w.ambient_dim() ? 0.0 : svd.sigma_min,
                                   n > w.ambient_dim() ? 0.0 : svd.sigma_min, std::move(witnesses)};

    Matrix y(static_cast<Eigen::Index>(w.ambient_dim()), static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < r; ++i)
        y.col(static_cast<Eigen::Index>(i)) = witnesses[i];

    const Eigen::Index rr = static_cast<Eigen::Index>(r);
    Eigen::JacobiSVD<Matrix> ysvd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& ys = ysvd.singularValues();
    const Matrix x_star =
        y - ys[rr - 1] * ysvd.matrixU().col(rr - 1) * ysvd.matrixV().col(rr - 1).transpose();

    Eigen::Index span_rank = 0;
    for (Eigen::Index j = 0; j + 1 < rr; ++j)
        if (ys[j] > kRankTolerance * std::max(1.0, ys[0]))
            ++span_rank;
    const Matrix span_basis = ysvd.matrixU().leftCols(span_rank);

    std::vector<Vector> directions;
    std::vector<Matrix> nearest_bases;
    directions.reserve(r);
    nearest_bases.reserve(r);
    for (std::size_t i = 0; i < r; ++i) {
        const Vector col = x_star.col(static_cast<Eigen::Index>(i));
        const double cn = col.norm();
        Vector x = cn > 1e-12 ? Vector(col / cn) : detail::unit_in_span_orthogonal_to(span_basis, witnesses[i]);
        nearest_bases.push_back(detail::rotate_to_contain(w.basis(i), x));
        directions.push_back(std::move(x));
    }

    SubspaceTuple nearest(w.ambient_dim(), std::move(nearest_bases));
    const double distance = projection_distance(w, nearest);
    const double nearest_sigma = distance_to_illposed(nearest);
    const double gap = std::abs(distance - svd.sigma_min);
    if (nearest_sigma > kCertificateTolerance || gap > kCertificateTolerance)
        throw CertificateError("nearest intersecting tuple misses the certificate tolerance", nearest_sigma, gap);

    return IllposedCertificate{std::move(nearest), distance, svd.sigma_min, nearest_sigma, std::move(directions)};
}

} // namespace joincond
