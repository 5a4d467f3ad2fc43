#pragma once

// Dense singular-value kernels. Everything here is backed by Eigen's
// one-sided Jacobi SVD, which computes small singular values to high
// accuracy; condition numbers are the deliverable, so no iterative or
// truncated solver is used.

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "joincond/errors.hpp"
#include "joincond/tensor.hpp"

namespace joincond {

/// sigma_min <= kRankTolerance * max(1, sigma_max) counts as rank deficient.
inline constexpr double kRankTolerance = 1e-14;

struct SingularPair {
    double sigma = 0.0;
    Vector vector;
};

/// Singular values in descending order; min(rows, cols) of them.
inline Vector singular_values(const Matrix& m) {
    if (m.size() == 0)
        return Vector();
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues();
}

/// k-th largest singular value (1-based), zero when k exceeds min(rows, cols).
inline double kth_singular_value(const Matrix& m, Eigen::Index k) {
    if (k < 1)
        throw UsageError("singular value index is 1-based");
    const Vector s = singular_values(m);
    return k <= s.size() ? s[k - 1] : 0.0;
}

struct SingularSummary {
    double sigma_min = 0.0;  // n-th singular value, zero when n > N
    double sigma_max = 0.0;
    Vector least_vector;
};

/// One SVD giving the extreme singular values and a least right singular vector.
///
/// When M is wide (n > N) the minimum over unit x of ||M x|| is zero and the
/// returned vector lies in the null space of M^T M.
inline SingularSummary singular_summary(const Matrix& m) {
    const Eigen::Index n = m.cols();
    if (n == 0)
        throw UsageError("matrix has no columns");
    if (!m.allFinite())
        throw UsageError("matrix has non-finite entries");

    if (m.rows() >= n) {
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinV);
        const Vector& s = svd.singularValues();
        return {s[n - 1], s[0], svd.matrixV().col(n - 1)};
    }

    // Pad with zero rows to a square matrix; singular vectors are unchanged.
    Matrix padded = Matrix::Zero(n, n);
    padded.topRows(m.rows()) = m;
    Eigen::JacobiSVD<Matrix> svd(padded, Eigen::ComputeFullV);
    return {0.0, svd.singularValues()[0], svd.matrixV().col(n - 1)};
}

/// min over unit x of ||M x|| together with a minimizing x.
inline SingularPair smallest_singular_value_with_vector(const Matrix& m) {
    SingularSummary s = singular_summary(m);
    return {s.sigma_min, std::move(s.least_vector)};
}

/// max |Q^T Q - I|.
inline double orthonormality_residual(const Matrix& q) {
    if (q.cols() == 0)
        return 0.0;
    return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

inline Matrix hconcat(std::span<const Matrix> blocks) {
    if (blocks.empty())
        return Matrix();
    Eigen::Index cols = 0;
    for (const auto& b : blocks)
        cols += b.cols();
    Matrix out(blocks[0].rows(), cols);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        if (b.rows() != out.rows())
            throw UsageError("blocks disagree on the number of rows");
        out.middleCols(at, b.cols()) = b;
        at += b.cols();
    }
    return out;
}

} // namespace joincond
