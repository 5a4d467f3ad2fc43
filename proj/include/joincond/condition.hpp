#pragma once

// Condition number of a join decomposition from orthonormal tangent bases:
//
//     kappa = 1 / sigma_n([U_1 ... U_r]),   n = n_1 + ... + n_r,
//
// with kappa = +inf when n > N or sigma_n is numerically zero.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "joincond/errors.hpp"
#include "joincond/linalg.hpp"
#include "joincond/tensor.hpp"

namespace joincond {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Tolerance on U_i^T U_i = I for externally supplied bases.
inline constexpr double kBasisTolerance = 1e-10;

class TangentBasisTuple {
public:
    TangentBasisTuple(std::size_t ambient_dim, std::vector<Matrix> blocks)
        : ambient_dim_(ambient_dim), blocks_(std::move(blocks)) {
        if (blocks_.empty())
            throw UsageError("invalid tangent basis: no blocks");
        for (const auto& b : blocks_) {
            if (static_cast<std::size_t>(b.rows()) != ambient_dim_)
                throw UsageError("invalid tangent basis: block has wrong number of rows");
            if (b.cols() == 0)
                throw UsageError("invalid tangent basis: empty block");
            if (!b.allFinite() || orthonormality_residual(b) > kBasisTolerance)
                throw UsageError("invalid tangent basis: block columns are not orthonormal");
            total_dim_ += static_cast<std::size_t>(b.cols());
        }
    }

    std::size_t ambient_dim() const noexcept { return ambient_dim_; }
    std::size_t total_dim() const noexcept { return total_dim_; }
    std::size_t block_count() const noexcept { return blocks_.size(); }
    const std::vector<Matrix>& blocks() const noexcept { return blocks_; }
    const Matrix& block(std::size_t i) const { return blocks_.at(i); }

    Matrix concatenated() const { return hconcat(blocks_); }

    std::vector<std::size_t> block_sizes() const {
        std::vector<std::size_t> sizes;
        for (const auto& b : blocks_)
            sizes.push_back(static_cast<std::size_t>(b.cols()));
        return sizes;
    }

private:
    std::size_t ambient_dim_;
    std::vector<Matrix> blocks_;
    std::size_t total_dim_ = 0;
};

struct ConditionReport {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double kappa = kInfinity;
    Vector least_vector;
    bool well_posed = false;
    std::size_t n = 0;
    std::size_t N = 0;
    std::vector<std::size_t> block_sizes;

    /// Part x_i of the least singular vector that multiplies U_i.
    Vector least_vector_block(std::size_t i) const {
        std::size_t offset = 0;
        for (std::size_t j = 0; j < i; ++j)
            offset += block_sizes.at(j);
        return least_vector.segment(static_cast<Eigen::Index>(offset),
                                    static_cast<Eigen::Index>(block_sizes.at(i)));
    }
};

/// Report for an already-concatenated U; no orthonormality checks.
inline ConditionReport condition_of_matrix(const Matrix& u, std::vector<std::size_t> block_sizes) {
    ConditionReport rep;
    rep.N = static_cast<std::size_t>(u.rows());
    rep.n = static_cast<std::size_t>(u.cols());
    rep.block_sizes = std::move(block_sizes);

    SingularSummary svd = singular_summary(u);
    rep.least_vector = std::move(svd.least_vector);
    rep.sigma_max = svd.sigma_max;

    if (rep.n > rep.N) {
        rep.sigma_min = 0.0;
        rep.well_posed = false;
        rep.kappa = kInfinity;
        return rep;
    }
    rep.sigma_min = svd.sigma_min;
    rep.well_posed = svd.sigma_min > kRankTolerance * std::max(1.0, rep.sigma_max);
    rep.kappa = rep.well_posed ? 1.0 / rep.sigma_min : kInfinity;
    return rep;
}

inline ConditionReport condition_number(const TangentBasisTuple& tuple) {
    return condition_of_matrix(tuple.concatenated(), tuple.block_sizes());
}

/// kappa_j^rel = kappa * ||Phi(p)|| / ||p_j||.
inline std::vector<double> relative_condition_numbers(const ConditionReport& report,
                                                      std::span<const double> term_norms,
                                                      double total_norm) {
    if (!(total_norm >= 0.0))
        throw UsageError("total norm must be nonnegative");
    std::vector<double> out;
    out.reserve(term_norms.size());
    for (double norm : term_norms) {
        if (!(norm > 0.0))
            throw DegenerateError("degenerate term");
        out.push_back(report.well_posed ? report.kappa * total_norm / norm : kInfinity);
    }
    return out;
}

} // namespace joincond
