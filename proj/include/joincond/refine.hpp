#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) refinement of a CPD against a
// dense target, on the factor-matrix parametrization A_1, ..., A_d.
// Minimizes f(A) = 1/2 || [[A_1, ..., A_d]] - T ||_F^2.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "joincond/segre.hpp"
#include "joincond/tensor.hpp"

namespace joincond {

struct RefineOptions {
    std::size_t max_iterations = 1000;
    double objective_tolerance = 1e-14;
    double initial_damping = 1e-2;
    double damping_factor = 10.0;
    double max_damping = 1e20;
};

struct RefineResult {
    CPDecomposition decomposition;
    std::vector<Matrix> factors;
    bool converged = false;
    std::size_t iterations = 0;
    double objective = 0.0;
};

namespace detail {

inline Vector cpd_vector(const std::vector<Matrix>& factors) {
    const Eigen::Index r = factors[0].cols();
    std::vector<Vector> cols(factors.size());
    Vector out;
    for (Eigen::Index i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < factors.size(); ++k)
            cols[k] = factors[k].col(i);
        Vector term = kron(std::span<const Vector>(cols));
        if (out.size() == 0)
            out = std::move(term);
        else
            out += term;
    }
    return out;
}

// Columns ordered mode by mode, then term, then row of the factor matrix.
inline Matrix cpd_jacobian(const std::vector<Matrix>& factors, Eigen::Index ambient) {
    const Eigen::Index r = factors[0].cols();
    Eigen::Index params = 0;
    for (const auto& a : factors)
        params += a.size();

    Matrix jac(ambient, params);
    Eigen::Index at = 0;
    std::vector<Matrix> parts(factors.size());
    for (std::size_t k = 0; k < factors.size(); ++k) {
        const Eigen::Index m = factors[k].rows();
        for (Eigen::Index i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < factors.size(); ++j)
                parts[j] = j == k ? Matrix(Matrix::Identity(m, m)) : Matrix(factors[j].col(i));
            jac.middleCols(at, m) = kron_matrices(parts);
            at += m;
        }
    }
    return jac;
}

inline std::vector<Matrix> step_factors(const std::vector<Matrix>& factors, const Vector& step) {
    std::vector<Matrix> out = factors;
    Eigen::Index at = 0;
    for (auto& a : out)
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            a.col(i) += step.segment(at, a.rows());
            at += a.rows();
        }
    return out;
}

} // namespace detail

/// Never throws on non-convergence; check RefineResult::converged.
inline RefineResult cpd_refine(const CPDecomposition& init, const DenseTensor& target,
                               const RefineOptions& opts = {}) {
    if (!(init.shape() == target.shape()))
        throw UsageError("initial decomposition and target differ in shape");

    std::vector<Matrix> factors = balanced_factors(init);
    const Vector& t = target.data();
    Vector residual = detail::cpd_vector(factors) - t;
    double objective = 0.5 * residual.squaredNorm();
    double damping = opts.initial_damping;

    std::size_t iter = 0;
    bool converged = objective <= opts.objective_tolerance;
    while (!converged && iter < opts.max_iterations && damping <= opts.max_damping) {
        ++iter;
        const Matrix jac = detail::cpd_jacobian(factors, t.size());
        const Vector gradient = jac.transpose() * residual;
        Matrix normal = jac.transpose() * jac;
        normal.diagonal().array() += damping;

        const Vector step = normal.ldlt().solve(-gradient);
        std::vector<Matrix> trial = detail::step_factors(factors, step);
        const Vector trial_residual = detail::cpd_vector(trial) - t;
        const double trial_objective = 0.5 * trial_residual.squaredNorm();

        if (std::isfinite(trial_objective) && trial_objective < objective) {
            factors = std::move(trial);
            residual = trial_residual;
            objective = trial_objective;
            damping /= opts.damping_factor;
            converged = objective <= opts.objective_tolerance;
        } else {
            damping *= opts.damping_factor;
        }
    }

    return RefineResult{normalize_decomposition(factors), std::move(factors), converged, iter, objective};
}

} // namespace joincond
