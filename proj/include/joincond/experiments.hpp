#pragma once

// Numerical studies built on the condition number:
//  - the ill-conditioned random CPD model A_k(s) = C_k (2^{-as} I_r + X_k Y_k^T)
//    and the forward/backward error experiment run on it,
//  - two rank-deficient sequences converging to open boundary points
//    (Paatero's rank-3 and de Silva-Lim's rank-2 sequence),
//  - the two non-cone counterexample curves in R^3,
//  - an empirical check of forward error <~ kappa * backward error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "joincond/condition.hpp"
#include "joincond/errors.hpp"
#include "joincond/random.hpp"
#include "joincond/refine.hpp"
#include "joincond/segre.hpp"
#include "joincond/tensor.hpp"

namespace joincond {

// --- Parallel helper ----------------------------------------------------------

/// Worker count: JOINCOND_THREADS if set and positive, else hardware concurrency.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("JOINCOND_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0)
            n = std::min(n, static_cast<unsigned>(v));
    }
    return n;
}

/// Calls fn(i) for i in [0, count); each index runs exactly once, in any order.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers)
                fn(i);
        });
}

/// Linear interpolation between order statistics; `sorted` must be ascending.
inline double quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty())
        return std::nan("");
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// --- Random ill-conditioned model ---------------------------------------------

inline std::vector<int> s_range(int first, int last) {
    std::vector<int> out;
    for (int s = first; s <= last; ++s)
        out.push_back(s);
    return out;
}

struct ModelParams {
    std::vector<std::size_t> dims{6, 5, 4, 4};
    std::vector<std::size_t> multilinear_bound{1, 2, 3, 4};
    std::size_t rank = 6;
    double rate = 0.2;
    double tau = 5e-4;
    std::size_t samples = 250;
    std::uint64_t seed = 1;
    std::vector<int> s_values = s_range(1, 50);
    RefineOptions refine{};

    void validate() const {
        if (dims.empty() || dims.size() != multilinear_bound.size())
            throw UsageError("model needs one multilinear bound per mode");
        if (rank < 1)
            throw UsageError("model rank must be positive");
        for (std::size_t k = 0; k < dims.size(); ++k)
            if (multilinear_bound[k] < 1 || multilinear_bound[k] > dims[k])
                throw UsageError("model needs 1 <= r_k <= m_k in every mode");
        if (!(rate > 0.0))
            throw UsageError("model rate must be positive");
        if (!(tau >= 0.0))
            throw UsageError("perturbation size must be nonnegative");
        if (s_values.empty())
            throw UsageError("model needs at least one value of s");
    }
};

struct ModelSample {
    CPDecomposition decomposition;
    DenseTensor tensor;
    std::vector<Matrix> factors;  // B_k = A_k(s) / ||A_k(s)||_F
    unsigned regenerations = 0;
};

namespace detail {

inline std::vector<Matrix> draw_model_factors(const ModelParams& params, Rng& rng, double s) {
    const auto r = static_cast<Eigen::Index>(params.rank);
    const double shift = std::exp2(-params.rate * s);
    std::vector<Matrix> factors;
    for (std::size_t k = 0; k < params.dims.size(); ++k) {
        const auto m = static_cast<Eigen::Index>(params.dims[k]);
        const auto rk = static_cast<Eigen::Index>(params.multilinear_bound[k]);
        const Matrix c = rng.normal_matrix(m, r);
        const Matrix x = rng.normal_matrix(r, rk);
        const Matrix y = rng.normal_matrix(r, rk);
        Matrix inner = x * y.transpose();
        inner.diagonal().array() += shift;
        Matrix a = c * inner;
        factors.push_back(a / a.norm());
    }
    return factors;
}

} // namespace detail

/// Draws one model tensor at scale s; the stream is consumed from `rng`.
/// A zero column (probability zero) redraws from a sub-seeded stream.
inline ModelSample generate_model_tensor(const ModelParams& params, Rng& rng, double s,
                                         std::uint64_t seed_for_retry = 0) {
    params.validate();
    for (unsigned attempt = 0;; ++attempt) {
        Rng retry(derive_seed(seed_for_retry, attempt + 1));
        Rng& source = attempt == 0 ? rng : retry;
        std::vector<Matrix> factors = detail::draw_model_factors(params, source, s);
        try {
            CPDecomposition decomp = normalize_decomposition(factors);
            DenseTensor tensor = assemble_cpd(decomp);
            if (attempt > 0)
                rng = std::move(retry);
            return ModelSample{std::move(decomp), std::move(tensor), std::move(factors), attempt};
        } catch (const DegenerateError&) {
            if (attempt >= 16)
                throw;
        }
    }
}

inline ModelSample generate_model_tensor(const ModelParams& params, std::uint64_t seed, double s) {
    Rng rng(seed);
    return generate_model_tensor(params, rng, s, seed);
}

// --- Forward error experiment ---------------------------------------------------

struct ExperimentRecord {
    int s = 0;
    std::size_t sample = 0;
    double backward_error = 0.0;
    double forward_error = 0.0;
    double kappa = 0.0;
    double scaling = 0.0;  // forward / (kappa * backward)
    bool converged = false;
    std::size_t iterations = 0;
    unsigned regenerations = 0;
};

struct ExperimentSummary {
    int s = 0;
    std::size_t converged = 0;
    std::size_t discarded = 0;
    std::vector<double> scaling_deciles;   // 9 values
    std::vector<double> kappa_quartiles;   // q1, median, q3
    double fraction_within_bound = 0.0;    // scaling <= 1
};

struct ForwardErrorResult {
    std::vector<ExperimentRecord> records;
    std::vector<ExperimentSummary> summaries;
};

/// Greedy matching of computed terms to true terms by cosine similarity of
/// the rank-one tensors; returns match[i] = index of the computed term for true term i.
inline std::vector<std::size_t> match_terms(const std::vector<Vector>& truth, const std::vector<Vector>& computed) {
    const std::size_t r = truth.size();
    if (computed.size() != r)
        throw UsageError("term lists differ in length");
    Matrix cosine(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
            cosine(i, j) = truth[i].dot(computed[j]) / (truth[i].norm() * computed[j].norm());

    std::vector<std::size_t> match(r, r);
    std::vector<bool> used_i(r, false), used_j(r, false);
    for (std::size_t step = 0; step < r; ++step) {
        double best = -2.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                if (!used_i[i] && !used_j[j] && cosine(i, j) > best) {
                    best = cosine(i, j);
                    bi = i;
                    bj = j;
                }
        used_i[bi] = used_j[bj] = true;
        match[bi] = bj;
    }
    return match;
}

/// sqrt(sum_i ||p_i - p~_match(i)||^2), the Khatri-Rao forward error.
inline double forward_error(const CPDecomposition& truth, const CPDecomposition& computed) {
    std::vector<Vector> a, b;
    for (const auto& t : truth.terms())
        a.push_back(rank_one_vector(t));
    for (const auto& t : computed.terms())
        b.push_back(rank_one_vector(t));
    const auto match = match_terms(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sum += (a[i] - b[match[i]]).squaredNorm();
    return std::sqrt(sum);
}

inline ExperimentRecord run_forward_error_sample(const ModelParams& params, int s, std::size_t sample) {
    const std::uint64_t stream = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) | sample;
    const std::uint64_t seed = derive_seed(params.seed, stream);
    Rng rng(seed);
    const ModelSample model = generate_model_tensor(params, rng, static_cast<double>(s), seed);

    std::vector<Matrix> init;
    for (const auto& b : model.factors)
        init.push_back(b + params.tau * rng.normal_matrix(b.rows(), b.cols()));

    ExperimentRecord rec;
    rec.s = s;
    rec.sample = sample;
    rec.regenerations = model.regenerations;

    std::optional<RefineResult> refined;
    try {
        refined = cpd_refine(normalize_decomposition(init), model.tensor, params.refine);
    } catch (const DegenerateError&) {
        return rec;
    }
    rec.converged = refined->converged;
    rec.iterations = refined->iterations;

    const DenseTensor approx = assemble_cpd(refined->decomposition);
    rec.backward_error = (model.tensor.data() - approx.data()).norm();
    rec.forward_error = forward_error(model.decomposition, refined->decomposition);
    rec.kappa = cpd_condition_number(refined->decomposition).kappa;
    rec.scaling = rec.forward_error / (rec.kappa * rec.backward_error);
    if (!std::isfinite(rec.kappa) || !std::isfinite(rec.scaling))
        rec.converged = false;
    return rec;
}

inline ExperimentSummary summarize(int s, const std::vector<ExperimentRecord>& records) {
    ExperimentSummary sum;
    sum.s = s;
    std::vector<double> scaling, kappa;
    for (const auto& r : records) {
        if (r.s != s)
            continue;
        if (!r.converged) {
            ++sum.discarded;
            continue;
        }
        ++sum.converged;
        scaling.push_back(r.scaling);
        kappa.push_back(r.kappa);
    }
    std::sort(scaling.begin(), scaling.end());
    std::sort(kappa.begin(), kappa.end());
    for (int q = 1; q <= 9; ++q)
        sum.scaling_deciles.push_back(quantile(scaling, q / 10.0));
    for (double p : {0.25, 0.5, 0.75})
        sum.kappa_quartiles.push_back(quantile(kappa, p));
    if (!scaling.empty())
        sum.fraction_within_bound =
            static_cast<double>(std::count_if(scaling.begin(), scaling.end(), [](double x) { return x <= 1.0; })) /
            static_cast<double>(scaling.size());
    return sum;
}

/// Generate, perturb, refine and measure `samples` model tensors for every s.
/// Samples run in parallel; results are stored by index, so the output does
/// not depend on scheduling.
inline ForwardErrorResult run_forward_error_experiment(const ModelParams& params) {
    params.validate();
    ForwardErrorResult out;
    const std::size_t per_s = params.samples;
    const std::size_t total = per_s * params.s_values.size();
    out.records.resize(total);
    parallel_for(total, [&](std::size_t job) {
        const int s = params.s_values[job / per_s];
        out.records[job] = run_forward_error_sample(params, s, job % per_s);
    });
    for (int s : params.s_values)
        out.summaries.push_back(summarize(s, out.records));
    return out;
}

// --- Boundary sequences ------------------------------------------------------

/// Paatero's rank-3 sequence in R^{5x4x3}; A_k ~ N(0,1) drawn once per seed.
inline CPDecomposition paatero_sequence(std::uint64_t seed, double s) {
    if (s < 1.0)
        throw UsageError("sequence index must be at least 1");
    Rng rng(seed);
    const Matrix a1 = rng.normal_matrix(5, 3);
    const Matrix a2 = rng.normal_matrix(4, 3);
    const Matrix a3 = rng.normal_matrix(3, 3);

    const double c = std::exp2(3.0 * s / 16.0);
    const double e = std::exp2(-3.0 * s / 16.0 - 1.0);

    Matrix f1(5, 3), f2(4, 3), f3(3, 3);
    f1.col(0) = -c * (a1.col(0) + a1.col(1));
    f2.col(0) = a2.col(0);
    f3.col(0) = a3.col(0);

    f1.col(1) = c * a1.col(1);
    f2.col(1) = a2.col(0) + e * a2.col(2);
    f3.col(1) = a3.col(0) + e * a3.col(2);

    f1.col(2) = c * (a1.col(0) + e * a1.col(2));
    f2.col(2) = a2.col(0) + e * a2.col(1);
    f3.col(2) = a3.col(0) + e * a3.col(1);
    return normalize_decomposition({f1, f2, f3});
}

/// de Silva and Lim's rank-2 sequence in R^{5x3x2}; B_k ~ N(0,1) drawn once per seed.
inline CPDecomposition desilva_lim_sequence(std::uint64_t seed, double s) {
    if (s < 1.0)
        throw UsageError("sequence index must be at least 1");
    Rng rng(seed);
    const Matrix b1 = rng.normal_matrix(5, 2);
    const Matrix b2 = rng.normal_matrix(3, 2);
    const Matrix b3 = rng.normal_matrix(2, 2);

    const double c = std::exp2(s / 5.0);
    const double e = std::exp2(-s / 5.0);

    Matrix f1(5, 2), f2(3, 2), f3(2, 2);
    f1.col(0) = c * (b1.col(0) + e * b1.col(1));
    f2.col(0) = b2.col(0) + e * b2.col(1);
    f3.col(0) = b3.col(0) + e * b3.col(1);
    f1.col(1) = -c * b1.col(0);
    f2.col(1) = b2.col(0);
    f3.col(1) = b3.col(0);
    return normalize_decomposition({f1, f2, f3});
}

/// Limit of the de Silva-Lim sequence: b1(x)b1(x)b2 + b1(x)b2(x)b1 + b2(x)b1(x)b1 pattern.
inline DenseTensor desilva_lim_limit(std::uint64_t seed) {
    Rng rng(seed);
    const Matrix b1 = rng.normal_matrix(5, 2);
    const Matrix b2 = rng.normal_matrix(3, 2);
    const Matrix b3 = rng.normal_matrix(2, 2);
    const Vector x0 = b1.col(0), x1 = b1.col(1);
    const Vector y0 = b2.col(0), y1 = b2.col(1);
    const Vector z0 = b3.col(0), z1 = b3.col(1);
    DenseTensor out(Shape({5, 3, 2}));
    out.data() = kron({x1, y0, z0}) + kron({x0, y1, z0}) + kron({x0, y0, z1});
    return out;
}

enum class SequenceKind { paatero, desilva_lim };

struct SequencePoint {
    int s = 0;
    double kappa = 0.0;
    double max_term_norm = 0.0;
    std::vector<double> term_norms;
};

inline std::vector<SequencePoint> run_sequence(SequenceKind kind, std::uint64_t seed, int s_min, int s_max) {
    if (s_min < 1 || s_max < s_min)
        throw UsageError("sequence range must satisfy 1 <= s_min <= s_max");
    std::vector<SequencePoint> out;
    for (int s = s_min; s <= s_max; ++s) {
        const CPDecomposition decomp = kind == SequenceKind::paatero ? paatero_sequence(seed, s)
                                                                     : desilva_lim_sequence(seed, s);
        SequencePoint pt;
        pt.s = s;
        pt.kappa = cpd_condition_number(decomp).kappa;
        for (const auto& t : decomp.terms())
            pt.term_norms.push_back(t.mu());
        pt.max_term_norm = *std::max_element(pt.term_norms.begin(), pt.term_norms.end());
        out.push_back(std::move(pt));
    }
    return out;
}

// --- Counterexample curves ----------------------------------------------------

struct ExampleValue {
    double t = 0.0;
    double kappa_engine = 0.0;
    double kappa_analytic = 0.0;
};

/// Curves p_1(t) = (sin t, cos t, 0), p_2(t) = (0, 0, t) with t in (0, pi);
/// the tangent lines are orthogonal, so kappa = 1.
inline ExampleValue example_41_kappa(double t) {
    if (!(t > 0.0 && t < std::numbers::pi))
        throw UsageError("example curve parameter must lie in (0, pi)");
    Matrix v(3, 1), w(3, 1);
    v << std::cos(t), std::sin(t), 0.0;
    w << 0.0, 0.0, 1.0;
    const double kappa = condition_number(TangentBasisTuple(3, {v, w})).kappa;
    return {t, kappa, 1.0};
}

namespace detail {

// The phase t^2 is passed separately so subsequences with t^2 on a lattice of
// multiples of pi/2 can be evaluated without rounding t^2.
inline ExampleValue example_42_at(double t, double cos_phase, double sin_phase) {
    const double t2 = t * t;
    Vector w(3);
    w << 1.0, (-std::sin(t) * t - std::cos(t)) / t2, 2.0 * cos_phase - sin_phase / t2;

    Matrix v = Matrix::Zero(3, 1);
    v(0, 0) = 1.0;
    const Matrix wn = w / w.norm();
    const double kappa = condition_number(TangentBasisTuple(3, {v, wn})).kappa;

    // sigma_2 = sqrt(2) sin(theta/2), theta the angle between the two lines.
    const double theta = std::atan2(std::hypot(w[1], w[2]), w[0]);
    const double analytic = 1.0 / (std::numbers::sqrt2 * std::sin(theta / 2.0));
    return {t, kappa, analytic};
}

} // namespace detail

/// Non-cone curves p_1(t) = (-t, 0, 0), p_2(t) = (t, cos(t)/t, sin(t^2)/t), t >= 1.
inline ExampleValue example_42_kappa(double t) {
    if (!(t >= 1.0) || !std::isfinite(t))
        throw UsageError("example curve parameter must be at least 1");
    const double phase = t * t;
    return detail::example_42_at(t, std::cos(phase), std::sin(phase));
}

/// Example 4.2 on t_k with t_k^2 = k * pi / 2 exactly; k = 4j gives the
/// convergent subsequence sqrt(2 j pi), odd k the divergent one.
inline ExampleValue example_42_kappa_lattice(std::uint64_t k) {
    if (k < 1)
        throw UsageError("lattice index must be positive");
    const double t = std::sqrt(static_cast<double>(k) * std::numbers::pi / 2.0);
    if (t < 1.0)
        throw UsageError("lattice point lies below t = 1");
    static constexpr double cos_table[4] = {1.0, 0.0, -1.0, 0.0};
    static constexpr double sin_table[4] = {0.0, 1.0, 0.0, -1.0};
    return detail::example_42_at(t, cos_table[k % 4], sin_table[k % 4]);
}

/// Limit of kappa along t_k = sqrt(2 k pi): 1 / (sqrt(2) sin(arccos(5^{-1/2}) / 2)).
inline double example_42_convergent_limit() {
    return 1.0 / (std::numbers::sqrt2 * std::sin(std::acos(1.0 / std::sqrt(5.0)) / 2.0));
}

// --- Rule of thumb ------------------------------------------------------------

struct RuleOfThumbResult {
    double kappa = 0.0;
    double max_ratio = 0.0;       // max over trials of forward / backward
    double bound_constant = 0.0;  // c with max_ratio = kappa * (1 + c * magnitude)
};

/// Moves every term along the Segre manifold (scale and unit factors perturbed
/// by relative noise of the given magnitude) and compares the product-space
/// change of the terms with the change of their sum.
inline RuleOfThumbResult validate_rule_of_thumb(const CPDecomposition& decomp, std::size_t trials,
                                                double magnitude, std::uint64_t seed = 7) {
    const ConditionReport rep = cpd_condition_number(decomp);
    if (!rep.well_posed)
        throw IllPosedError("ill-posed: decomposition has infinite condition number");
    if (!(magnitude > 0.0))
        throw UsageError("perturbation magnitude must be positive");

    Rng rng(seed);
    std::vector<Vector> base;
    for (const auto& t : decomp.terms())
        base.push_back(rank_one_vector(t));
    const Vector sum = assemble_cpd(decomp).data();

    RuleOfThumbResult out;
    out.kappa = rep.kappa;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        double forward_sq = 0.0;
        Vector moved_sum = Vector::Zero(sum.size());
        for (std::size_t i = 0; i < decomp.rank(); ++i) {
            const auto& t = decomp.term(i);
            std::vector<Vector> vectors;
            for (const auto& a : t.vectors()) {
                Vector b = a + magnitude * rng.normal_vector(a.size()) / std::sqrt(static_cast<double>(a.size()));
                vectors.push_back(b / b.norm());
            }
            const double mu = t.mu() * (1.0 + magnitude * rng.normal());
            const Vector moved = mu * kron(std::span<const Vector>(vectors));
            forward_sq += (moved - base[i]).squaredNorm();
            moved_sum += moved;
        }
        const double backward = (moved_sum - sum).norm();
        if (backward > 0.0)
            out.max_ratio = std::max(out.max_ratio, std::sqrt(forward_sq) / backward);
    }
    out.bound_constant = (out.max_ratio / out.kappa - 1.0) / magnitude;
    return out;
}

} // namespace joincond
