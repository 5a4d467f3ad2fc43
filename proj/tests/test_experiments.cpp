#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "joincond/experiments.hpp"
#include "joincond/io.hpp"
#include "oracles.hpp"

using namespace joincond;

namespace {

ModelParams small_params() {
    ModelParams p;
    p.samples = 6;
    p.s_values = {1, 20};
    p.seed = 5;
    return p;
}

} // namespace

TEST(Quantile, LinearInterpolation) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(quantile(x, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(quantile(x, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile(x, 0.1), 1.4);
    EXPECT_DOUBLE_EQ(quantile({7.0}, 0.9), 7.0);
    EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}

TEST(ModelParams, Validation) {
    ModelParams p;
    EXPECT_NO_THROW(p.validate());
    p.multilinear_bound[0] = 7;
    EXPECT_THROW(p.validate(), UsageError);
    p = ModelParams{};
    p.rate = 0;
    EXPECT_THROW(p.validate(), UsageError);
    p = ModelParams{};
    p.dims.pop_back();
    EXPECT_THROW(p.validate(), UsageError);
}

TEST(ModelTensor, Deterministic) {
    const ModelParams p;
    const auto a = generate_model_tensor(p, 77, 0.0);
    const auto b = generate_model_tensor(p, 77, 0.0);
    EXPECT_EQ(a.tensor.data(), b.tensor.data());
    const auto c = generate_model_tensor(p, 78, 0.0);
    EXPECT_NE(a.tensor.data(), c.tensor.data());
}

TEST(ModelTensor, FactorsFollowTheModel) {
    const ModelParams p;
    const std::uint64_t seed = 9;
    const double s = 3.0;
    const auto sample = generate_model_tensor(p, seed, s);
    // regenerate C, X, Y from the same stream in the documented draw order
    Rng rng(seed);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto m = static_cast<Eigen::Index>(p.dims[k]);
        const auto rk = static_cast<Eigen::Index>(p.multilinear_bound[k]);
        const Matrix c = rng.normal_matrix(m, 6), x = rng.normal_matrix(6, rk), y = rng.normal_matrix(6, rk);
        const Matrix a = c * (std::exp2(-0.2 * s) * Matrix::Identity(6, 6) + x * y.transpose());
        EXPECT_LE((sample.factors[k] - a / a.norm()).norm(), 1e-14);
        EXPECT_NEAR(sample.factors[k].norm(), 1.0, 1e-14);
    }
    EXPECT_EQ(sample.decomposition.rank(), 6u);
    EXPECT_LE((assemble_cpd(sample.decomposition).data() - sample.tensor.data()).norm(),
              1e-12 * sample.tensor.data().norm());
}

TEST(ModelTensor, FactorsApproachTheLowRankLimit) {
    const ModelParams p;
    const std::uint64_t seed = 10;
    std::vector<double> gaps;
    for (double s : {10.0, 30.0, 50.0}) {
        const auto sample = generate_model_tensor(p, seed, s);
        Rng rng(seed);
        const Matrix c = rng.normal_matrix(6, 6), x = rng.normal_matrix(6, 1), y = rng.normal_matrix(6, 1);
        const Matrix limit = c * x * y.transpose();
        gaps.push_back((sample.factors[0] - limit / limit.norm()).norm());
    }
    EXPECT_GT(gaps[0], gaps[1]);
    EXPECT_GT(gaps[1], gaps[2]);
    EXPECT_LT(gaps[2], 1e-2);
}

TEST(Refine, ExactStartConvergesImmediately) {
    Rng rng(80);
    const auto d = oracle::random_cpd(rng, {4, 4, 4}, 2);
    const auto res = cpd_refine(d, assemble_cpd(d));
    EXPECT_TRUE(res.converged);
    EXPECT_LE(res.iterations, 1u);
}

TEST(Refine, RecoversFromSmallNoise) {
    Rng rng(81);
    for (int trial = 0; trial < 5; ++trial) {
        const auto f = oracle::random_factors(rng, {4, 4, 4}, 2);
        const auto target = assemble_cpd(normalize_decomposition(f));
        std::vector<Matrix> init;
        for (const auto& a : f)
            init.push_back(a + 5e-4 * rng.normal_matrix(a.rows(), a.cols()));
        const auto res = cpd_refine(normalize_decomposition(init), target);
        EXPECT_TRUE(res.converged);
        EXPECT_LE(res.objective, 1e-14);
        EXPECT_LE(oracle::rel_diff(cpd_condition_number(res.decomposition).kappa,
                                   cpd_condition_number(normalize_decomposition(f)).kappa),
                  1e-4);
    }
}

TEST(Refine, TargetOutsideModelReportsWithoutThrowing) {
    Rng rng(82);
    const DenseTensor target(Shape({3, 3, 3}), rng.normal_vector(27));
    const auto init = oracle::random_cpd(rng, {3, 3, 3}, 1);
    RefineOptions opts;
    opts.max_iterations = 50;
    const auto res = cpd_refine(init, target, opts);
    EXPECT_FALSE(res.converged);
    EXPECT_GT(res.objective, 1e-3);
    EXPECT_LE(res.iterations, 50u);
}

TEST(Refine, ShapeMismatchIsUsageError) {
    Rng rng(83);
    const auto d = oracle::random_cpd(rng, {3, 3}, 1);
    EXPECT_THROW(cpd_refine(d, DenseTensor(Shape({3, 4}))), UsageError);
}

TEST(MatchTerms, RecoversPermutation) {
    Rng rng(84);
    std::vector<Vector> a;
    for (int i = 0; i < 5; ++i)
        a.push_back(rng.normal_vector(10));
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    std::vector<Vector> b(5);
    for (std::size_t i = 0; i < 5; ++i)
        b[perm[i]] = a[i] + 1e-3 * rng.normal_vector(10);
    EXPECT_EQ(match_terms(a, b), perm);
}

TEST(ForwardError, InvariantUnderTermOrder) {
    Rng rng(85);
    const auto d = oracle::random_cpd(rng, {3, 3, 3}, 3);
    std::vector<RankOneTerm> rev(d.terms().rbegin(), d.terms().rend());
    EXPECT_LE(forward_error(d, CPDecomposition(d.shape(), rev)), 1e-15);
}

TEST(ForwardErrorExperiment, DeterministicAndIndependentOfThreads) {
    const auto p = small_params();
    setenv("JOINCOND_THREADS", "1", 1);
    const auto a = run_forward_error_experiment(p);
    setenv("JOINCOND_THREADS", "3", 1);
    const auto b = run_forward_error_experiment(p);
    unsetenv("JOINCOND_THREADS");
    EXPECT_EQ(io::records_csv(a.records), io::records_csv(b.records));
    EXPECT_EQ(io::deciles_csv(a.summaries), io::deciles_csv(b.summaries));
    // a single sample run alone reproduces its record
    const auto one = run_forward_error_sample(p, 20, 4);
    EXPECT_EQ(io::records_csv({one}), io::records_csv({a.records[p.samples + 4]}));
}

TEST(ForwardErrorExperiment, RecordsAreConsistent) {
    const auto res = run_forward_error_experiment(small_params());
    ASSERT_EQ(res.records.size(), 12u);
    ASSERT_EQ(res.summaries.size(), 2u);
    for (const auto& r : res.records) {
        if (!r.converged)
            continue;
        EXPECT_TRUE(std::isfinite(r.kappa));
        EXPECT_GT(r.backward_error, 0.0);
        EXPECT_NEAR(r.scaling, r.forward_error / (r.kappa * r.backward_error), 1e-12 * r.scaling);
    }
    for (const auto& s : res.summaries) {
        EXPECT_EQ(s.converged + s.discarded, 6u);
        EXPECT_EQ(s.scaling_deciles.size(), 9u);
        EXPECT_TRUE(std::is_sorted(s.scaling_deciles.begin(), s.scaling_deciles.end()));
        EXPECT_TRUE(std::is_sorted(s.kappa_quartiles.begin(), s.kappa_quartiles.end()));
    }
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
    setenv("JOINCOND_THREADS", "4", 1);
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    unsetenv("JOINCOND_THREADS");
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

TEST(Paatero, ShapeAndDivergence) {
    const auto d1 = paatero_sequence(42, 1);
    EXPECT_EQ(d1.shape().dims(), (std::vector<std::size_t>{5, 4, 3}));
    EXPECT_EQ(d1.rank(), 3u);
    EXPECT_THROW(paatero_sequence(42, 0.5), UsageError);

    // the sum converges (successive differences shrink) while the terms blow up
    double prev_gap = kInfinity;
    for (int s = 16; s <= 80; s += 16) {
        const double gap =
            (assemble_cpd(paatero_sequence(42, s + 16)).data() - assemble_cpd(paatero_sequence(42, s)).data()).norm();
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
        const auto d = paatero_sequence(42, s);
        double mx = 0.0;
        for (const auto& t : d.terms())
            mx = std::max(mx, t.mu());
        const double growth = mx / std::exp2(3.0 * s / 16.0);
        EXPECT_GT(growth, 1e-2);
        EXPECT_LT(growth, 1e3);
    }
}

TEST(Paatero, KappaIncreases) {
    for (std::uint64_t seed : {42u, 43u}) {
        const auto pts = run_sequence(SequenceKind::paatero, seed, 1, 90);
        int drops = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            drops += pts[i].kappa < pts[i - 1].kappa;
        EXPECT_LE(drops, 4);
        EXPECT_GT(pts.back().kappa / pts.front().kappa, 1e8);
    }
}

TEST(DeSilvaLim, ConvergesToTheRankThreeLimit) {
    const DenseTensor limit = desilva_lim_limit(7);
    double prev = kInfinity;
    for (int s = 10; s <= 90; s += 10) {
        const double err = (assemble_cpd(desilva_lim_sequence(7, s)).data() - limit.data()).norm();
        EXPECT_LT(err, prev);
        prev = err;
    }
    // the error is the O(e) remainder of the expansion: c * e^2 * (...) with c e = 1
    EXPECT_LT(prev, 1e-4 * limit.data().norm());
}

TEST(DeSilvaLim, BothTermsDiverge) {
    const auto d1 = desilva_lim_sequence(7, 1);
    const auto d90 = desilva_lim_sequence(7, 90);
    EXPECT_EQ(d1.shape().dims(), (std::vector<std::size_t>{5, 3, 2}));
    for (std::size_t i = 0; i < 2; ++i) {
        const double growth = d90.term(i).mu() / d1.term(i).mu();
        EXPECT_GT(growth, 1e4);
        EXPECT_NEAR(std::log2(growth), 89.0 / 5.0, 1.0);
    }
    const auto pts = run_sequence(SequenceKind::desilva_lim, 7, 1, 90);
    EXPECT_GE(pts.back().kappa / pts.front().kappa, 1e8);
}

TEST(Examples, ConeCurvesArePerfectlyConditioned) {
    for (int i = 1; i <= 30; ++i) {
        const auto v = example_41_kappa(0.1 * i);
        EXPECT_NEAR(v.kappa_engine, 1.0, 1e-10);
    }
    EXPECT_THROW(example_41_kappa(0.0), UsageError);
    EXPECT_THROW(example_41_kappa(4.0), UsageError);
}

TEST(Examples, NonConeCurveMatchesAngleFormula) {
    for (int i = 0; i < 50; ++i) {
        const auto v = example_42_kappa(1.0 + 0.37 * i);
        EXPECT_LE(oracle::rel_diff(v.kappa_engine, v.kappa_analytic), 1e-10);
    }
    EXPECT_THROW(example_42_kappa(0.5), UsageError);
}

TEST(Examples, NonConeSubsequences) {
    // even lattice points converge to the closed-form limit
    const double limit = example_42_convergent_limit();
    EXPECT_NEAR(limit, 1.0 / std::sqrt(1.0 - 1.0 / std::sqrt(5.0)), 1e-12);
    EXPECT_NEAR(example_42_kappa_lattice(4'000'000'000'000ULL).kappa_engine, limit, 1e-6);
    // odd lattice points diverge like sqrt(2) t
    const auto odd = example_42_kappa_lattice(1'000'000'000'001ULL);
    EXPECT_GT(odd.kappa_engine, 1e6);
    EXPECT_LE(oracle::rel_diff(odd.kappa_engine, odd.kappa_analytic), 1e-8);
}

TEST(RuleOfThumb, FirstOrderBound) {
    Rng rng(90);
    for (int trial = 0; trial < 5; ++trial) {
        const auto d = oracle::random_cpd(rng, {4, 3, 3}, 2);
        const auto r = validate_rule_of_thumb(d, 50, 1e-7, 100 + trial);
        EXPECT_LE(r.max_ratio, 1.1 * r.kappa);
        EXPECT_GT(r.max_ratio, 0.0);
    }
}

TEST(RuleOfThumb, WeakOrthogonalHasRatioNearOne) {
    Rng rng(91);
    const auto d = oracle::random_weak3_cpd(rng, {3, 3, 3}, 3);
    const auto r = validate_rule_of_thumb(d, 100, 1e-6);
    EXPECT_NEAR(r.kappa, 1.0, 1e-12);
    EXPECT_LE(r.max_ratio, 1.1);
}

TEST(RuleOfThumb, IllPosedIsRefused) {
    Rng rng(92);
    const auto d = oracle::random_cpd(rng, {2, 2, 2}, 5);
    try {
        validate_rule_of_thumb(d, 10, 1e-6);
        FAIL();
    } catch (const IllPosedError& e) {
        EXPECT_NE(std::string(e.what()).find("ill-posed"), std::string::npos);
    }
}
