#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"

using namespace joincond;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        path_ = std::filesystem::temp_directory_path() /
                ("joincond_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }

    std::string write(const std::string& name, const std::string& text) const {
        const auto p = path_ / name;
        std::ofstream(p, std::ios::binary) << text;
        return p.string();
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

std::string slurp(const std::string& path) { return io::read_file(path); }

std::string sample(const std::string& name) { return std::string(JOINCOND_SAMPLES_DIR) + "/" + name; }

} // namespace

TEST(Cli, RankOneCpdHasKappaOne) {
    const auto r = run({"cond-cpd", "--input", sample("rank1.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = io::parse_text(r.out);
    EXPECT_NEAR(j["kappa"].get<double>(), 1.0, 1e-12);
    EXPECT_TRUE(j["well_posed"].get<bool>());
}

TEST(Cli, OutputEqualsLibraryCall) {
    const auto r = run({"cond-cpd", "--input", sample("two_terms.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto d = io::cpd_from_json(io::parse_text(slurp(sample("two_terms.json"))));
    EXPECT_EQ(r.out, io::to_json(cpd_condition_number(d)).dump(2) + "\n");
}

TEST(Cli, MalformedJsonIsInputError) {
    TempDir tmp;
    const auto r = run({"cond-cpd", "--input", tmp.write("bad.json", "{\"dims\": [2, 2], \"terms\": [")});
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(r.err.find("malformed JSON"), std::string::npos);
    EXPECT_EQ(run({"cond-cpd", "--input", tmp.file("missing.json")}).code, 2);
    EXPECT_EQ(run({"cond-waring", "--input", tmp.write("bad2.json", "[1,2")}).code, 2);
    EXPECT_EQ(run({"cond-cpd"}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST(Cli, FactorCsvMatchesJsonInput) {
    TempDir tmp;
    Rng rng(111);
    const auto f = oracle::random_factors(rng, {3, 4, 2}, 2);
    std::vector<std::string> args{"cond-cpd", "--factors"};
    for (std::size_t k = 0; k < f.size(); ++k)
        args.push_back(tmp.write("A" + std::to_string(k) + ".csv", io::format_csv_matrix(f[k])));
    const auto from_csv = run(args);
    const auto json_path = tmp.write("d.json", io::to_json(normalize_decomposition(f)).dump());
    const auto from_json = run({"cond-cpd", "--input", json_path});
    ASSERT_EQ(from_csv.code, 0) << from_csv.err;
    ASSERT_EQ(from_json.code, 0) << from_json.err;
    const double a = io::parse_text(from_csv.out)["kappa"].get<double>();
    const double b = io::parse_text(from_json.out)["kappa"].get<double>();
    EXPECT_LE(oracle::rel_diff(a, b), 1e-12);
}

TEST(Cli, IllPosedByDimensionStillReports) {
    TempDir tmp;
    Rng rng(112);
    const auto path = tmp.write("wide.json", io::to_json(oracle::random_cpd(rng, {2, 2, 2}, 5)).dump());
    const auto r = run({"cond-cpd", "--input", path});
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(io::parse_text(r.out)["kappa"], "inf");
}

TEST(Cli, CsvReportFormat) {
    const auto r = run({"cond-cpd", "--input", sample("rank1.json"), "--format", "csv"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "sigma_min,kappa,n,N,well_posed");
}

TEST(Cli, WaringOdecoAndConsistency) {
    const auto r = run({"cond-waring", "--input", sample("odeco.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(io::parse_text(r.out)["kappa"].get<double>(), 1.0, 1e-12);

    TempDir tmp;
    Rng rng(113);
    const auto w = oracle::random_waring(rng, 3, 3, 2);
    const auto path = tmp.write("w.json", io::to_json(w).dump());
    const auto r2 = run({"cond-waring", "--input", path});
    ASSERT_EQ(r2.code, 0);
    const auto back = io::waring_from_json(io::parse_text(slurp(path)));
    EXPECT_EQ(r2.out, io::to_json(waring_condition_number(back)).dump(2) + "\n");
}

TEST(Cli, GrassmannModes) {
    TempDir tmp;
    const auto a = tmp.write("a.json", R"({"N":2,"blocks":[[[1,0]]]})");
    const auto b = tmp.write("b.json", R"({"N":2,"blocks":[[[0,1]]]})");
    const auto same = run({"grassmann", "--mode", "dist", "--input", a, "--other", a});
    ASSERT_EQ(same.code, 0) << same.err;
    EXPECT_NEAR(io::parse_text(same.out)["distance"].get<double>(), 0.0, 1e-15);
    const auto orth = run({"grassmann", "--mode", "dist", "--input", a, "--other", b});
    EXPECT_NEAR(io::parse_text(orth.out)["distance"].get<double>(), 1.0, 1e-15);
    EXPECT_EQ(run({"grassmann", "--mode", "dist", "--input", a}).code, 2);
}

TEST(Cli, CertifyAgreesWithIllposedMode) {
    TempDir tmp;
    Rng rng(114);
    for (int trial = 0; trial < 5; ++trial) {
        const SubspaceTuple w(5, {rng.orthogonal_matrix(5).leftCols(2), rng.orthogonal_matrix(5).leftCols(1),
                                  rng.orthogonal_matrix(5).leftCols(1)});
        const auto path = tmp.write("w.json", io::to_json(w).dump());
        const auto ill = run({"grassmann", "--mode", "illposed", "--input", path});
        const auto cert = run({"grassmann", "--mode", "certify", "--input", path});
        ASSERT_EQ(ill.code, 0) << ill.err;
        ASSERT_EQ(cert.code, 0) << cert.err;
        EXPECT_NEAR(io::parse_text(ill.out)["distance"].get<double>(),
                    io::parse_text(cert.out)["distance"].get<double>(), 1e-8);
        EXPECT_EQ(io::parse_text(cert.out)["input_hash"], io::hex64(io::fnv1a(io::parse_text(slurp(path)).dump())));
    }
}

TEST(Cli, CertifySingleSubspaceIsInputError) {
    TempDir tmp;
    const auto a = tmp.write("a.json", R"({"N":2,"blocks":[[[1,0]]]})");
    EXPECT_EQ(run({"grassmann", "--mode", "certify", "--input", a}).code, 2);
}

TEST(Cli, PaateroExperimentTrendsUpAndIsDeterministic) {
    TempDir tmp;
    const auto out1 = tmp.file("p1.csv"), out2 = tmp.file("p2.csv");
    ASSERT_EQ(run({"experiment", "paatero", "--seed", "42", "--s-min", "1", "--s-max", "90", "--out", out1}).code, 0);
    ASSERT_EQ(run({"experiment", "paatero", "--seed", "42", "--s-min", "1", "--s-max", "90", "--out", out2}).code, 0);
    const std::string text = slurp(out1);
    EXPECT_EQ(text, slurp(out2));
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "s,kappa,max_term_norm");
    std::vector<double> kappa;
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        kappa.push_back(std::stod(line.substr(a + 1, b - a - 1)));
    }
    ASSERT_EQ(kappa.size(), 90u);
    int drops = 0;
    for (std::size_t i = 1; i < kappa.size(); ++i)
        drops += kappa[i] < kappa[i - 1];
    EXPECT_LE(drops, 4);
}

TEST(Cli, DslSmallGridMatchesLibrary) {
    const auto r = run({"experiment", "dsl", "--seed", "3", "--s-min", "1", "--s-max", "5"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, io::sequence_csv(run_sequence(SequenceKind::desilva_lim, 3, 1, 5)));
}

TEST(Cli, ModelExperimentWritesTables) {
    TempDir tmp;
    const auto dir = tmp.file("model");
    const auto r = run({"experiment", "model", "--seed", "1", "--samples", "3", "--s-list", "1,5", "--out", dir});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string q = slurp(dir + "/quartiles.csv");
    EXPECT_EQ(q.substr(0, q.find('\n')), "s,q1,median,q3");
    EXPECT_NE(slurp(dir + "/deciles.csv").find("\n5,"), std::string::npos);
    EXPECT_EQ(run({"experiment", "model", "--samples", "3", "--s-min", "5", "--s-max", "2"}).code, 2);
}

TEST(Cli, ExamplesExperiment) {
    const auto r = run({"experiment", "examples"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "curve,t,kappa_engine,kappa_analytic");
    EXPECT_EQ(run({"experiment", "nonsense"}).code, 2);
}
