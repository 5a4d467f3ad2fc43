#pragma once

// Command-line front end. run_cli() is separate from main() so tests can
// drive it in-process and compare against direct library calls.
//
// Exit codes: 0 ok, 2 input error, 3 n > N (report still written),
// 4 certificate tolerance missed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "joincond/io.hpp"
#include "joincond/joincond.hpp"

namespace joincond::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kIllPosedByDimension = 3, kCertificateFailure = 4 };

struct RunConfig {
    std::string input;
    std::string other;
    std::vector<std::string> factors;
    std::string out;
    std::string format = "json";
    std::string mode = "illposed";
    std::string experiment;
    std::uint64_t seed = 42;
    std::size_t samples = 250;
    int s_min = 1;
    int s_max = 0;  // 0: per-experiment default
    std::vector<int> s_list;
    double tol = kCertificateTolerance;
};

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f)
        throw ParseError("cannot write " + cfg.out);
    f << text;
}

inline std::string json_text(const io::Json& j) { return j.dump(2) + "\n"; }

inline std::string report_text(const RunConfig& cfg, const ConditionReport& rep) {
    if (cfg.format == "csv")
        return "sigma_min,kappa,n,N,well_posed\n" + io::format_double(rep.sigma_min) + ',' +
               io::format_double(rep.kappa) + ',' + std::to_string(rep.n) + ',' + std::to_string(rep.N) + ',' +
               (rep.well_posed ? "true" : "false") + '\n';
    return json_text(io::to_json(rep));
}

inline int finish_report(const RunConfig& cfg, const ConditionReport& rep, std::ostream& out, std::ostream& err) {
    emit(cfg, report_text(cfg, rep), out);
    if (rep.n > rep.N) {
        err << "ill-posed by dimension: n = " << rep.n << " exceeds N = " << rep.N << "\n";
        return kIllPosedByDimension;
    }
    return kOk;
}

inline int cond_cpd(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    std::optional<CPDecomposition> decomp;
    if (!cfg.factors.empty()) {
        std::vector<Matrix> mats;
        for (const auto& path : cfg.factors)
            mats.push_back(io::parse_csv_matrix(io::read_file(path)));
        try {
            decomp.emplace(normalize_decomposition(mats));
        } catch (const Error& e) {
            throw ParseError(e.what());
        }
    } else if (!cfg.input.empty()) {
        decomp.emplace(io::cpd_from_json(io::parse_text(io::read_file(cfg.input))));
    } else {
        throw ParseError("cond-cpd needs --input or --factors");
    }
    return finish_report(cfg, cpd_condition_number(*decomp), out, err);
}

inline int cond_waring(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.input.empty())
        throw ParseError("cond-waring needs --input");
    const auto decomp = io::waring_from_json(io::parse_text(io::read_file(cfg.input)));
    return finish_report(cfg, waring_condition_number(decomp), out, err);
}

inline int grassmann(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.input.empty())
        throw ParseError("grassmann needs --input");
    const io::Json input = io::parse_text(io::read_file(cfg.input));
    const SubspaceTuple w = io::subspace_tuple_from_json(input);

    if (cfg.mode == "dist") {
        if (cfg.other.empty())
            throw ParseError("grassmann --mode dist needs --other");
        const SubspaceTuple w2 = io::subspace_tuple_from_json(io::parse_text(io::read_file(cfg.other)));
        double d = 0.0;
        try {
            d = projection_distance(w, w2);
        } catch (const UsageError& e) {
            throw ParseError(e.what());
        }
        emit(cfg, json_text(io::Json{{"distance", io::number(d)}}), out);
        return kOk;
    }
    if (cfg.mode == "illposed") {
        const double d = distance_to_illposed(w);
        emit(cfg,
             json_text(io::Json{{"distance", io::number(d)},
                                {"n", w.total_dim()},
                                {"N", w.ambient_dim()},
                                {"intersecting", is_intersecting(w, cfg.tol)}}),
             out);
        return kOk;
    }
    if (cfg.mode == "certify") {
        try {
            const IllposedCertificate cert = nearest_intersecting_tuple(w);
            emit(cfg, json_text(io::to_json(cert, input)), out);
            return kOk;
        } catch (const UsageError& e) {
            throw ParseError(e.what());
        } catch (const CertificateError& e) {
            err << "certificate failure: " << e.what() << " (nearest sigma_n " << e.sigma_nearest()
                << ", distance gap " << e.distance_gap() << ")\n";
            return kCertificateFailure;
        }
    }
    throw ParseError("unknown grassmann mode \"" + cfg.mode + "\"");
}

inline std::vector<int> s_values(const RunConfig& cfg, int default_max) {
    if (!cfg.s_list.empty())
        return cfg.s_list;
    const int last = cfg.s_max > 0 ? cfg.s_max : default_max;
    if (cfg.s_min < 1 || last < cfg.s_min)
        throw ParseError("need 1 <= --s-min <= --s-max");
    return s_range(cfg.s_min, last);
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ParseError("cannot write " + path.string());
    f << text;
}

inline int experiment(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.experiment == "paatero" || cfg.experiment == "dsl") {
        const auto s = s_values(cfg, 90);
        const auto kind = cfg.experiment == "paatero" ? SequenceKind::paatero : SequenceKind::desilva_lim;
        emit(cfg, io::sequence_csv(run_sequence(kind, cfg.seed, s.front(), s.back())), out);
        return kOk;
    }
    if (cfg.experiment == "examples") {
        std::vector<std::pair<std::string, ExampleValue>> rows;
        for (int i = 1; i <= 30; ++i)
            rows.emplace_back("cone", example_41_kappa(0.1 * i));
        for (int i = 0; i < 50; ++i)
            rows.emplace_back("noncone", example_42_kappa(1.0 + 0.5 * i));
        for (std::uint64_t k = 1; k <= 6; ++k) {
            std::uint64_t scale = 1;
            for (std::uint64_t j = 0; j < 2 * k; ++j)
                scale *= 10;
            rows.emplace_back("noncone_even", example_42_kappa_lattice(4 * scale));
            rows.emplace_back("noncone_odd", example_42_kappa_lattice(scale + 1));
        }
        emit(cfg, io::examples_csv(rows), out);
        return kOk;
    }
    if (cfg.experiment == "model") {
        ModelParams params;
        params.seed = cfg.seed;
        params.samples = cfg.samples;
        params.s_values = s_values(cfg, 50);
        try {
            params.validate();
        } catch (const UsageError& e) {
            throw ParseError(e.what());
        }
        const ForwardErrorResult res = run_forward_error_experiment(params);
        unsigned regenerations = 0;
        for (const auto& r : res.records)
            regenerations += r.regenerations;
        for (const auto& s : res.summaries)
            if (s.discarded > 0)
                err << "s = " << s.s << ": " << s.discarded << " of " << params.samples
                    << " samples discarded (no convergence)\n";
        if (regenerations > 0)
            err << regenerations << " model draws regenerated after a zero column\n";

        if (cfg.out.empty()) {
            out << io::deciles_csv(res.summaries) << "\n" << io::quartiles_csv(res.summaries);
            return kOk;
        }
        const std::filesystem::path dir(cfg.out);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec)
            throw ParseError("cannot create " + dir.string());
        write_file(dir / "deciles.csv", io::deciles_csv(res.summaries));
        write_file(dir / "quartiles.csv", io::quartiles_csv(res.summaries));
        write_file(dir / "records.csv", io::records_csv(res.records));
        return kOk;
    }
    throw ParseError("unknown experiment \"" + cfg.experiment + "\" (model, paatero, dsl, examples)");
}

} // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Condition numbers of join decompositions (CPD, Waring, subspace tuples)", "joincond"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "input JSON file");
        sub->add_option("--out", cfg.out, "output file (directory for the model experiment)");
    };
    auto add_format = [&](CLI::App* sub) {
        sub->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    };

    auto* cpd = app.add_subcommand("cond-cpd", "condition number of a CPD");
    add_common(cpd);
    add_format(cpd);
    cpd->add_option("--factors", cfg.factors, "factor matrices as headerless CSV, one file per mode");

    auto* waring = app.add_subcommand("cond-waring", "condition number of a Waring decomposition");
    add_common(waring);
    add_format(waring);

    auto* gr = app.add_subcommand("grassmann", "distances on products of Grassmannians");
    add_common(gr);
    gr->add_option("--other", cfg.other, "second subspace tuple for --mode dist");
    gr->add_option("--mode", cfg.mode, "dist, illposed or certify")
        ->check(CLI::IsMember({"dist", "illposed", "certify"}));
    gr->add_option("--tol", cfg.tol, "tolerance for the intersecting test");

    auto* ex = app.add_subcommand("experiment", "run a numerical experiment, CSV output");
    ex->add_option("name", cfg.experiment, "model, paatero, dsl or examples")->required();
    ex->add_option("--out", cfg.out, "output file (directory for model)");
    ex->add_option("--seed", cfg.seed, "base seed");
    ex->add_option("--samples", cfg.samples, "samples per s (model)");
    ex->add_option("--s-min", cfg.s_min, "first s");
    ex->add_option("--s-max", cfg.s_max, "last s");
    ex->add_option("--s-list", cfg.s_list, "explicit list of s values (overrides range)")->delimiter(',');
    ex->add_option("--format", cfg.format, "csv")->check(CLI::IsMember({"csv"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "joincond: " << e.what() << "\n";
        return kInputError;
    }

    try {
        if (cpd->parsed())
            return detail::cond_cpd(cfg, out, err);
        if (waring->parsed())
            return detail::cond_waring(cfg, out, err);
        if (gr->parsed())
            return detail::grassmann(cfg, out, err);
        return detail::experiment(cfg, out, err);
    } catch (const ParseError& e) {
        err << "joincond: " << e.what() << "\n";
        return kInputError;
    } catch (const Error& e) {
        err << "joincond: " << e.what() << "\n";
        return kInputError;
    }
}

} // namespace joincond::cli
