#pragma once

// JSON and CSV forms of the library types. Infinity is written as the
// string "inf" since JSON has no representation for it.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "joincond/condition.hpp"
#include "joincond/errors.hpp"
#include "joincond/experiments.hpp"
#include "joincond/grassmann.hpp"
#include "joincond/tensor.hpp"
#include "joincond/waring.hpp"

namespace joincond::io {

using Json = nlohmann::json;

inline Json number(double x) {
    if (std::isinf(x))
        return x > 0 ? Json("inf") : Json("-inf");
    if (std::isnan(x))
        return Json("nan");
    return Json(x);
}

inline Json to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(number(v[i]));
    return out;
}

namespace detail {

template <class T>
T get(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw ParseError(std::string("missing field \"") + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad field \"") + key + "\": " + e.what());
    }
}

inline double get_double(const Json& j) {
    if (j.is_number())
        return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
    }
    throw ParseError("expected a number");
}

inline Vector get_vector(const Json& j) {
    if (!j.is_array())
        throw ParseError("expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = get_double(j[i]);
    return v;
}

inline const Json& get_array(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_array())
        throw ParseError(std::string("missing array \"") + key + "\"");
    return j.at(key);
}

} // namespace detail

inline Json parse_text(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- DenseTensor ----------------------------------------------------------------

inline Json to_json(const DenseTensor& t) {
    return Json{{"dims", t.shape().dims()}, {"data", to_json(t.data())}};
}

inline DenseTensor dense_tensor_from_json(const Json& j) {
    Shape shape(detail::get<std::vector<std::size_t>>(j, "dims"));
    Vector data = detail::get_vector(detail::get_array(j, "data"));
    if (static_cast<std::size_t>(data.size()) != shape.size())
        throw ParseError("tensor data length does not match dims");
    return DenseTensor(std::move(shape), std::move(data));
}

// --- CPDecomposition -------------------------------------------------------------

inline Json to_json(const CPDecomposition& d) {
    Json terms = Json::array();
    for (const auto& t : d.terms()) {
        Json vecs = Json::array();
        for (const auto& v : t.vectors())
            vecs.push_back(to_json(v));
        terms.push_back(Json{{"mu", number(t.mu())}, {"vectors", vecs}});
    }
    return Json{{"dims", d.shape().dims()}, {"terms", terms}};
}

/// Vectors need not be unit in the input; every term is renormalized to
/// (mu * prod ||v_k||, v_k / ||v_k||).
inline CPDecomposition cpd_from_json(const Json& j) {
    const auto dims = detail::get<std::vector<std::size_t>>(j, "dims");
    const Json& terms = detail::get_array(j, "terms");
    if (dims.empty() || terms.empty())
        throw ParseError("decomposition needs dims and at least one term");
    std::vector<Matrix> factors;
    for (std::size_t m : dims)
        factors.emplace_back(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double mu = detail::get_double(detail::get<Json>(terms[i], "mu"));
        const Json& vecs = detail::get_array(terms[i], "vectors");
        if (vecs.size() != dims.size())
            throw ParseError("term has the wrong number of vectors");
        if (!(mu > 0.0) || !std::isfinite(mu))
            throw ParseError("term scale mu must be positive and finite");
        for (std::size_t k = 0; k < dims.size(); ++k) {
            Vector v = detail::get_vector(vecs[k]);
            if (static_cast<std::size_t>(v.size()) != dims[k])
                throw ParseError("term vector length does not match dims");
            factors[k].col(static_cast<Eigen::Index>(i)) = k == 0 ? Vector(mu * v) : v;
        }
    }
    try {
        return normalize_decomposition(factors);
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
}

// --- WaringDecomposition --------------------------------------------------------

inline Json to_json(const WaringDecomposition& d) {
    Json terms = Json::array();
    for (const auto& t : d.terms())
        terms.push_back(Json{{"mu", number(t.mu())}, {"vector", to_json(t.vector())}});
    return Json{{"m", d.dim()}, {"d", d.order()}, {"terms", terms}};
}

/// Vectors are renormalized; mu absorbs ||v||^d and keeps its sign.
inline WaringDecomposition waring_from_json(const Json& j) {
    const auto m = detail::get<std::size_t>(j, "m");
    const auto d = detail::get<std::size_t>(j, "d");
    const Json& terms = detail::get_array(j, "terms");
    std::vector<SymmetricRankOneTerm> out;
    try {
        for (const auto& t : terms) {
            double mu = detail::get_double(detail::get<Json>(t, "mu"));
            Vector v = detail::get_vector(detail::get_array(t, "vector"));
            if (static_cast<std::size_t>(v.size()) != m)
                throw ParseError("symmetric term vector length does not match m");
            const double nrm = v.norm();
            if (!(nrm > 0.0))
                throw ParseError("degenerate term");
            mu *= std::pow(nrm, static_cast<double>(d));
            out.emplace_back(mu, v / nrm);
        }
        return WaringDecomposition(m, d, std::move(out));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
}

// --- ConditionReport --------------------------------------------------------------

inline Json to_json(const ConditionReport& r) {
    return Json{{"sigma_min", number(r.sigma_min)}, {"kappa", number(r.kappa)},
                {"n", r.n},
                {"N", r.N},
                {"well_posed", r.well_posed},
                {"least_vector", to_json(r.least_vector)}};
}

// --- SubspaceTuple --------------------------------------------------------------

inline Json to_json(const SubspaceTuple& w) {
    Json blocks = Json::array();
    for (const auto& b : w.bases()) {
        Json cols = Json::array();
        for (Eigen::Index j = 0; j < b.cols(); ++j)
            cols.push_back(to_json(Vector(b.col(j))));
        blocks.push_back(cols);
    }
    return Json{{"N", w.ambient_dim()}, {"blocks", blocks}};
}

inline SubspaceTuple subspace_tuple_from_json(const Json& j) {
    const auto n = detail::get<std::size_t>(j, "N");
    const Json& blocks = detail::get_array(j, "blocks");
    std::vector<Matrix> bases;
    for (const auto& blk : blocks) {
        if (!blk.is_array() || blk.empty())
            throw ParseError("subspace block must be a nonempty list of columns");
        Matrix b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(blk.size()));
        for (std::size_t c = 0; c < blk.size(); ++c) {
            Vector col = detail::get_vector(blk[c]);
            if (static_cast<std::size_t>(col.size()) != n)
                throw ParseError("subspace column length does not match N");
            b.col(static_cast<Eigen::Index>(c)) = col;
        }
        bases.push_back(std::move(b));
    }
    try {
        return SubspaceTuple(n, std::move(bases));
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << x;
    return ss.str();
}

inline Json to_json(const IllposedCertificate& c, const Json& input) {
    Json dirs = Json::array();
    for (const auto& v : c.witness_directions)
        dirs.push_back(to_json(v));
    return Json{{"input_hash", hex64(fnv1a(input.dump()))},
                {"distance", number(c.distance)},
                {"sigma_n", number(c.sigma_n)},
                {"diagnostics",
                 Json{{"nearest_sigma_n", number(c.nearest_sigma_n)},
                      {"distance_gap", number(std::abs(c.distance - c.sigma_n))}}},
                {"witness_directions", dirs},
                {"nearest", to_json(c.nearest)}};
}

// --- CSV ------------------------------------------------------------------------

/// Headerless comma-separated matrix, C-locale floats; rows may end in CR.
inline Matrix parse_csv_matrix(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.remove_suffix(1);
        if (line.empty())
            continue;
        std::vector<double> row;
        std::size_t at = 0;
        while (true) {
            std::size_t comma = line.find(',', at);
            std::string_view field = line.substr(at, comma == std::string_view::npos ? line.size() - at : comma - at);
            while (!field.empty() && field.front() == ' ')
                field.remove_prefix(1);
            while (!field.empty() && field.back() == ' ')
                field.remove_suffix(1);
            if (!field.empty() && field.front() == '+')
                field.remove_prefix(1);
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
            if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
                throw ParseError("bad number in CSV: \"" + std::string(field) + "\"");
            row.push_back(value);
            if (comma == std::string_view::npos)
                break;
            at = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("CSV rows differ in length");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw ParseError("empty CSV matrix");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

/// Shortest round-trip decimal form.
inline std::string format_double(double x) {
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    if (std::isnan(x))
        return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

inline std::string format_csv_matrix(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0)
                out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

// --- Experiment tables ----------------------------------------------------------

inline std::string sequence_csv(const std::vector<SequencePoint>& points) {
    std::string out = "s,kappa,max_term_norm\n";
    for (const auto& p : points)
        out += std::to_string(p.s) + ',' + format_double(p.kappa) + ',' + format_double(p.max_term_norm) + '\n';
    return out;
}

inline std::string deciles_csv(const std::vector<ExperimentSummary>& summaries) {
    std::string out = "s";
    for (int q = 1; q <= 9; ++q)
        out += ",decile_" + std::to_string(q);
    out += '\n';
    for (const auto& s : summaries) {
        out += std::to_string(s.s);
        for (double x : s.scaling_deciles)
            out += ',' + format_double(x);
        out += '\n';
    }
    return out;
}

inline std::string quartiles_csv(const std::vector<ExperimentSummary>& summaries) {
    std::string out = "s,q1,median,q3\n";
    for (const auto& s : summaries) {
        out += std::to_string(s.s);
        for (double x : s.kappa_quartiles)
            out += ',' + format_double(x);
        out += '\n';
    }
    return out;
}

inline std::string records_csv(const std::vector<ExperimentRecord>& records) {
    std::string out = "s,sample,backward_error,forward_error,kappa,scaling,converged,iterations\n";
    for (const auto& r : records)
        out += std::to_string(r.s) + ',' + std::to_string(r.sample) + ',' + format_double(r.backward_error) + ',' +
               format_double(r.forward_error) + ',' + format_double(r.kappa) + ',' + format_double(r.scaling) + ',' +
               (r.converged ? "1" : "0") + ',' + std::to_string(r.iterations) + '\n';
    return out;
}

inline std::string examples_csv(const std::vector<std::pair<std::string, ExampleValue>>& rows) {
    std::string out = "curve,t,kappa_engine,kappa_analytic\n";
    for (const auto& [name, v] : rows)
        out += name + ',' + format_double(v.t) + ',' + format_double(v.kappa_engine) + ',' +
               format_double(v.kappa_analytic) + '\n';
    return out;
}

} // namespace joincond::io
