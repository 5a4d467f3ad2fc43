// Condition number of a small CPD read from JSON, with the nearest
// ill-posed configuration of its tangent spaces.
//
//   cond_example samples/two_terms.json

#include <cstdio>
#include <exception>

#include "joincond/io.hpp"
#include "joincond/joincond.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s DECOMPOSITION.json\n", argv[0]);
        return 2;
    }
    try {
        using namespace joincond;
        const CPDecomposition d = io::cpd_from_json(io::parse_text(io::read_file(argv[1])));
        const ConditionReport rep = cpd_condition_number(d);
        std::printf("rank %zu, n = %zu, N = %zu\n", d.rank(), rep.n, rep.N);
        std::printf("kappa = %.6g\n", rep.kappa);
        const auto relative = cpd_relative_condition_numbers(d);
        for (std::size_t i = 0; i < relative.size(); ++i)
            std::printf("  term %zu: mu = %.6g, relative kappa = %.6g\n", i, d.term(i).mu(), relative[i]);
        if (!rep.well_posed || d.rank() < 2)
            return 0;

        const IllposedCertificate cert = nearest_intersecting_tuple(SubspaceTuple(cpd_tangent_tuple(d)));
        std::printf("distance of the tangent spaces to the ill-posed locus: %.6g (= 1/kappa)\n", cert.distance);
        std::printf("sigma_n after moving them there: %.3g\n", cert.nearest_sigma_n);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    return 0;
}
