#pragma once

// Seeded random streams for the experiments.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
// Uniforms take the top 53 bits of one draw. Normals use the Box-Muller
// transform on two uniforms and return both variates in order (cos branch
// first), so a stream is reproducible wherever the engine and libm agree.
// Independent streams are split off a base seed with SplitMix64.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>

#include <random>

#include "joincond/tensor.hpp"

namespace joincond {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of sub-stream `stream`: base XOR splitmix64(stream).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) { return base ^ splitmix64(stream); }

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (spare_) {
            const double z = *spare_;
            spare_.reset();
            return z;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        return radius * std::cos(angle);
    }

    /// i.i.d. N(0,1) entries, filled column by column.
    Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Matrix out(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                out(i, j) = normal();
        return out;
    }

    Vector normal_vector(Eigen::Index size) { return normal_matrix(size, 1).col(0); }

    Vector unit_vector(Eigen::Index size) {
        Vector v = normal_vector(size);
        return v / v.norm();
    }

    /// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
    Matrix orthogonal_matrix(Eigen::Index size) {
        const Matrix g = normal_matrix(size, size);
        Eigen::HouseholderQR<Matrix> qr(g);
        Matrix q = qr.householderQ();
        const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < size; ++j)
            if (r(j, j) < 0.0)
                q.col(j) *= -1.0;
        return q;
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

} // namespace joincond
