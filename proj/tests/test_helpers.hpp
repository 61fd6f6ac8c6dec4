#pragma once

#include <cmath>
#include <vector>

#include "seqcl/matrix.hpp"
#include "seqcl/model.hpp"
#include "seqcl/rng.hpp"

namespace seqcl::testing {

// Independent determinant oracle: plain cofactor expansion. Exponential in
// n, used only for n <= 8, and deliberately shares nothing with the
// Cholesky path it checks.
inline double det_cofactor(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n == 1) return m(0, 0);
    if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double det = 0.0;
    double sign = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        Matrix minor(n - 1, n - 1);
        for (std::size_t r = 1; r < n; ++r) {
            std::size_t cc = 0;
            for (std::size_t c = 0; c < n; ++c) {
                if (c == j) continue;
                minor(r - 1, cc++) = m(r, c);
            }
        }
        det += sign * m(0, j) * det_cofactor(minor);
        sign = -sign;
    }
    return det;
}

inline Matrix random_psd(std::size_t n, RngStream& stream) {
    const Matrix a = rand_normal(stream, n, n, 0.0, 1.0);
    return matmul_transpose_a(a, a);
}

// Small model with every parameter overwritten by the caller-provided flat
// vector (canonical order), for hand-computed fixtures.
inline Model make_model(const ModelConfig& config, const std::vector<double>& flat) {
    Model m = init_model(config, 0);
    unflatten_params(m, flat);
    return m;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Scaled error used by the gradient checks: |a-b| relative to the larger
// magnitude, floored at 1 so near-zero gradients compare absolutely.
inline double scaled_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace seqcl::testing
