#include "seqcl/linalg.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "seqcl/errors.hpp"

namespace seqcl {

namespace {

// In-place lower Cholesky on a copy; returns log det on success.
std::optional<double> cholesky_log_det(const Matrix& k, double jitter) {
    const std::size_t n = k.rows();
    Matrix a = k;
    if (jitter != 0.0) {
        for (std::size_t i = 0; i < n; ++i) a(i, i) += jitter;
    }
    double log_det = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t p = 0; p < j; ++p) d -= a(j, p) * a(j, p);
        if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        log_det += 2.0 * std::log(ljj);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= a(i, p) * a(j, p);
            a(i, j) = s / ljj;
        }
    }
    return log_det;
}

} // namespace

double log_det_psd(const Matrix& k, double jitter) {
    if (k.rows() != k.cols()) {
        throw ShapeError("log_det_psd: matrix is " + std::to_string(k.rows()) + "x" +
                         std::to_string(k.cols()) + ", expected square");
    }
    if (jitter < 0.0) throw DomainError("log_det_psd: jitter must be >= 0");

    const std::size_t n = k.rows();
    double max_abs = 0.0;
    double diag_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diag_sum += std::abs(k(i, i));
        for (std::size_t j = 0; j < n; ++j) max_abs = std::max(max_abs, std::abs(k(i, j)));
    }
    const double sym_tol = 1e-9 * std::max(1.0, max_abs);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(k(i, j) - k(j, i)) > sym_tol) {
                throw ShapeError("log_det_psd: matrix not symmetric within tolerance");
            }
        }
    }
    if (n == 0) return 0.0;

    // Ladder: the caller's jitter first, then escalating multiples. A zero
    // request still gets one exact attempt before the default base kicks in.
    std::vector<double> ladder;
    if (jitter > 0.0) {
        ladder = {jitter, 10.0 * jitter, 100.0 * jitter, 1000.0 * jitter};
    } else {
        double base = 1e-6 * (diag_sum / static_cast<double>(n));
        if (!(base > 0.0)) base = 1e-12;
        ladder = {0.0, base, 10.0 * base, 100.0 * base, 1000.0 * base};
    }

    for (double j : ladder) {
        if (auto r = cholesky_log_det(k, j)) return *r;
    }
    throw SingularError("log_det_psd: factorization failed for every jitter in the ladder",
                        ladder);
}

} // namespace seqcl
