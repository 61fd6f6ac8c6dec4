#include "seqcl/matrix.hpp"

#include <cmath>
#include <string>

#include "seqcl/errors.hpp"

namespace seqcl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double value)
    : rows_(rows), cols_(cols), data_(rows * cols, value) {}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("from_rows: ragged row lengths");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

void check_inner(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string(what) + ": inner dimensions " + std::to_string(a) +
                         " vs " + std::to_string(b));
    }
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.rows(), "matmul");
    Matrix out(a.rows(), b.cols(), 0.0);
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* dst = out.data().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* src = b.data().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    check_inner(a.rows(), b.rows(), "matmul_transpose_a");
    Matrix out(a.cols(), b.cols(), 0.0);
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.data().data() + k * a.cols();
        const double* brow = b.data().data() + k * n;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* dst = out.data().data() + i * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.cols(), "matmul_transpose_b");
    Matrix out(a.rows(), b.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.data().data() + i * a.cols();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.data().data() + j * b.cols();
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            out(i, j) = acc;
        }
    }
    return out;
}

} // namespace seqcl
