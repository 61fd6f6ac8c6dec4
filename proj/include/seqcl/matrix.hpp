#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace seqcl {

/// Dense row-major matrix of doubles. The only numeric container in the
/// simulator; shapes stay desk-scale so everything is stored eagerly and
/// copied by value. All accumulation happens in double.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;
    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product a*b; throws ShapeError on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// aT*b without forming the transpose; a is k x m, b is k x n, result m x n.
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);

/// a*bT; a is m x k, b is n x k, result m x n.
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);

} // namespace seqcl
