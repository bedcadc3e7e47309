#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace bintabl {

class Rng;

/// Dense row-major matrix of doubles.
///
/// Every layer in the library works on these: input windows (features x
/// events), weights, and column vectors for per-mode parameters. A
/// default-constructed matrix is 0x0 and only serves as a placeholder.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape() const;

    void fill(double value);

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// Throws ShapeError naming both shapes unless a and b have equal shape.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

// Products. Each (i,j) entry accumulates its k-terms in ascending k starting
// from zero, the same order as a naive triple loop, so results are
// bit-reproducible.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// out += a·b
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out += aᵀ·b
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out += a·bᵀ
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out);

Matrix transpose(const Matrix& m);
Matrix hadamard(const Matrix& a, const Matrix& b);
double sum(const Matrix& m);
/// Frobenius inner product.
double dot(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

/// Softmax of each row, with the row maximum subtracted first.
Matrix row_softmax(const Matrix& m);

// Population statistics (divide by the count, not count - 1).
std::vector<double> row_mean(const Matrix& m);
std::vector<double> row_std(const Matrix& m);
std::vector<double> col_mean(const Matrix& m);
std::vector<double> col_std(const Matrix& m);

/// Uniform in ±sqrt(6 / (rows + cols)).
Matrix glorot_uniform(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace bintabl
