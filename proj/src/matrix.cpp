#include "bintabl/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "bintabl/error.hpp"
#include "bintabl/rng.hpp"

namespace bintabl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix " + shape() + " given " + std::to_string(data_.size()) +
                         " values");
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }
}

namespace {

void check_product(const Matrix& a, const Matrix& b, std::size_t a_inner, std::size_t b_inner,
                   const char* what) {
    if (a_inner != b_inner) {
        throw ShapeError(std::string(what) + ": cannot multiply " + a.shape() + " by " +
                         b.shape());
    }
}

void check_out(const Matrix& out, std::size_t rows, std::size_t cols, const char* what) {
    if (out.rows() != rows || out.cols() != cols) {
        throw ShapeError(std::string(what) + ": output is " + out.shape() + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    check_product(a, b, a.cols(), b.rows(), "matmul");
    check_out(out, a.rows(), b.cols(), "matmul");
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* c = out.row(i).data();
        const double* arow = a.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) c[j] += aik * brow[j];
        }
    }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    check_product(a, b, a.rows(), b.rows(), "matmul_tn");
    check_out(out, a.cols(), b.cols(), "matmul_tn");
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row(k).data();
        const double* brow = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            double* c = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) c[j] += aki * brow[j];
        }
    }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    check_product(a, b, a.cols(), b.cols(), "matmul_nt");
    check_out(out, a.rows(), b.rows(), "matmul_nt");
    const std::size_t inner = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i).data();
        double* c = out.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j).data();
            double s = 0.0;
            for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
            c[j] += s;
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_product(a, b, a.cols(), b.rows(), "matmul");
    Matrix out(a.rows(), b.cols());
    matmul_acc(a, b, out);
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_product(a, b, a.rows(), b.rows(), "matmul_tn");
    Matrix out(a.cols(), b.cols());
    matmul_tn_acc(a, b, out);
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_product(a, b, a.cols(), b.cols(), "matmul_nt");
    Matrix out(a.rows(), b.rows());
    matmul_nt_acc(a, b, out);
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

double sum(const Matrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v;
    return s;
}

double dot(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.values().begin(), m.values().end(),
                       [](double v) { return std::isfinite(v); });
}

Matrix row_softmax(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto in = m.row(r);
        auto o = out.row(r);
        const double peak = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            o[c] = std::exp(in[c] - peak);
            total += o[c];
        }
        for (double& v : o) v /= total;
    }
    return out;
}

std::vector<double> row_mean(const Matrix& m) {
    std::vector<double> out(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (double v : m.row(r)) s += v;
        out[r] = s / static_cast<double>(m.cols());
    }
    return out;
}

std::vector<double> row_std(const Matrix& m) {
    const auto mean = row_mean(m);
    std::vector<double> out(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (double v : m.row(r)) s += (v - mean[r]) * (v - mean[r]);
        out[r] = std::sqrt(s / static_cast<double>(m.cols()));
    }
    return out;
}

std::vector<double> col_mean(const Matrix& m) {
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c);
    for (double& v : out) v /= static_cast<double>(m.rows());
    return out;
}

std::vector<double> col_std(const Matrix& m) {
    const auto mean = col_mean(m);
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const double d = m(r, c) - mean[c];
            out[c] += d * d;
        }
    for (double& v : out) v = std::sqrt(v / static_cast<double>(m.rows()));
    return out;
}

Matrix glorot_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(-limit, limit);
    return m;
}

}  // namespace bintabl
