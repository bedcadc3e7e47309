#pragma once

// Reference implementations used only by the tests. They are written
// independently of the library: plain loops, no shared helpers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bintabl/matrix.hpp"
#include "bintabl/metrics.hpp"
#include "bintabl/rng.hpp"

namespace oracle {

using bintabl::Matrix;

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

inline double pop_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double pop_std(const std::vector<double>& v) {
    const double m = pop_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

inline std::vector<double> row_of(const Matrix& m, std::size_t r) {
    std::vector<double> v;
    for (std::size_t c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
}

inline std::vector<double> col_of(const Matrix& m, std::size_t c) {
    std::vector<double> v;
    for (std::size_t r = 0; r < m.rows(); ++r) v.push_back(m(r, c));
    return v;
}

/// Central differences of a scalar function of the entries of `x`.
inline Matrix numeric_grad(const std::function<double()>& f, Matrix& x, double h = 1e-5) {
    Matrix g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max |a - n| / max(|a|, |n|, floor) over all entries.
inline double max_rel_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-3) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i];
        const double n = numeric[i];
        worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
    }
    return worst;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

inline Matrix random_matrix(bintabl::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = scale * rng.normal();
    return m;
}

/// Non-degenerate sample: per-row offset and spread.
inline Matrix random_sample(bintabl::Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t a = 0; a < r; ++a) {
        const double offset = rng.uniform(-3.0, 3.0);
        const double spread = rng.uniform(0.5, 2.0);
        for (std::size_t b = 0; b < c; ++b) m(a, b) = offset + spread * rng.normal();
    }
    return m;
}

inline double frobenius(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Precision / recall / F1 from expanded (truth, prediction) pairs, in percent.
struct BruteMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline BruteMetrics brute_metrics(const bintabl::Confusion& c) {
    std::vector<int> truth, pred;
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p)
            for (std::int64_t k = 0; k < c[t][p]; ++k) {
                truth.push_back(t);
                pred.push_back(p);
            }
    BruteMetrics m;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
    m.accuracy = truth.empty() ? 0.0
                              : static_cast<double>(correct) / static_cast<double>(truth.size()) * 100.0;
    double ps = 0.0, rs = 0.0, fs = 0.0;
    for (int k = 0; k < 3; ++k) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (pred[i] == k && truth[i] == k) ++tp;
            else if (pred[i] == k) ++fp;
            else if (truth[i] == k) ++fn;
        }
        const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        ps += p;
        rs += r;
        fs += f;
    }
    m.precision = ps / 3.0 * 100.0;
    m.recall = rs / 3.0 * 100.0;
    m.f1 = fs / 3.0 * 100.0;
    return m;
}

}  // namespace oracle
