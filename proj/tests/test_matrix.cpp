#include <doctest.h>

#include <cmath>

#include "bintabl/error.hpp"
#include "bintabl/matrix.hpp"
#include "bintabl/rng.hpp"
#include "oracles.hpp"

using namespace bintabl;

TEST_CASE("matmul: identity leaves a matrix unchanged") {
    const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    CHECK(matmul(Matrix::identity(3), m) == m);
}

TEST_CASE("matmul: hand-computed 2x2 by 2x1 product") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{5}, {6}});
    CHECK(matmul(a, b) == Matrix::from_rows({{17}, {39}}));
}

TEST_CASE("matmul: mismatched inner dimension names both shapes") {
    const Matrix a(2, 3), b(2, 3);
    try {
        (void)matmul(a, b);
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        const std::string what = e.what();
        CHECK(what.find("2x3") != std::string::npos);
    }
}

TEST_CASE("matmul variants match the naive triple loop bit for bit") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + rng.below(7), k = 1 + rng.below(9), n = 1 + rng.below(6),
                          p = 1 + rng.below(5);
        const Matrix a = oracle::random_matrix(rng, m, k);
        const Matrix b = oracle::random_matrix(rng, k, n);
        const Matrix c = oracle::random_matrix(rng, n, p);
        CHECK(matmul(a, b) == oracle::naive_matmul(a, b));
        CHECK(matmul(matmul(a, b), c) == oracle::naive_matmul(oracle::naive_matmul(a, b), c));
        CHECK(matmul_tn(transpose(a), b) == oracle::naive_matmul(a, b));
        CHECK(matmul_nt(a, transpose(b)) == oracle::naive_matmul(a, b));

        Matrix acc(m, n);
        matmul_acc(a, b, acc);
        CHECK(acc == oracle::naive_matmul(a, b));
    }
}

TEST_CASE("row_softmax: closed forms and stability") {
    const Matrix u = row_softmax(Matrix::from_rows({{0, 0, 0}}));
    for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const Matrix big = row_softmax(Matrix::from_rows({{1000, 1000}}));
    CHECK(big(0, 0) == 0.5);
    CHECK(big(0, 1) == 0.5);

    const Matrix q = row_softmax(Matrix::from_rows({{0, std::log(3.0)}}));
    CHECK(std::abs(q(0, 0) - 0.25) < 1e-15);
    CHECK(std::abs(q(0, 1) - 0.75) < 1e-15);
}

TEST_CASE("row_softmax: rows sum to one and ignore per-row shifts") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix m = oracle::random_matrix(rng, 1 + rng.below(5), 1 + rng.below(12), 5.0);
        const Matrix s = row_softmax(m);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double total = 0.0;
            for (double v : s.row(r)) total += v;
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
        Matrix shifted = m;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double c = rng.uniform(-50.0, 50.0);
            for (double& v : shifted.row(r)) v += c;
        }
        CHECK(oracle::max_abs_diff(row_softmax(shifted), s) < 1e-12);
    }
}

TEST_CASE("population statistics") {
    const Matrix m = Matrix::from_rows({{1, 2, 3}});
    CHECK(row_mean(m)[0] == 2.0);
    CHECK(std::abs(row_std(m)[0] - std::sqrt(2.0 / 3.0)) < 1e-15);
    const Matrix constant = Matrix::from_rows({{4, 1}, {4, 2}, {4, 3}});
    CHECK(col_std(constant)[0] == 0.0);
    CHECK(col_mean(constant)[1] == 2.0);
}

TEST_CASE("row_std squared times T equals the sum of squared deviations") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix m = oracle::random_matrix(rng, 1 + rng.below(6), 2 + rng.below(15), 3.0);
        const auto sd = row_std(m);
        const auto mu = row_mean(m);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double ss = 0.0;
            for (double v : m.row(r)) ss += (v - mu[r]) * (v - mu[r]);
            const double lhs = sd[r] * sd[r] * static_cast<double>(m.cols());
            CHECK(std::abs(lhs - ss) <= 1e-10 * ss);
        }
        const auto csd = col_std(m);
        for (std::size_t c = 0; c < m.cols(); ++c)
            CHECK(std::abs(csd[c] - oracle::pop_std(oracle::col_of(m, c))) < 1e-12);
    }
}

TEST_CASE("glorot_uniform: deterministic, bounded, centred") {
    Rng a(99), b(99);
    CHECK(glorot_uniform(a, 7, 5) == glorot_uniform(b, 7, 5));

    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = glorot_uniform(r, 1, 1)(0, 0);
        CHECK(std::abs(v) <= std::sqrt(3.0));
    }

    // Mean of 1e5 draws: within 3 standard errors of 0.
    Rng big(2);
    const Matrix m = glorot_uniform(big, 250, 400);
    double total = 0.0;
    for (double v : m.values()) total += v;
    const double limit = std::sqrt(6.0 / 650.0);
    const double sigma = limit / std::sqrt(3.0);
    CHECK(std::abs(total / 1e5) < 3.0 * sigma / std::sqrt(1e5));
}

TEST_CASE("public operations keep finite inputs finite") {
    Rng rng(8);
    const Matrix a = oracle::random_matrix(rng, 4, 6, 10.0);
    const Matrix b = oracle::random_matrix(rng, 6, 3, 10.0);
    CHECK(all_finite(matmul(a, b)));
    CHECK(all_finite(row_softmax(a * 100.0)));
    CHECK(all_finite(hadamard(a, a)));
    Matrix bad = a;
    bad[3] = NAN;
    CHECK_FALSE(all_finite(bad));
}
