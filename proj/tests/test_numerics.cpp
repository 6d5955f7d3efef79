#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "imda/errors.hpp"
#include "imda/numerics.hpp"

using namespace imda;

TEST_CASE("l2_normalize basic cases") {
    const Vec a = l2_normalize(Vec{3.0, 4.0});
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(a[1] == doctest::Approx(0.8));

    const Vec zero = l2_normalize(Vec{0.0, 0.0});
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);

    const Vec quarter = l2_normalize(Vec{1.0, 1.0, 1.0, 1.0});
    for (double v : quarter) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("l2_normalize is idempotent and scale-invariant") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> scale_dist(0.1, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vec v(5);
        for (double& x : v) x = normal(rng);
        const Vec once = l2_normalize(v);
        const Vec twice = l2_normalize(once);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::fabs(once[i] - twice[i]) < 1e-12);
        }
        const double s = scale_dist(rng);
        Vec scaled = v;
        for (double& x : scaled) x *= s;
        const Vec from_scaled = l2_normalize(scaled);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::fabs(once[i] - from_scaled[i]) < 1e-12);
        }
    }
}

TEST_CASE("softmax_temp equal scores give the uniform distribution") {
    for (double beta : {0.05, 0.3, 1.0}) {
        const Vec p = softmax_temp(Vec{2.5, 2.5, 2.5}, beta);
        for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax_temp matches direct evaluation") {
    const Vec p = softmax_temp(Vec{1.0, 0.0}, 1.0);
    const double e = std::exp(1.0);
    CHECK(p[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));

    // sharp temperature: p0 = 1 - exp(-20)/(1 + exp(-20))
    const Vec sharp = softmax_temp(Vec{1.0, 0.0}, 0.05);
    const double tail = std::exp(-20.0) / (1.0 + std::exp(-20.0));
    CHECK(sharp[1] == doctest::Approx(tail).epsilon(1e-10));
    CHECK(sharp[0] == doctest::Approx(1.0 - 2.061e-9).epsilon(1e-3));
    CHECK(std::isfinite(sharp[0]));
}

TEST_CASE("softmax_temp properties: sums to one, shift invariance, range") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 60; ++trial) {
        Vec s(1 + trial % 9);
        for (double& x : s) x = normal(rng);
        const double beta = (trial % 3 == 0) ? 0.05 : (trial % 3 == 1 ? 0.5 : 1.0);
        const Vec p = softmax_temp(s, beta);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);

        Vec shifted = s;
        for (double& x : shifted) x += 7.25;
        const Vec q = softmax_temp(shifted, beta);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::fabs(p[i] - q[i]) < 1e-10);
    }
}

TEST_CASE("softmax_temp rejects non-positive beta") {
    CHECK_THROWS_AS(softmax_temp(Vec{1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_temp(Vec{1.0}, -0.5), std::invalid_argument);
}

TEST_CASE("relu, concat_cols and matmul basics") {
    const Matrix r = relu(Matrix{{-1.0, 2.0}});
    CHECK(r(0, 0) == 0.0);
    CHECK(r(0, 1) == 2.0);

    const Matrix c = concat_cols(Matrix{{1.0}}, Matrix{{2.0}});
    CHECK(c.rows == 1);
    CHECK(c.cols == 2);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(0, 1) == 2.0);

    const Matrix m = matmul(Matrix::identity(2), Matrix{{3.0, 4.0}, {5.0, 6.0}});
    CHECK(m(0, 0) == 3.0);
    CHECK(m(0, 1) == 4.0);
    CHECK(m(1, 0) == 5.0);
    CHECK(m(1, 1) == 6.0);

    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(4, 2)), ShapeError);
    CHECK_THROWS_AS(concat_cols(Matrix(2, 1), Matrix(3, 1)), ShapeError);
}

TEST_CASE("matmul agrees with a naive triple loop") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(4, 6), b(6, 3);
    for (double& v : a.data) v = normal(rng);
    for (double& v : b.data) v = normal(rng);
    const Matrix c = matmul(a, b);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double expect = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) expect += a(i, k) * b(k, j);
            CHECK(c(i, j) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("sgd_step") {
    const Matrix one_step = sgd_step(Matrix{{1.0}}, Matrix{{2.0}}, 0.5);
    CHECK(one_step(0, 0) == 0.0);

    const Matrix unchanged = sgd_step(Matrix{{1.0, -2.0}}, Matrix(1, 2), 0.3);
    CHECK(unchanged(0, 0) == 1.0);
    CHECK(unchanged(0, 1) == -2.0);

    const Matrix stepped = sgd_step(Matrix{{1.0, 2.0}}, Matrix{{0.1, -0.1}}, 0.1);
    CHECK(stepped(0, 0) == doctest::Approx(0.99));
    CHECK(stepped(0, 1) == doctest::Approx(2.01));

    CHECK_THROWS_AS(sgd_step(Matrix(1, 2), Matrix(2, 1), 0.1), ShapeError);
}

TEST_CASE("finite_diff_check accepts correct gradients") {
    // f(x) = 0.5 ||x||^2, grad = x
    Matrix point{{0.7, -1.2}, {2.0, 0.1}};
    const auto quad = [](const Matrix& m) {
        double s = 0.0;
        for (double v : m.data) s += 0.5 * v * v;
        return s;
    };
    const GradCheckReport r = finite_diff_check(quad, point, point, 1e-5, 1e-6);
    CHECK(r.passed);
    CHECK(r.max_relative_error < 1e-6);

    const auto constant = [](const Matrix&) { return 3.5; };
    const GradCheckReport rc = finite_diff_check(constant, point, Matrix(2, 2), 1e-5, 1e-6);
    CHECK(rc.passed);
}

TEST_CASE("finite_diff_check against the sharp softmax gradient") {
    // f(x) = -log softmax_temp(x, 0.05)[0] at x = [1, 0]
    Matrix x(1, 2);
    x(0, 0) = 1.0;
    x(0, 1) = 0.0;
    const double beta = 0.05;
    const auto loss = [beta](const Matrix& m) {
        return -std::log(softmax_temp(m.data, beta)[0]);
    };
    const Vec p = softmax_temp(x.data, beta);
    Matrix grad(1, 2);
    grad(0, 0) = (p[0] - 1.0) / beta;
    grad(0, 1) = p[1] / beta;
    const GradCheckReport r = finite_diff_check(loss, x, grad, 1e-5, 1e-4);
    CHECK(r.passed);
}

TEST_CASE("finite_diff_check flags a corrupted gradient") {
    Matrix point{{1.0, 2.0}};
    Matrix bad = point;
    bad(0, 0) += 0.3;
    const auto quad = [](const Matrix& m) {
        double s = 0.0;
        for (double v : m.data) s += 0.5 * v * v;
        return s;
    };
    const GradCheckReport r = finite_diff_check(quad, point, bad, 1e-5, 1e-4);
    CHECK_FALSE(r.passed);
    CHECK(r.worst_row == 0);
    CHECK(r.worst_col == 0);
}

TEST_CASE("finite_diff_check validates eps") {
    Matrix point{{1.0}};
    const auto f = [](const Matrix& m) { return m.data[0]; };
    CHECK_THROWS_AS(finite_diff_check(f, point, point, 1e-8, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_check(f, point, point, 1e-2, 1e-4), std::invalid_argument);
}
