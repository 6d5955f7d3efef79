#include "imda/matrix.hpp"

#include <cmath>
#include <string>

#include "imda/errors.hpp"

namespace imda {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows = init.size();
    cols = rows ? init.begin()->size() : 0;
    data.reserve(rows * cols);
    for (const auto& r : init) {
        if (r.size() != cols) {
            throw ShapeError("Matrix init: ragged rows");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix c(a.rows, b.cols);
    // ikj order: the inner loop runs over contiguous rows of b and c.
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            t(c, r) = m(r, c);
        }
    }
    return t;
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) {
        throw ShapeError("concat_cols: " + shape_str(a) + " || " + shape_str(b));
    }
    Matrix c(a.rows, a.cols + b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        double* crow = c.row(r);
        const double* arow = a.row(r);
        const double* brow = b.row(r);
        for (std::size_t j = 0; j < a.cols; ++j) crow[j] = arow[j];
        for (std::size_t j = 0; j < b.cols; ++j) crow[a.cols + j] = brow[j];
    }
    return c;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
    }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix scale(const Matrix& m, double s) {
    Matrix c = m;
    for (double& v : c.data) v *= s;
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Matrix sgd_step(const Matrix& params, const Matrix& grads, double lr) {
    require_same_shape(params, grads, "sgd_step");
    if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
    Matrix out = params;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= lr * grads.data[i];
    return out;
}

void sgd_step_inplace(Matrix& params, const Matrix& grads, double lr) {
    require_same_shape(params, grads, "sgd_step");
    for (std::size_t i = 0; i < params.data.size(); ++i) params.data[i] -= lr * grads.data[i];
}

bool has_nonfinite(const Matrix& m) { return has_nonfinite(m.data); }

bool has_nonfinite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return true;
    }
    return false;
}

}  // namespace imda
