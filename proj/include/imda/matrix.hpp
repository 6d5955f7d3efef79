#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace imda {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small and unclever on purpose: every
// gradient in this project is hand-derived against these few operations.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
    bool empty() const { return rows == 0 || cols == 0; }

    static Matrix identity(std::size_t n);
};

bool operator==(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix relu(const Matrix& m);
Matrix concat_cols(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);

// params - lr * grads
Matrix sgd_step(const Matrix& params, const Matrix& grads, double lr);
// In-place variant used by the training loop.
void sgd_step_inplace(Matrix& params, const Matrix& grads, double lr);

bool has_nonfinite(const Matrix& m);
bool has_nonfinite(const Vec& v);

}  // namespace imda
