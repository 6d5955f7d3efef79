#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "imda/matrix.hpp"

namespace imda {

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// v / ||v||2. The all-zeros vector is returned unchanged so that queries
// against uninitialized memory slots are well defined (cosine score 0).
Vec l2_normalize(std::span<const double> v);

// p_j = exp(s_j / beta) / sum_m exp(s_m / beta), computed with
// max-subtraction. beta in (0, 1] sharpens the distribution as it shrinks.
Vec softmax_temp(std::span<const double> scores, double beta);

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
    bool passed = false;
};

// Central finite differences around `point`, compared entry-wise against
// `analytic_grad` with relative error |a-n| / max(|a|, |n|, 1e-8).
// loss_fn must be deterministic.
GradCheckReport finite_diff_check(const std::function<double(const Matrix&)>& loss_fn,
                                  const Matrix& point,
                                  const Matrix& analytic_grad,
                                  double eps = 1e-5,
                                  double tolerance = 1e-4);

// Convenience overload for vector-shaped parameters (treated as 1 x n).
GradCheckReport finite_diff_check_vec(const std::function<double(const Vec&)>& loss_fn,
                                      const Vec& point,
                                      const Vec& analytic_grad,
                                      double eps = 1e-5,
                                      double tolerance = 1e-4);

}  // namespace imda
