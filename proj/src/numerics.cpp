#include "imda/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "imda/errors.hpp"

namespace imda {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

Vec l2_normalize(std::span<const double> v) {
    Vec out(v.begin(), v.end());
    const double norm = l2_norm(v);
    if (norm == 0.0) return out;  // degenerate zero rule
    for (double& x : out) x /= norm;
    return out;
}

Vec softmax_temp(std::span<const double> scores, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("softmax_temp: beta must be positive");
    if (scores.empty()) throw std::invalid_argument("softmax_temp: empty scores");
    double max_s = scores[0];
    for (double s : scores) max_s = std::max(max_s, s);
    Vec p(scores.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        p[j] = std::exp((scores[j] - max_s) / beta);
        sum += p[j];
    }
    for (double& x : p) x /= sum;
    return p;
}

GradCheckReport finite_diff_check(const std::function<double(const Matrix&)>& loss_fn,
                                  const Matrix& point,
                                  const Matrix& analytic_grad,
                                  double eps,
                                  double tolerance) {
    if (!point.same_shape(analytic_grad)) {
        throw ShapeError("finite_diff_check: grad shape mismatch");
    }
    if (eps < 1e-7 || eps > 1e-3) {
        throw std::invalid_argument("finite_diff_check: eps outside [1e-7, 1e-3]");
    }
    GradCheckReport report;
    Matrix probe = point;
    for (std::size_t r = 0; r < point.rows; ++r) {
        for (std::size_t c = 0; c < point.cols; ++c) {
            const double saved = probe(r, c);
            probe(r, c) = saved + eps;
            const double f_plus = loss_fn(probe);
            probe(r, c) = saved - eps;
            const double f_minus = loss_fn(probe);
            probe(r, c) = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double analytic = analytic_grad(r, c);
            const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(analytic - numeric) / denom;
            if (rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_row = r;
                report.worst_col = c;
            }
        }
    }
    report.passed = report.max_relative_error < tolerance;
    return report;
}

GradCheckReport finite_diff_check_vec(const std::function<double(const Vec&)>& loss_fn,
                                      const Vec& point,
                                      const Vec& analytic_grad,
                                      double eps,
                                      double tolerance) {
    Matrix p(1, point.size());
    p.data = point;
    Matrix g(1, analytic_grad.size());
    g.data = analytic_grad;
    return finite_diff_check([&](const Matrix& m) { return loss_fn(m.data); }, p, g, eps,
                             tolerance);
}

}  // namespace imda
