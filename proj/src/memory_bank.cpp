#include "imda/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "imda/errors.hpp"
#include "imda/numerics.hpp"

namespace imda {

double AlphaSchedule::at(std::size_t epoch) const {
    const double a = base * static_cast<double>(epoch);
    return std::clamp(a, 0.0, 1.0);
}

ExemplarMemory::ExemplarMemory(std::size_t n, std::size_t d) : n_(n), d_(d), slots_(n, d) {
    if (n == 0 || d == 0) {
        throw std::invalid_argument("ExemplarMemory: n and d must be at least 1");
    }
}

std::span<const double> ExemplarMemory::slot(std::size_t i) const {
    if (i >= n_) throw std::out_of_range("ExemplarMemory::slot: index " + std::to_string(i));
    return {slots_.row(i), d_};
}

void ExemplarMemory::update_slot(std::size_t i, std::span<const double> f, double alpha) {
    if (i >= n_) {
        throw std::out_of_range("ExemplarMemory::update_slot: index " + std::to_string(i));
    }
    if (alpha < 0.0 || alpha > 1.0) {
        throw std::invalid_argument("ExemplarMemory::update_slot: alpha outside [0, 1]");
    }
    if (f.size() != d_) throw ShapeError("ExemplarMemory::update_slot: feature dim mismatch");
    if (alpha == 1.0) return;  // slot already unit-norm or zero; renormalizing is a no-op
    double* s = slots_.row(i);
    Vec mixed(d_);
    for (std::size_t j = 0; j < d_; ++j) mixed[j] = alpha * s[j] + (1.0 - alpha) * f[j];
    const Vec normed = l2_normalize(mixed);
    std::copy(normed.begin(), normed.end(), s);
}

void ExemplarMemory::restore_slots(const Matrix& snapshot) {
    if (!snapshot.same_shape(slots_)) throw ShapeError("restore_slots: shape mismatch");
    for (std::size_t i = 0; i < snapshot.rows; ++i) {
        const double norm = l2_norm({snapshot.row(i), snapshot.cols});
        if (norm != 0.0 && std::abs(norm - 1.0) > 1e-8) {
            throw std::invalid_argument("restore_slots: row is neither zero nor unit norm");
        }
    }
    slots_ = snapshot;
}

Vec ExemplarMemory::scores(std::span<const double> f) const {
    if (f.size() != d_) throw ShapeError("ExemplarMemory::scores: feature dim mismatch");
    Vec s(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        s[i] = dot({slots_.row(i), d_}, f);
    }
    return s;
}

Vec ExemplarMemory::probabilities(std::span<const double> f, double beta) const {
    return softmax_temp(scores(f), beta);
}

std::vector<std::size_t> ExemplarMemory::topk(std::span<const double> f, std::size_t k,
                                              std::optional<std::size_t> exclude) const {
    const std::size_t available = n_ - (exclude.has_value() ? 1 : 0);
    if (k > available) {
        throw std::invalid_argument("ExemplarMemory::topk: k exceeds available slots");
    }
    const Vec s = scores(f);
    std::vector<std::size_t> order;
    order.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        if (exclude && *exclude == i) continue;
        order.push_back(i);
    }
    const auto better = [&s](std::size_t a, std::size_t b) {
        if (s[a] != s[b]) return s[a] > s[b];
        return a < b;
    };
    if (k < order.size()) {
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                          order.end(), better);
        order.resize(k);
    } else {
        std::sort(order.begin(), order.end(), better);
    }
    return order;
}

}  // namespace imda
