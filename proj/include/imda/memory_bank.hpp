#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "imda/matrix.hpp"

namespace imda {

// Updating rate schedule: alpha(epoch) = min(base * epoch, 1), epochs 1-based.
struct AlphaSchedule {
    double base = 0.01;
    double at(std::size_t epoch) const;
};

// One slot per training sample, each slot either all-zero (uninitialized) or
// a unit vector. Slots act as the weight rows of a non-parametric classifier:
// they are written only through the EMA update, never by gradient descent.
class ExemplarMemory {
public:
    ExemplarMemory(std::size_t n, std::size_t d);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return d_; }

    std::span<const double> slot(std::size_t i) const;
    const Matrix& slots() const { return slots_; }

    // slot_i <- l2_normalize(alpha * slot_i + (1 - alpha) * f)
    void update_slot(std::size_t i, std::span<const double> f, double alpha);

    // Bit-exact restore from a snapshot; rows must already be zero or unit.
    void restore_slots(const Matrix& snapshot);

    // Cosine scores s_j = slot_j . f against every slot.
    Vec scores(std::span<const double> f) const;

    // softmax_temp over scores(f): a probability over all n slots.
    Vec probabilities(std::span<const double> f, double beta) const;

    // Indices of the k largest cosine scores, descending, ties broken by
    // ascending index. `exclude` is removed before ranking.
    std::vector<std::size_t> topk(std::span<const double> f, std::size_t k,
                                  std::optional<std::size_t> exclude = std::nullopt) const;

private:
    std::size_t n_;
    std::size_t d_;
    Matrix slots_;
};

}  // namespace imda
