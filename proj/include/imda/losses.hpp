#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imda/matrix.hpp"
#include "imda/memory_bank.hpp"

namespace imda {

// Reliable-neighbor set of an anchor sample. The anchor itself is always a
// member with weight 1; each non-self member carries weight 1/m where m is
// the number of non-self members.
struct NeighborSet {
    std::size_t anchor = 0;
    std::vector<std::size_t> members;  // anchor first, then neighbors
    std::vector<double> weights;       // aligned with members

    static NeighborSet self_only(std::size_t anchor);
    static NeighborSet with_neighbors(std::size_t anchor, std::vector<std::size_t> neighbors);

    std::size_t non_self_count() const { return members.size() - 1; }
};

struct LossValue {
    double value = 0.0;
    Vec grad_input;  // gradient w.r.t. the input vector (embedding or logits)
};

// -log softmax(logits)[label]; grad w.r.t. logits = softmax(logits) - onehot.
LossValue source_ce_loss(std::span<const double> logits, std::size_t label);

// -log p(i | f) with p the memory softmax at temperature beta. Exemplar- and
// camera-invariance share this form; the caller decides whether f comes from
// the real image or a style-transferred counterpart.
LossValue ei_ci_loss(const ExemplarMemory& mem, std::size_t i, std::span<const double> f,
                     double beta);

// -sum_{j in members} w_{i,j} log p(j | f). Reduces to ei_ci_loss when the
// neighbor set is {i}; the j != i terms implement neighborhood-invariance.
// Gradient flows into f only; memory slots are constants.
LossValue target_loss(const ExemplarMemory& mem, const NeighborSet& neigh,
                      std::span<const double> f, double beta);

}  // namespace imda
