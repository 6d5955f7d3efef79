#include "imda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "imda/errors.hpp"
#include "imda/numerics.hpp"

namespace imda {

NeighborSet NeighborSet::self_only(std::size_t anchor) {
    NeighborSet n;
    n.anchor = anchor;
    n.members = {anchor};
    n.weights = {1.0};
    return n;
}

NeighborSet NeighborSet::with_neighbors(std::size_t anchor, std::vector<std::size_t> neighbors) {
    NeighborSet n;
    n.anchor = anchor;
    n.members.reserve(neighbors.size() + 1);
    n.members.push_back(anchor);
    double w = 0.0;
    for (std::size_t j : neighbors) {
        if (j == anchor) throw std::invalid_argument("NeighborSet: anchor listed as neighbor");
        n.members.push_back(j);
    }
    if (!neighbors.empty()) w = 1.0 / static_cast<double>(neighbors.size());
    n.weights.assign(n.members.size(), w);
    n.weights[0] = 1.0;
    return n;
}

LossValue source_ce_loss(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size()) {
        throw std::out_of_range("source_ce_loss: label " + std::to_string(label));
    }
    double max_l = logits[0];
    for (double l : logits) max_l = std::max(max_l, l);
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - max_l);
    const double log_sum = std::log(sum);

    LossValue out;
    out.value = -(logits[label] - max_l - log_sum);
    out.grad_input.resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out.grad_input[j] = std::exp(logits[j] - max_l) / sum;
    }
    out.grad_input[label] -= 1.0;
    return out;
}

LossValue ei_ci_loss(const ExemplarMemory& mem, std::size_t i, std::span<const double> f,
                     double beta) {
    return target_loss(mem, NeighborSet::self_only(i), f, beta);
}

LossValue target_loss(const ExemplarMemory& mem, const NeighborSet& neigh,
                      std::span<const double> f, double beta) {
    if (neigh.members.empty() || neigh.members[0] != neigh.anchor) {
        throw std::invalid_argument("target_loss: neighbor set must start with the anchor");
    }
    if (neigh.members.size() != neigh.weights.size()) {
        throw ShapeError("target_loss: member/weight size mismatch");
    }
    const std::size_t n = mem.size();
    const std::size_t d = mem.dim();

    const Vec s = mem.scores(f);
    // log p(j) = s_j / beta - logsumexp(s / beta)
    double max_s = s[0];
    for (double v : s) max_s = std::max(max_s, v);
    double sum = 0.0;
    for (double v : s) sum += std::exp((v - max_s) / beta);
    const double log_z = max_s / beta + std::log(sum);

    LossValue out;
    out.grad_input.assign(d, 0.0);

    // grad_f = sum_j w_j * (sum_m p_m slot_m - slot_j) / beta
    double total_weight = 0.0;
    for (std::size_t idx = 0; idx < neigh.members.size(); ++idx) {
        const std::size_t j = neigh.members[idx];
        if (j >= n) throw std::out_of_range("target_loss: member index out of range");
        const double w = neigh.weights[idx];
        out.value += -w * (s[j] / beta - log_z);
        total_weight += w;
        const double* slot_j = mem.slots().row(j);
        for (std::size_t c = 0; c < d; ++c) out.grad_input[c] -= w * slot_j[c] / beta;
    }
    // shared expectation term, added once with the summed weight
    Vec expected(d, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        const double p_m = std::exp((s[m] - max_s) / beta) / sum;
        if (p_m == 0.0) continue;
        const double* slot_m = mem.slots().row(m);
        for (std::size_t c = 0; c < d; ++c) expected[c] += p_m * slot_m[c];
    }
    for (std::size_t c = 0; c < d; ++c) {
        out.grad_input[c] += total_weight * expected[c] / beta;
    }
    return out;
}

}  // namespace imda
