#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "imda/losses.hpp"
#include "imda/memory_bank.hpp"
#include "imda/numerics.hpp"

using namespace imda;

namespace {

Vec random_unit(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(d);
    for (double& x : v) x = normal(rng);
    return l2_normalize(v);
}

ExemplarMemory random_memory(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    ExemplarMemory mem(n, d);
    for (std::size_t i = 0; i < n; ++i) mem.update_slot(i, random_unit(d, rng), 0.0);
    return mem;
}

}  // namespace

TEST_CASE("neighbor set weights follow the soft-label rule") {
    const NeighborSet self = NeighborSet::self_only(4);
    CHECK(self.members.size() == 1);
    CHECK(self.members[0] == 4);
    CHECK(self.weights[0] == 1.0);

    const NeighborSet pair = NeighborSet::with_neighbors(0, {3});
    CHECK(pair.weights[0] == 1.0);
    CHECK(pair.weights[1] == 1.0);  // single non-self member gets full weight

    const NeighborSet four = NeighborSet::with_neighbors(7, {1, 2, 9, 12});
    CHECK(four.weights[0] == 1.0);
    double non_self_sum = 0.0;
    for (std::size_t i = 1; i < four.weights.size(); ++i) {
        CHECK(four.weights[i] == doctest::Approx(0.25));
        non_self_sum += four.weights[i];
    }
    CHECK(non_self_sum == doctest::Approx(1.0));

    CHECK_THROWS_AS(NeighborSet::with_neighbors(3, {3}), std::invalid_argument);
}

TEST_CASE("source cross-entropy examples") {
    const LossValue uniform = source_ce_loss(Vec{0.0, 0.0, 0.0, 0.0}, 2);
    CHECK(uniform.value == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    const LossValue confident = source_ce_loss(Vec{500.0, 0.0, 0.0}, 0);
    CHECK(confident.value == doctest::Approx(0.0).epsilon(1e-12));

    const LossValue pairwise = source_ce_loss(Vec{1.0, 0.0}, 0);
    const double e = std::exp(1.0);
    CHECK(pairwise.value == doctest::Approx(-std::log(e / (e + 1.0))).epsilon(1e-12));
    CHECK(pairwise.value == doctest::Approx(0.3133).epsilon(1e-3));

    CHECK_THROWS_AS(source_ce_loss(Vec{1.0, 0.0}, 2), std::out_of_range);
}

TEST_CASE("source cross-entropy gradient is softmax minus onehot") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        Vec logits(3 + trial % 6);
        for (double& v : logits) v = normal(rng);
        const std::size_t label = trial % logits.size();
        const LossValue lv = source_ce_loss(logits, label);
        const Vec p = softmax_temp(logits, 1.0);
        for (std::size_t j = 0; j < logits.size(); ++j) {
            const double expect = p[j] - (j == label ? 1.0 : 0.0);
            CHECK(lv.grad_input[j] == doctest::Approx(expect).epsilon(1e-10));
        }
        const GradCheckReport r = finite_diff_check_vec(
            [&](const Vec& probe) { return source_ce_loss(probe, label).value; }, logits,
            lv.grad_input, 1e-5, 1e-6);
        CHECK(r.passed);
    }
}

TEST_CASE("ei_ci_loss on two orthogonal slots") {
    ExemplarMemory mem(2, 2);
    mem.update_slot(0, Vec{1.0, 0.0}, 0.0);
    mem.update_slot(1, Vec{0.0, 1.0}, 0.0);
    const LossValue lv = ei_ci_loss(mem, 0, Vec{1.0, 0.0}, 1.0);
    const double e = std::exp(1.0);
    CHECK(lv.value == doctest::Approx(-std::log(e / (e + 1.0))).epsilon(1e-12));
}

TEST_CASE("ei_ci_loss with identical slots is log n") {
    std::mt19937_64 rng(32);
    for (std::size_t n : {2UL, 5UL, 11UL}) {
        ExemplarMemory mem(n, 4);
        const Vec shared = random_unit(4, rng);
        for (std::size_t i = 0; i < n; ++i) mem.update_slot(i, shared, 0.0);
        const LossValue lv = ei_ci_loss(mem, 1, random_unit(4, rng), 0.05);
        CHECK(lv.value ==
              doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-10));
    }
}

TEST_CASE("ei_ci_loss gradient passes finite differences") {
    std::mt19937_64 rng(33);
    const ExemplarMemory mem = random_memory(5, 4, rng);
    const Vec f = random_unit(4, rng);
    for (double beta : {0.05, 0.5, 1.0}) {
        const LossValue lv = ei_ci_loss(mem, 2, f, beta);
        const GradCheckReport r = finite_diff_check_vec(
            [&](const Vec& probe) { return ei_ci_loss(mem, 2, probe, beta).value; }, f,
            lv.grad_input, 1e-5, 1e-5);
        CHECK(r.passed);
    }
}

TEST_CASE("target_loss with a self-only neighbor set equals ei_ci_loss") {
    std::mt19937_64 rng(34);
    const ExemplarMemory mem = random_memory(9, 6, rng);
    const Vec f = random_unit(6, rng);
    const LossValue a = ei_ci_loss(mem, 3, f, 0.05);
    const LossValue b = target_loss(mem, NeighborSet::self_only(3), f, 0.05);
    CHECK(a.value == b.value);
    for (std::size_t c = 0; c < 6; ++c) CHECK(a.grad_input[c] == b.grad_input[c]);
}

TEST_CASE("target_loss with one neighbor over identical slots is twice log n") {
    std::mt19937_64 rng(35);
    const std::size_t n = 6;
    ExemplarMemory mem(n, 4);
    const Vec shared = random_unit(4, rng);
    for (std::size_t i = 0; i < n; ++i) mem.update_slot(i, shared, 0.0);
    const NeighborSet neigh = NeighborSet::with_neighbors(1, {4});
    const LossValue lv = target_loss(mem, neigh, random_unit(4, rng), 0.05);
    CHECK(lv.value == doctest::Approx(2.0 * std::log(6.0)).epsilon(1e-10));
}

TEST_CASE("target_loss gradient passes finite differences") {
    std::mt19937_64 rng(36);
    const ExemplarMemory mem = random_memory(8, 5, rng);
    const Vec f = random_unit(5, rng);
    const NeighborSet neigh = NeighborSet::with_neighbors(2, {0, 5, 7});
    for (double beta : {0.05, 0.5, 1.0}) {
        const LossValue lv = target_loss(mem, neigh, f, beta);
        const GradCheckReport r = finite_diff_check_vec(
            [&](const Vec& probe) { return target_loss(mem, neigh, probe, beta).value; }, f,
            lv.grad_input, 1e-5, 1e-5);
        CHECK(r.passed);
    }
}

TEST_CASE("analytic gradients match finite differences across random instances") {
    std::mt19937_64 rng(37);
    const double betas[3] = {0.05, 0.5, 1.0};
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng() % 48;
        const std::size_t d = 2 + rng() % 15;
        const ExemplarMemory mem = random_memory(n, d, rng);
        const Vec f = random_unit(d, rng);
        const std::size_t anchor = rng() % n;
        std::vector<std::size_t> neighbors;
        for (std::size_t j = 0; j < n && neighbors.size() < 1 + trial % 4; ++j) {
            if (j != anchor) neighbors.push_back(j);
        }
        const NeighborSet neigh = NeighborSet::with_neighbors(anchor, neighbors);
        const double beta = betas[trial % 3];
        const LossValue lv = target_loss(mem, neigh, f, beta);
        CHECK(lv.value >= 0.0);
        const GradCheckReport r = finite_diff_check_vec(
            [&](const Vec& probe) { return target_loss(mem, neigh, probe, beta).value; }, f,
            lv.grad_input, 1e-5, 1e-4);
        CHECK(r.passed);
    }
}

TEST_CASE("target_loss is invariant to permuting non-member slots") {
    std::mt19937_64 rng(38);
    const std::size_t n = 10, d = 5;
    std::vector<Vec> slots;
    for (std::size_t i = 0; i < n; ++i) slots.push_back(random_unit(d, rng));
    const Vec f = random_unit(d, rng);

    ExemplarMemory mem(n, d);
    for (std::size_t i = 0; i < n; ++i) mem.update_slot(i, slots[i], 0.0);
    const NeighborSet neigh = NeighborSet::with_neighbors(0, {1, 2});
    const LossValue base = target_loss(mem, neigh, f, 0.05);

    // swap two non-member slots (5 <-> 8); members keep their indices
    std::swap(slots[5], slots[8]);
    ExemplarMemory permuted(n, d);
    for (std::size_t i = 0; i < n; ++i) permuted.update_slot(i, slots[i], 0.0);
    const LossValue swapped = target_loss(permuted, neigh, f, 0.05);
    CHECK(std::fabs(base.value - swapped.value) < 1e-12);
}

TEST_CASE("loss values are nonnegative") {
    std::mt19937_64 rng(39);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + rng() % 20;
        const ExemplarMemory mem = random_memory(n, 6, rng);
        const Vec f = random_unit(6, rng);
        CHECK(ei_ci_loss(mem, rng() % n, f, 0.05).value >= 0.0);
    }
}
