#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "imda/evaluation.hpp"
#include "imda/numerics.hpp"

using namespace imda;

namespace {

RankedList list_with_relevance(std::vector<int> relevance) {
    RankedList list;
    list.relevance = std::move(relevance);
    list.gallery_order.resize(list.relevance.size());
    for (std::size_t i = 0; i < list.gallery_order.size(); ++i) list.gallery_order[i] = i;
    return list;
}

// independent AP oracle: for every relevant position, recount the relevant
// items above it from scratch
double brute_force_ap(const std::vector<int>& relevance) {
    double ap = 0.0;
    std::size_t total_relevant = 0;
    for (int r : relevance) total_relevant += r ? 1 : 0;
    if (total_relevant == 0) return 0.0;
    for (std::size_t pos = 0; pos < relevance.size(); ++pos) {
        if (!relevance[pos]) continue;
        std::size_t in_top = 0;
        for (std::size_t q = 0; q <= pos; ++q) in_top += relevance[q] ? 1 : 0;
        ap += static_cast<double>(in_top) / static_cast<double>(pos + 1);
    }
    return ap / static_cast<double>(total_relevant);
}

}  // namespace

TEST_CASE("cmc examples") {
    // every query's top hit is relevant
    std::vector<RankedList> perfect;
    perfect.push_back(list_with_relevance({1, 0, 0}));
    perfect.push_back(list_with_relevance({1, 1, 0}));
    const CmcResult r = cmc(perfect, {1, 5});
    CHECK(r.accuracy[0] == doctest::Approx(1.0));
    CHECK(r.accuracy[1] == doctest::Approx(1.0));

    // single query, first relevant at position 3 (1-indexed)
    std::vector<RankedList> third;
    third.push_back(list_with_relevance({0, 0, 1, 0, 0, 0}));
    const CmcResult r3 = cmc(third, {1, 5});
    CHECK(r3.accuracy[0] == doctest::Approx(0.0));
    CHECK(r3.accuracy[1] == doctest::Approx(1.0));

    // first-relevant positions (1, 2, 6)
    std::vector<RankedList> trio;
    trio.push_back(list_with_relevance({1, 0, 0, 0, 0, 0}));
    trio.push_back(list_with_relevance({0, 1, 0, 0, 0, 0}));
    trio.push_back(list_with_relevance({0, 0, 0, 0, 0, 1}));
    const CmcResult rt = cmc(trio, {1, 5, 10});
    CHECK(rt.accuracy[0] == doctest::Approx(1.0 / 3.0));
    CHECK(rt.accuracy[1] == doctest::Approx(2.0 / 3.0));
    CHECK(rt.accuracy[2] == doctest::Approx(1.0));
}

TEST_CASE("cmc accuracy is non-decreasing in the rank") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<RankedList> lists;
        for (int q = 0; q < 6; ++q) {
            std::vector<int> rel(12, 0);
            rel[rng() % 12] = 1;
            if (rng() % 2) rel[rng() % 12] = 1;
            lists.push_back(list_with_relevance(rel));
        }
        const CmcResult r = cmc(lists, {1, 2, 5, 10, 12});
        for (std::size_t i = 1; i < r.accuracy.size(); ++i) {
            CHECK(r.accuracy[i] >= r.accuracy[i - 1]);
        }
    }
}

TEST_CASE("queries without relevant items are excluded and counted") {
    std::vector<RankedList> lists;
    lists.push_back(list_with_relevance({0, 0, 0}));
    lists.push_back(list_with_relevance({1, 0, 0}));
    const CmcResult r = cmc(lists, {1});
    CHECK(r.skipped_queries == 1);
    CHECK(r.accuracy[0] == doctest::Approx(1.0));
}

TEST_CASE("average precision examples") {
    std::vector<RankedList> single;
    single.push_back(list_with_relevance({1, 0, 0, 0}));
    CHECK(mean_average_precision(single) == doctest::Approx(1.0));

    std::vector<RankedList> pattern;
    pattern.push_back(list_with_relevance({0, 1, 0, 1}));
    CHECK(mean_average_precision(pattern) == doctest::Approx(0.5));

    std::vector<RankedList> full;
    full.push_back(list_with_relevance({1, 1, 1}));
    CHECK(mean_average_precision(full) == doctest::Approx(1.0));
}

TEST_CASE("mAP equals the brute-force oracle on random instances") {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<RankedList> lists;
        double expected = 0.0;
        const std::size_t queries = 1 + rng() % 5;
        for (std::size_t q = 0; q < queries; ++q) {
            const std::size_t gallery = 1 + rng() % 30;
            std::vector<int> rel(gallery);
            bool any = false;
            for (int& v : rel) {
                v = (rng() % 3 == 0) ? 1 : 0;
                any = any || v;
            }
            if (!any) rel[rng() % gallery] = 1;
            expected += brute_force_ap(rel);
            lists.push_back(list_with_relevance(rel));
        }
        expected /= static_cast<double>(queries);
        CHECK(std::fabs(mean_average_precision(lists) - expected) < 1e-12);
    }
}

TEST_CASE("neighbor quality examples") {
    // labels over 8 samples; anchor 0 has identity 3 with 4 positives (1..4)
    const std::vector<std::uint32_t> labels{3, 3, 3, 3, 3, 9, 9, 9};

    const NeighborSet perfect = NeighborSet::with_neighbors(0, {1, 2, 3, 4});
    const NeighborQuality q1 = neighbor_quality(perfect, labels);
    CHECK(q1.precision == doctest::Approx(1.0));
    CHECK(q1.recall == doctest::Approx(1.0));

    const NeighborSet empty = NeighborSet::self_only(0);
    const NeighborQuality q2 = neighbor_quality(empty, labels);
    CHECK(q2.precision == doctest::Approx(1.0));
    CHECK(q2.recall == doctest::Approx(0.0));

    const NeighborSet mixed = NeighborSet::with_neighbors(0, {1, 2, 5});
    const NeighborQuality q3 = neighbor_quality(mixed, labels);
    CHECK(q3.precision == doctest::Approx(2.0 / 3.0));
    CHECK(q3.recall == doctest::Approx(0.5));
}

TEST_CASE("rank_gallery orders by cosine similarity with index tie-break") {
    Matrix queries(1, 2);
    queries(0, 0) = 1.0;
    Matrix gallery(4, 2);
    gallery(0, 0) = 0.5;
    gallery(0, 1) = std::sqrt(0.75);
    gallery(1, 0) = 1.0;  // exact match
    gallery(2, 0) = 0.5;
    gallery(2, 1) = std::sqrt(0.75);  // tie with index 0
    gallery(3, 0) = -1.0;

    const std::vector<std::uint32_t> qid{7};
    const std::vector<std::uint16_t> qcam{0};
    const std::vector<std::uint32_t> gid{7, 7, 8, 8};
    const std::vector<std::uint16_t> gcam{1, 1, 0, 0};

    const auto lists = rank_gallery(queries, qid, qcam, gallery, gid, gcam);
    REQUIRE(lists.size() == 1);
    CHECK(lists[0].gallery_order == std::vector<std::size_t>{1, 0, 2, 3});
    CHECK(lists[0].relevance == std::vector<int>{1, 1, 0, 0});
}

TEST_CASE("duplicated gallery leaves rank-1 unchanged when similarities are distinct") {
    std::mt19937_64 rng(63);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix queries(3, 4);
    for (double& v : queries.data) v = normal(rng);
    Matrix gallery(6, 4);
    for (double& v : gallery.data) v = normal(rng);
    std::vector<std::uint32_t> qid{0, 1, 2};
    std::vector<std::uint16_t> qcam(3, 0);
    std::vector<std::uint32_t> gid{0, 1, 2, 0, 1, 2};
    std::vector<std::uint16_t> gcam(6, 1);

    const auto base = cmc(rank_gallery(queries, qid, qcam, gallery, gid, gcam), {1});

    Matrix doubled(12, 4);
    std::vector<std::uint32_t> did;
    std::vector<std::uint16_t> dcam;
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
            doubled(i, c) = gallery(i, c);
            doubled(i + 6, c) = gallery(i, c);
        }
    }
    did = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
    dcam.assign(12, 1);
    const auto dup = cmc(rank_gallery(queries, qid, qcam, doubled, did, dcam), {1});
    CHECK(base.accuracy[0] == doctest::Approx(dup.accuracy[0]));
}

TEST_CASE("cross-camera filtering drops same-identity same-camera items") {
    Matrix queries(1, 2);
    queries(0, 0) = 1.0;
    Matrix gallery(2, 2);
    gallery(0, 0) = 1.0;
    gallery(1, 0) = 0.9;
    const std::vector<std::uint32_t> qid{5};
    const std::vector<std::uint16_t> qcam{2};
    const std::vector<std::uint32_t> gid{5, 5};
    const std::vector<std::uint16_t> gcam{2, 3};

    const auto filtered = rank_gallery(queries, qid, qcam, gallery, gid, gcam, true);
    REQUIRE(filtered[0].gallery_order.size() == 1);
    CHECK(filtered[0].gallery_order[0] == 1);
}
