#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imda/losses.hpp"
#include "imda/matrix.hpp"

namespace imda {

// One query's gallery ranking. gallery_order is a permutation of gallery
// indices sorted by descending similarity (ties by ascending index);
// relevance is aligned with gallery_order.
struct RankedList {
    std::size_t query = 0;
    std::vector<std::size_t> gallery_order;
    std::vector<int> relevance;
};

struct CmcResult {
    std::vector<double> accuracy;  // aligned with the requested ranks
    std::size_t skipped_queries = 0;
};

// Fraction of queries with a relevant item in the top r, per requested r.
// Queries without any relevant item are excluded and counted.
CmcResult cmc(const std::vector<RankedList>& lists, const std::vector<std::size_t>& ranks);

// Mean over queries of average precision; same exclusion rule as cmc.
double mean_average_precision(const std::vector<RankedList>& lists);

struct NeighborQuality {
    double recall = 0.0;
    double precision = 1.0;
};

// Precision/recall of the non-self members of a neighbor set against
// identity ground truth. An empty non-self selection scores precision 1
// (vacuous) and recall 0.
NeighborQuality neighbor_quality(const NeighborSet& selected,
                                 std::span<const std::uint32_t> labels);

// Builds per-query rankings of gallery features by cosine similarity.
// Relevance: same identity; when cross_camera is set, gallery items sharing
// both identity and camera with the query are dropped from its list.
std::vector<RankedList> rank_gallery(const Matrix& query_features,
                                     std::span<const std::uint32_t> query_ids,
                                     std::span<const std::uint16_t> query_cams,
                                     const Matrix& gallery_features,
                                     std::span<const std::uint32_t> gallery_ids,
                                     std::span<const std::uint16_t> gallery_cams,
                                     bool cross_camera = false);

}  // namespace imda
