#include "imda/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "imda/errors.hpp"
#include "imda/numerics.hpp"

namespace imda {

namespace {

bool has_relevant(const RankedList& list) {
    for (int r : list.relevance) {
        if (r) return true;
    }
    return false;
}

}  // namespace

CmcResult cmc(const std::vector<RankedList>& lists, const std::vector<std::size_t>& ranks) {
    CmcResult result;
    result.accuracy.assign(ranks.size(), 0.0);
    std::size_t counted = 0;
    for (const RankedList& list : lists) {
        if (!has_relevant(list)) {
            ++result.skipped_queries;
            continue;
        }
        ++counted;
        std::size_t first_hit = list.relevance.size();
        for (std::size_t pos = 0; pos < list.relevance.size(); ++pos) {
            if (list.relevance[pos]) {
                first_hit = pos;
                break;
            }
        }
        for (std::size_t ri = 0; ri < ranks.size(); ++ri) {
            if (first_hit < ranks[ri]) result.accuracy[ri] += 1.0;
        }
    }
    if (counted > 0) {
        for (double& a : result.accuracy) a /= static_cast<double>(counted);
    }
    return result;
}

double mean_average_precision(const std::vector<RankedList>& lists) {
    double sum_ap = 0.0;
    std::size_t counted = 0;
    for (const RankedList& list : lists) {
        if (!has_relevant(list)) continue;
        ++counted;
        double ap = 0.0;
        std::size_t hits = 0;
        for (std::size_t pos = 0; pos < list.relevance.size(); ++pos) {
            if (!list.relevance[pos]) continue;
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(pos + 1);
        }
        sum_ap += ap / static_cast<double>(hits);
    }
    return counted > 0 ? sum_ap / static_cast<double>(counted) : 0.0;
}

NeighborQuality neighbor_quality(const NeighborSet& selected,
                                 std::span<const std::uint32_t> labels) {
    if (selected.anchor >= labels.size()) {
        throw std::out_of_range("neighbor_quality: anchor outside label table");
    }
    const std::uint32_t anchor_id = labels[selected.anchor];
    std::size_t total_positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i != selected.anchor && labels[i] == anchor_id) ++total_positives;
    }

    std::size_t chosen = 0, true_positives = 0;
    for (std::size_t idx = 1; idx < selected.members.size(); ++idx) {
        const std::size_t j = selected.members[idx];
        if (j >= labels.size()) throw std::out_of_range("neighbor_quality: member outside table");
        ++chosen;
        if (labels[j] == anchor_id) ++true_positives;
    }

    NeighborQuality q;
    q.precision = chosen == 0
                      ? 1.0
                      : static_cast<double>(true_positives) / static_cast<double>(chosen);
    q.recall = total_positives == 0
                   ? 0.0
                   : static_cast<double>(true_positives) / static_cast<double>(total_positives);
    return q;
}

std::vector<RankedList> rank_gallery(const Matrix& query_features,
                                     std::span<const std::uint32_t> query_ids,
                                     std::span<const std::uint16_t> query_cams,
                                     const Matrix& gallery_features,
                                     std::span<const std::uint32_t> gallery_ids,
                                     std::span<const std::uint16_t> gallery_cams,
                                     bool cross_camera) {
    if (query_features.rows != query_ids.size() || gallery_features.rows != gallery_ids.size()) {
        throw ShapeError("rank_gallery: feature/id count mismatch");
    }
    if (query_features.cols != gallery_features.cols) {
        throw ShapeError("rank_gallery: feature dimension mismatch");
    }
    const std::size_t d = query_features.cols;
    std::vector<RankedList> lists;
    lists.reserve(query_features.rows);
    for (std::size_t q = 0; q < query_features.rows; ++q) {
        std::vector<std::size_t> keep;
        keep.reserve(gallery_features.rows);
        for (std::size_t g = 0; g < gallery_features.rows; ++g) {
            if (cross_camera && gallery_ids[g] == query_ids[q] &&
                gallery_cams[g] == query_cams[q]) {
                continue;
            }
            keep.push_back(g);
        }
        Vec sims(keep.size());
        for (std::size_t idx = 0; idx < keep.size(); ++idx) {
            sims[idx] = dot({query_features.row(q), d}, {gallery_features.row(keep[idx]), d});
        }
        std::vector<std::size_t> order(keep.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (sims[a] != sims[b]) return sims[a] > sims[b];
            return keep[a] < keep[b];
        });

        RankedList list;
        list.query = q;
        list.gallery_order.reserve(order.size());
        list.relevance.reserve(order.size());
        for (std::size_t idx : order) {
            const std::size_t g = keep[idx];
            list.gallery_order.push_back(g);
            list.relevance.push_back(gallery_ids[g] == query_ids[q] ? 1 : 0);
        }
        lists.push_back(std::move(list));
    }
    return lists;
}

}  // namespace imda
