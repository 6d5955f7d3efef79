#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imda/losses.hpp"
#include "imda/matrix.hpp"
#include "imda/memory_bank.hpp"

namespace imda {

// Complete graph over the anchor's top-k candidate neighbors. Node features
// are the candidate slots with the anchor feature subtracted; the adjacency
// holds row-softmaxed pairwise dot products of those features.
struct CandidateGraph {
    Vec anchor_feature;
    std::vector<std::size_t> candidate_indices;  // V, descending cosine, anchor excluded
    Matrix node_features;                        // H: k x d
    Matrix adjacency;                            // A: k x k, row-stochastic
};

CandidateGraph build_graph(const ExemplarMemory& mem, std::size_t anchor_index,
                           std::span<const double> anchor_f, std::size_t k);

struct GppConfig {
    // gcn_dims[0] is the node feature dimension; each consecutive pair is one
    // graph convolution layer. A single entry means no GCN layers (the
    // classifier sees raw node features).
    std::vector<std::size_t> gcn_dims;
    std::size_t classifier_hidden = 0;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    std::size_t layer_count() const { return gcn_dims.size() - 1; }
    std::size_t output_dim() const { return gcn_dims.back(); }

    // Default chain for a given feature dimension: halving after the first
    // layer (e.g. 64 -> 64 -> 32 -> 16 -> 16), except d = 2048 which uses the
    // wider production chain 2048 -> 2048 -> 512 -> 256 -> 256. Classifier
    // hidden width equals the chain's output dimension.
    static GppConfig for_dim(std::size_t d);
    // No GCN layers; positive classifier applied to raw node features.
    static GppConfig classifier_only(std::size_t d);
};

// GCN weight stack plus the positive classifier
// (FC -> batch-norm -> PReLU -> FC -> 2-way softmax).
class GppNetwork {
public:
    GppNetwork(GppConfig cfg, std::uint64_t seed);

    const GppConfig& config() const { return cfg_; }

    std::vector<Matrix> gcn_weights;  // W^(l): (2 * d_in) x d_out
    Matrix fc1_w;                     // d_L x h
    Vec fc1_b;
    Vec bn_gamma, bn_beta;
    Vec bn_running_mean, bn_running_var;
    double prelu_slope = 0.25;
    Matrix fc2_w;  // h x 2
    Vec fc2_b;

    struct Gradients {
        std::vector<Matrix> dgcn;
        Matrix dfc1_w;
        Vec dfc1_b;
        Vec dbn_gamma, dbn_beta;
        double dprelu_slope = 0.0;
        Matrix dfc2_w;
        Vec dfc2_b;
        void accumulate(const Gradients& other);
        void scale_by(double s);
    };
    Gradients zero_gradients() const;
    void apply_sgd(const Gradients& g, double lr);

private:
    GppConfig cfg_;
};

struct GcnLayerCache {
    Matrix input;    // H^(l)
    Matrix mixed;    // A * H^(l)
    Matrix pre_act;  // [mixed || input] * W^(l), before ReLU
};
struct GcnCache {
    std::vector<GcnLayerCache> layers;
};

// H^(l+1) = ReLU([A H^(l) || H^(l)] W^(l)); returns Z = H^(L).
Matrix gcn_forward(const CandidateGraph& graph, const GppNetwork& net, GcnCache* cache = nullptr);

struct PositiveScores {
    Vec probs;  // per candidate, probability of being a positive of the anchor
};

struct ClassifierCache {
    Matrix z;
    Matrix a1;
    Vec mean, var;  // statistics used for normalization
    bool used_batch_stats = false;
    Matrix xhat;
    Matrix bn_out;
    Matrix act;
    Matrix logits;
    Vec probs;
};

// Per-node positive probability. In training mode batch statistics over the
// k nodes are used (running statistics when k == 1); at inference the running
// averages are used. The network itself is not mutated; call
// commit_bn_stats() to fold a training-mode cache into the running averages.
PositiveScores classify_positive(const Matrix& z, const GppNetwork& net, bool training,
                                 ClassifierCache* cache = nullptr);

void commit_bn_stats(GppNetwork& net, const ClassifierCache& cache);

// y*_j = 1 iff the candidate shares the anchor's identity.
std::vector<int> gpp_labels(std::span<const std::uint32_t> candidate_ids,
                            std::uint32_t anchor_id);

// Mean binary cross-entropy of positive probabilities against binary labels.
double gpp_loss(const PositiveScores& scores, const std::vector<int>& labels);

// Gradients of gpp_loss w.r.t. every GppNetwork parameter. Nothing flows
// into the memory, the anchor feature, or the adjacency.
GppNetwork::Gradients gpp_backward(const CandidateGraph& graph, const GppNetwork& net,
                                   const GcnCache& gcn_cache, const ClassifierCache& cls_cache,
                                   const std::vector<int>& labels);

// members = {anchor} + {V_j : p*_j >= mu}, weights 1 for the anchor and
// 1/m for each of the m selected neighbors.
NeighborSet select_reliable(const PositiveScores& scores,
                            const std::vector<std::size_t>& candidate_indices, double mu,
                            std::size_t anchor);

// Fixed top-m selection by positive probability (ties by candidate order).
NeighborSet select_top_scores(const PositiveScores& scores,
                              const std::vector<std::size_t>& candidate_indices, std::size_t m,
                              std::size_t anchor);

}  // namespace imda
