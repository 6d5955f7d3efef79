#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "imda/dataset.hpp"
#include "imda/embedder.hpp"
#include "imda/evaluation.hpp"
#include "imda/gpp.hpp"
#include "imda/losses.hpp"
#include "imda/memory_bank.hpp"

namespace imda {

enum class NeighborMode { VNS, VariantVNS, VariantGPP, GPP };

std::string to_string(NeighborMode mode);
NeighborMode neighbor_mode_from_string(const std::string& name);

struct Toggles {
    bool ei = true;
    bool ci = true;
    bool ni = true;
};

struct TrainConfig {
    double beta = 0.05;
    std::size_t k_candidates = 0;  // 0 = auto: min(100, target slots / 4)
    double mu = 0.9;
    double alpha_base = 0.01;
    std::size_t vns_k = 8;
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    std::size_t ni_start_epoch = 10;  // neighborhood loss active for epochs > this
    std::size_t gpp_start_epoch = 5;  // positive-prediction training active for epochs > this
    Toggles toggles;
    NeighborMode neighbor_mode = NeighborMode::GPP;
    std::uint64_t seed = 42;
    double lr = 0.05;
    double cls_lr_mult = 10.0;  // identity head trains faster than the embedder
    double gpp_lr = 0.05;
    double weight_decay = 0.0;  // L2 shrinkage on the embedder weights
    std::size_t threads = 1;
    bool cross_camera_eval = false;
    std::size_t eval_every = 1;
    EmbedderConfig embedder;

    void validate() const;
    std::size_t effective_k(std::size_t target_slots) const;
    bool target_branch_active() const { return toggles.ei || toggles.ci; }
    // Step decay at two thirds of the schedule.
    double lr_at(std::size_t epoch) const;
    double gpp_lr_at(std::size_t epoch) const;
};

struct EpochReport {
    std::size_t epoch = 0;
    double l_src = 0.0;
    double l_tgt = 0.0;
    double l_gpp = 0.0;
    double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0, rank20 = 0.0;
    double map = 0.0;
    double neigh_precision = 1.0;
    double neigh_recall = 0.0;
    double seconds = 0.0;  // wall clock; excluded from the metrics CSV
};

struct EpochDiagnostics {
    std::size_t epoch = 0;
    double alpha_used = 0.0;
    std::size_t max_non_self_neighbors = 0;
};

struct RetrievalMetrics {
    double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0, rank20 = 0.0;
    double map = 0.0;
};

// Query/gallery protocol for a test split: the first sample of every
// (identity, camera) pair is a query, everything else is gallery.
void query_gallery_split(const Dataset& test, std::vector<std::size_t>& queries,
                         std::vector<std::size_t>& gallery);

RetrievalMetrics evaluate_retrieval(const Embedder& embedder, const Dataset& test,
                                    bool cross_camera);

// Alternating source-supervised and target-invariance training over the EMA
// memories, with positive-neighbor prediction trained on the labeled domain.
class Trainer {
public:
    Trainer(TrainConfig cfg, const Dataset& source, const Dataset& target_train,
            const Dataset& target_test);

    // Runs epochs current+1 .. cfg.epochs, appending one report per epoch.
    void run();
    // Runs exactly the next epoch and records its report.
    EpochReport advance_epoch();
    EpochReport run_epoch(std::size_t epoch);

    RetrievalMetrics evaluate() const;

    const std::vector<EpochReport>& reports() const { return reports_; }
    const std::vector<EpochDiagnostics>& diagnostics() const { return diagnostics_; }
    std::size_t current_epoch() const { return epoch_; }

    const Embedder& embedder() const { return embedder_; }
    const IdentityClassifier& classifier() const { return classifier_; }
    const ExemplarMemory& source_memory() const { return source_memory_; }
    const ExemplarMemory& target_memory() const { return target_memory_; }
    const GppNetwork& gpp_network() const { return gpp_net_; }
    std::size_t candidate_count() const { return k_candidates_; }

    void save_checkpoint(const std::filesystem::path& path) const;
    void load_checkpoint(const std::filesystem::path& path);

    // Individual schedule steps, exposed so invariants can be exercised
    // directly. Batches are lists of memory slot indices.
    double source_step(const std::vector<std::size_t>& batch, double lr,
                       std::vector<EmbedCache>& caches);
    double target_step(const std::vector<std::size_t>& batch,
                       const std::vector<std::size_t>& variant_choice, std::size_t epoch,
                       double lr, std::vector<EmbedCache>& caches, double& precision_sum,
                       double& recall_sum, std::size_t& max_non_self);
    double gpp_step(const std::vector<std::size_t>& batch, const std::vector<EmbedCache>& caches,
                    double lr);
    void update_memories(const std::vector<std::size_t>& source_batch,
                         const std::vector<EmbedCache>& source_caches,
                         const std::vector<std::size_t>& target_batch,
                         const std::vector<EmbedCache>& target_caches, double alpha);

    NeighborSet neighbors_for(std::size_t slot, const Vec& f, std::size_t epoch) const;
    bool ni_active(std::size_t epoch) const;
    bool gpp_training_active(std::size_t epoch) const;

private:
    TrainConfig cfg_;
    const Dataset& source_;
    const Dataset& target_train_;
    const Dataset& target_test_;

    std::vector<std::uint32_t> class_ids_;  // sorted distinct supervised identities
    std::vector<std::size_t> source_labels_;  // slot -> class index

    Embedder embedder_;
    IdentityClassifier classifier_;
    ExemplarMemory source_memory_;
    ExemplarMemory target_memory_;
    GppNetwork gpp_net_;
    std::size_t k_candidates_ = 0;

    std::size_t epoch_ = 0;  // last completed epoch
    std::vector<EpochReport> reports_;
    std::vector<EpochDiagnostics> diagnostics_;
};

}  // namespace imda
