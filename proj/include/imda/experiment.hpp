#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imda/dataset.hpp"
#include "imda/numerics.hpp"
#include "imda/synthetic.hpp"
#include "imda/trainer.hpp"

namespace imda {

// Whole-experiment description: two domain specs, the training schedule and
// the output conventions. Serialized as JSON (comments allowed on input);
// unknown keys are rejected.
struct ExperimentConfig {
    DomainSpec source;
    DomainSpec target;
    TrainConfig train;
    std::string output_dir = "runs/experiment";
    int counterparts_per_sample = -1;     // -1: one per other camera (C - 1)
    double test_identity_fraction = 0.3;  // share of target identities held out for testing

    void validate() const;
};

ExperimentConfig default_config();
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

struct GeneratedData {
    Dataset source;
    Dataset target_train;
    Dataset target_test;
};

// Source domain, target train/test split (held-out identities), and style
// counterparts for the target training samples. Pure function of the config.
GeneratedData generate_datasets(const ExperimentConfig& cfg);

void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochReport& report);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochReport>& reports);

struct TrainOutcome {
    std::vector<EpochReport> reports;  // rows produced by this invocation
    RetrievalMetrics final_metrics;
};

// Loads datasets from data_dir, trains (optionally resuming), writes
// metrics.csv, summary.json and checkpoint.bin under out_dir. stop_after > 0
// halts after that epoch without altering the schedule, leaving a checkpoint
// a later invocation can resume from.
TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume = std::nullopt,
                       std::size_t stop_after = 0);

RetrievalMetrics cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& data_dir);

struct GridRow {
    std::string name;
    Toggles toggles;
    EpochReport final_report;
};

// Table-style ablation: upper/lower baselines plus the four toggle
// combinations, identical seeds throughout.
std::vector<GridRow> run_ablation_grid(const ExperimentConfig& cfg, const GeneratedData& data);
std::vector<GridRow> cmd_grid(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                              const std::filesystem::path& out_dir);

struct GradCheckEntry {
    std::string name;
    GradCheckReport report;
    std::size_t instances = 0;
};

struct GradCheckSuite {
    std::vector<GradCheckEntry> entries;
    bool all_passed = true;
};

// Finite-difference verification of every hand-derived gradient. When
// corrupt_one is set, one analytic gradient is deliberately damaged so the
// failure path can be exercised end to end.
GradCheckSuite run_gradcheck_suite(std::size_t instances_per_check = 5,
                                   bool corrupt_one = false, std::uint64_t seed = 7);

}  // namespace imda
