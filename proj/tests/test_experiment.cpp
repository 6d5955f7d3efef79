#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "imda/errors.hpp"
#include "imda/experiment.hpp"

using namespace imda;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "imda_exp_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ExperimentConfig tiny_experiment() {
    ExperimentConfig cfg = default_config();
    cfg.source.num_identities = 8;
    cfg.source.samples_per_identity = 6;
    cfg.source.num_cameras = 3;
    cfg.source.in_dim = 8;
    cfg.source.seed = 5;
    cfg.target = cfg.source;
    cfg.target.shift_strength = 0.3;
    cfg.target.seed = 6;
    cfg.test_identity_fraction = 0.25;
    cfg.train.embedder = {8, 16, 8};
    cfg.train.epochs = 4;
    cfg.train.batch_size = 16;
    cfg.train.ni_start_epoch = 2;
    cfg.train.gpp_start_epoch = 1;
    cfg.train.k_candidates = 8;
    cfg.train.vns_k = 4;
    return cfg;
}

}  // namespace

TEST_CASE("config round trip: parse(dump(x)) == x") {
    ExperimentConfig cfg = default_config();
    cfg.train.beta = 0.1;
    cfg.train.neighbor_mode = NeighborMode::VariantGPP;
    cfg.output_dir = "runs/custom";
    const std::string text = dump_config(cfg);
    const ExperimentConfig parsed = parse_config(text);
    CHECK(dump_config(parsed) == text);
    CHECK(parsed.train.beta == cfg.train.beta);
    CHECK(parsed.train.neighbor_mode == NeighborMode::VariantGPP);
    CHECK(parsed.output_dir == "runs/custom");
}

TEST_CASE("config accepts comments and rejects unknown keys") {
    const char* with_comment = R"({
        // temperature for the memory softmax
        "train": { "beta": 0.2 }
    })";
    const ExperimentConfig cfg = parse_config(with_comment);
    CHECK(cfg.train.beta == doctest::Approx(0.2));

    CHECK_THROWS_AS(parse_config(R"({"trian": {}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({"train": {"beat": 0.2}})"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("{ not json"),
                         doctest::Contains("config parse error"), std::invalid_argument);
}

TEST_CASE("config validation guards") {
    ExperimentConfig cfg = default_config();
    cfg.target.num_cameras = 1;
    cfg.train.toggles.ci = true;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("CI requires C >= 2"),
                         std::invalid_argument);

    cfg = default_config();
    cfg.counterparts_per_sample = 10;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = default_config();
    cfg.test_identity_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("generated datasets keep domains disjoint and splits consistent") {
    const ExperimentConfig cfg = tiny_experiment();
    const GeneratedData data = generate_datasets(cfg);

    std::set<std::uint32_t> source_ids, train_ids, test_ids;
    for (const Sample& s : data.source.samples) source_ids.insert(s.identity);
    for (const Sample& s : data.target_train.samples) train_ids.insert(s.identity);
    for (const Sample& s : data.target_test.samples) test_ids.insert(s.identity);

    for (std::uint32_t id : train_ids) CHECK(source_ids.count(id) == 0);
    for (std::uint32_t id : test_ids) {
        CHECK(source_ids.count(id) == 0);
        CHECK(train_ids.count(id) == 0);
    }
    CHECK(test_ids.size() == 2);   // 25% of 8 identities
    CHECK(train_ids.size() == 6);

    // counterparts only in the training split, one per other camera
    const std::size_t real = data.target_train.real_count();
    CHECK(data.target_train.samples.size() ==
          real + real * (cfg.target.num_cameras - 1));
    for (const Sample& s : data.target_test.samples) CHECK(s.counterpart_of == -1);
}

TEST_CASE("cmd_generate writes deterministic files") {
    const ExperimentConfig cfg = tiny_experiment();
    const fs::path dir_a = temp_dir("gen_a");
    const fs::path dir_b = temp_dir("gen_b");
    cmd_generate(cfg, dir_a);
    cmd_generate(cfg, dir_b);
    for (const char* name : {"source.imda", "target_train.imda", "target_test.imda"}) {
        CHECK(fs::exists(dir_a / name));
        CHECK(file_bytes(dir_a / name) == file_bytes(dir_b / name));
    }
}

TEST_CASE("cmd_train writes one metrics row per epoch") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.train.epochs = 1;
    const fs::path data_dir = temp_dir("train_data");
    const fs::path out_dir = temp_dir("train_out");
    cmd_generate(cfg, data_dir);
    const TrainOutcome outcome = cmd_train(cfg, data_dir, out_dir);
    CHECK(outcome.reports.size() == 1);

    std::ifstream csv(out_dir / "metrics.csv");
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == metrics_csv_header());
    CHECK(fs::exists(out_dir / "checkpoint.bin"));
    CHECK(fs::exists(out_dir / "summary.json"));
}

TEST_CASE("training twice produces byte-identical metrics files") {
    const ExperimentConfig cfg = tiny_experiment();
    const fs::path data_dir = temp_dir("det_data");
    cmd_generate(cfg, data_dir);
    const fs::path out_a = temp_dir("det_a");
    const fs::path out_b = temp_dir("det_b");
    cmd_train(cfg, data_dir, out_a);
    cmd_train(cfg, data_dir, out_b);
    CHECK(file_bytes(out_a / "metrics.csv") == file_bytes(out_b / "metrics.csv"));
}

TEST_CASE("resumed training matches the uninterrupted metrics rows") {
    const ExperimentConfig cfg = tiny_experiment();
    const fs::path data_dir = temp_dir("resume_data");
    cmd_generate(cfg, data_dir);

    const fs::path out_half = temp_dir("resume_half");
    cmd_train(cfg, data_dir, out_half, std::nullopt, /*stop_after=*/2);

    const fs::path out_rest = temp_dir("resume_rest");
    cmd_train(cfg, data_dir, out_rest, out_half / "checkpoint.bin");

    const fs::path out_full = temp_dir("resume_full");
    cmd_train(cfg, data_dir, out_full);

    // rows 1..2 from the first run plus rows 3..4 from the resumed run must
    // equal the uninterrupted run's rows
    std::vector<std::string> combined, full;
    std::string line;
    std::ifstream a(out_half / "metrics.csv");
    std::getline(a, line);  // header
    while (std::getline(a, line)) combined.push_back(line);
    std::ifstream b(out_rest / "metrics.csv");
    std::getline(b, line);
    while (std::getline(b, line)) combined.push_back(line);
    std::ifstream c(out_full / "metrics.csv");
    std::getline(c, line);
    while (std::getline(c, line)) full.push_back(line);
    CHECK(combined == full);
}

TEST_CASE("cmd_eval reproduces the final training metrics") {
    const ExperimentConfig cfg = tiny_experiment();
    const fs::path data_dir = temp_dir("eval_data");
    const fs::path out_dir = temp_dir("eval_out");
    cmd_generate(cfg, data_dir);
    const TrainOutcome outcome = cmd_train(cfg, data_dir, out_dir);
    const RetrievalMetrics m = cmd_eval(cfg, out_dir / "checkpoint.bin", data_dir);
    CHECK(m.rank1 == doctest::Approx(outcome.final_metrics.rank1));
    CHECK(m.map == doctest::Approx(outcome.final_metrics.map));
}

TEST_CASE("ablation grid has six rows in table order") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.train.epochs = 2;
    const GeneratedData data = generate_datasets(cfg);
    const std::vector<GridRow> rows = run_ablation_grid(cfg, data);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].name == "train_on_target");
    CHECK(rows[1].name == "source_only");
    CHECK(rows[2].name == "ei");
    CHECK(rows[3].name == "ei_ci");
    CHECK(rows[4].name == "ei_ni");
    CHECK(rows[5].name == "ei_ci_ni");
    for (const GridRow& row : rows) {
        CHECK(row.final_report.rank1 >= 0.0);
        CHECK(row.final_report.rank1 <= 1.0);
    }
}

TEST_CASE("gradient check suite passes and the negative control fails") {
    const GradCheckSuite suite = run_gradcheck_suite(2);
    CHECK(suite.all_passed);
    CHECK(suite.entries.size() >= 6);
    for (const GradCheckEntry& e : suite.entries) {
        CHECK(e.report.passed);
        CHECK(e.instances >= 2);
    }

    const GradCheckSuite corrupted = run_gradcheck_suite(2, /*corrupt_one=*/true);
    CHECK_FALSE(corrupted.all_passed);
}
