#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "imda/errors.hpp"
#include "imda/experiment.hpp"

namespace fs = std::filesystem;

namespace {

imda::ExperimentConfig config_for(const std::string& path) {
    if (path.empty()) return imda::default_config();
    return imda::load_config(path);
}

int run_gradcheck(std::size_t instances, bool negative_control) {
    const imda::GradCheckSuite suite = imda::run_gradcheck_suite(instances, negative_control);
    for (const imda::GradCheckEntry& e : suite.entries) {
        std::printf("[%s] %-26s max_rel=%.3e (%zu instances, worst at %zu,%zu)\n",
                    e.report.passed ? "PASS" : "FAIL", e.name.c_str(),
                    e.report.max_relative_error, e.instances, e.report.worst_row,
                    e.report.worst_col);
    }
    if (!suite.all_passed) {
        std::printf("gradient check FAILED\n");
        return 3;
    }
    std::printf("all gradient checks passed\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memory-based invariance learning for domain-adaptive embeddings"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_dir, out_dir, dump_path, checkpoint_path, resume_path;
    std::size_t threads = 0;
    std::size_t gradcheck_instances = 5;
    bool negative_control = false;

    CLI::App* config_cmd = app.add_subcommand("config", "configuration utilities");
    CLI::App* dump_cmd = config_cmd->add_subcommand("dump", "print the fully-populated config");
    dump_cmd->add_option("-c,--config", config_path, "config file (defaults when omitted)");
    dump_cmd->add_option("-o,--out", dump_path, "write to a file instead of stdout");

    CLI::App* generate_cmd = app.add_subcommand("generate", "generate synthetic dataset files");
    generate_cmd->add_option("-c,--config", config_path, "config file")->required();
    generate_cmd->add_option("-o,--out", data_dir, "output directory (default <output_dir>/data)");

    CLI::App* train_cmd = app.add_subcommand("train", "run the training schedule");
    train_cmd->add_option("-c,--config", config_path, "config file")->required();
    train_cmd->add_option("--data", data_dir, "dataset directory (default <output_dir>/data)");
    train_cmd->add_option("--out", out_dir, "run directory (default <output_dir>/train)");
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");
    train_cmd->add_option("--threads", threads, "worker threads (default from config)");
    std::size_t stop_after = 0;
    train_cmd->add_option("--stop-after", stop_after,
                          "halt after this epoch (scheduling unchanged; resumable)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval_cmd->add_option("-c,--config", config_path, "config file")->required();
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_dir, "dataset directory (default <output_dir>/data)");

    CLI::App* grid_cmd = app.add_subcommand("grid", "run the ablation grid");
    grid_cmd->add_option("-c,--config", config_path, "config file")->required();
    grid_cmd->add_option("--data", data_dir, "dataset directory (default <output_dir>/data)");
    grid_cmd->add_option("--out", out_dir, "output directory (default <output_dir>/grid)");

    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference check of all analytic gradients");
    gradcheck_cmd->add_option("--instances", gradcheck_instances, "random instances per check");
    gradcheck_cmd->add_flag("--negative-control", negative_control,
                            "corrupt one gradient on purpose; the run must fail");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dump_cmd->parsed()) {
            const std::string text = imda::dump_config(config_for(config_path));
            if (dump_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(dump_path);
                if (!out) throw imda::IoError("cannot open " + dump_path + " for writing");
                out << text;
            }
            return 0;
        }
        if (gradcheck_cmd->parsed()) {
            return run_gradcheck(gradcheck_instances, negative_control);
        }

        const imda::ExperimentConfig cfg = config_for(config_path);
        const fs::path data =
            data_dir.empty() ? fs::path(cfg.output_dir) / "data" : fs::path(data_dir);

        if (generate_cmd->parsed()) {
            imda::cmd_generate(cfg, data);
            return 0;
        }
        if (train_cmd->parsed()) {
            imda::ExperimentConfig run_cfg = cfg;
            if (threads > 0) run_cfg.train.threads = threads;
            const fs::path out =
                out_dir.empty() ? fs::path(cfg.output_dir) / "train" : fs::path(out_dir);
            std::optional<fs::path> resume;
            if (!resume_path.empty()) resume = fs::path(resume_path);
            const imda::TrainOutcome outcome =
                imda::cmd_train(run_cfg, data, out, resume, stop_after);
            std::printf("finished: %zu epoch(s), rank1=%.4f mAP=%.4f\n", outcome.reports.size(),
                        outcome.final_metrics.rank1, outcome.final_metrics.map);
            return 0;
        }
        if (eval_cmd->parsed()) {
            imda::cmd_eval(cfg, checkpoint_path, data);
            return 0;
        }
        if (grid_cmd->parsed()) {
            const fs::path out =
                out_dir.empty() ? fs::path(cfg.output_dir) / "grid" : fs::path(out_dir);
            imda::cmd_grid(cfg, data, out);
            return 0;
        }
    } catch (const imda::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const imda::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
