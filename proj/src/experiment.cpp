#include "imda/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "imda/errors.hpp"
#include "imda/gpp.hpp"
#include "imda/losses.hpp"

namespace imda {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw std::invalid_argument("config: unknown key '" + where + it.key() + "'");
        }
    }
}

void parse_domain(const json& j, DomainSpec& spec, const std::string& where) {
    check_keys(j,
               {"num_identities", "samples_per_identity", "num_cameras", "in_dim",
                "cluster_spread", "camera_strength", "shift_strength", "seed",
                "nuisance_rank", "nuisance_share", "nuisance_seed"},
               where);
    spec.num_identities = j.value("num_identities", spec.num_identities);
    spec.samples_per_identity = j.value("samples_per_identity", spec.samples_per_identity);
    spec.num_cameras = j.value("num_cameras", spec.num_cameras);
    spec.in_dim = j.value("in_dim", spec.in_dim);
    spec.cluster_spread = j.value("cluster_spread", spec.cluster_spread);
    spec.camera_strength = j.value("camera_strength", spec.camera_strength);
    spec.shift_strength = j.value("shift_strength", spec.shift_strength);
    spec.seed = j.value("seed", spec.seed);
    spec.nuisance_rank = j.value("nuisance_rank", spec.nuisance_rank);
    spec.nuisance_share = j.value("nuisance_share", spec.nuisance_share);
    spec.nuisance_seed = j.value("nuisance_seed", spec.nuisance_seed);
}

json dump_domain(const DomainSpec& spec) {
    json j;
    j["num_identities"] = spec.num_identities;
    j["samples_per_identity"] = spec.samples_per_identity;
    j["num_cameras"] = spec.num_cameras;
    j["in_dim"] = spec.in_dim;
    j["cluster_spread"] = spec.cluster_spread;
    j["camera_strength"] = spec.camera_strength;
    j["shift_strength"] = spec.shift_strength;
    j["seed"] = spec.seed;
    j["nuisance_rank"] = spec.nuisance_rank;
    j["nuisance_share"] = spec.nuisance_share;
    j["nuisance_seed"] = spec.nuisance_seed;
    return j;
}

void parse_train(const json& j, TrainConfig& cfg) {
    check_keys(j,
               {"beta", "k_candidates", "mu", "alpha_base", "vns_k", "batch_size", "epochs",
                "ni_start_epoch", "gpp_start_epoch", "ei", "ci", "ni", "neighbor_mode", "seed",
                "lr", "cls_lr_mult", "gpp_lr", "weight_decay", "threads", "cross_camera_eval", "eval_every",
                "embed_hidden", "embed_dim"},
               "train.");
    cfg.beta = j.value("beta", cfg.beta);
    cfg.k_candidates = j.value("k_candidates", cfg.k_candidates);
    cfg.mu = j.value("mu", cfg.mu);
    cfg.alpha_base = j.value("alpha_base", cfg.alpha_base);
    cfg.vns_k = j.value("vns_k", cfg.vns_k);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.ni_start_epoch = j.value("ni_start_epoch", cfg.ni_start_epoch);
    cfg.gpp_start_epoch = j.value("gpp_start_epoch", cfg.gpp_start_epoch);
    cfg.toggles.ei = j.value("ei", cfg.toggles.ei);
    cfg.toggles.ci = j.value("ci", cfg.toggles.ci);
    cfg.toggles.ni = j.value("ni", cfg.toggles.ni);
    if (j.contains("neighbor_mode")) {
        cfg.neighbor_mode = neighbor_mode_from_string(j["neighbor_mode"].get<std::string>());
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.cls_lr_mult = j.value("cls_lr_mult", cfg.cls_lr_mult);
    cfg.gpp_lr = j.value("gpp_lr", cfg.gpp_lr);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.cross_camera_eval = j.value("cross_camera_eval", cfg.cross_camera_eval);
    cfg.eval_every = j.value("eval_every", cfg.eval_every);
    cfg.embedder.hidden = j.value("embed_hidden", cfg.embedder.hidden);
    cfg.embedder.out_dim = j.value("embed_dim", cfg.embedder.out_dim);
}

json dump_train(const TrainConfig& cfg) {
    json j;
    j["beta"] = cfg.beta;
    j["k_candidates"] = cfg.k_candidates;
    j["mu"] = cfg.mu;
    j["alpha_base"] = cfg.alpha_base;
    j["vns_k"] = cfg.vns_k;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["ni_start_epoch"] = cfg.ni_start_epoch;
    j["gpp_start_epoch"] = cfg.gpp_start_epoch;
    j["ei"] = cfg.toggles.ei;
    j["ci"] = cfg.toggles.ci;
    j["ni"] = cfg.toggles.ni;
    j["neighbor_mode"] = to_string(cfg.neighbor_mode);
    j["seed"] = cfg.seed;
    j["lr"] = cfg.lr;
    j["cls_lr_mult"] = cfg.cls_lr_mult;
    j["gpp_lr"] = cfg.gpp_lr;
    j["weight_decay"] = cfg.weight_decay;
    j["threads"] = cfg.threads;
    j["cross_camera_eval"] = cfg.cross_camera_eval;
    j["eval_every"] = cfg.eval_every;
    j["embed_hidden"] = cfg.embedder.hidden;
    j["embed_dim"] = cfg.embedder.out_dim;
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    source.validate();
    target.validate();
    train.validate();
    if (source.in_dim != target.in_dim) {
        throw std::invalid_argument("config: source and target in_dim must match");
    }
    if (train.embedder.in_dim != source.in_dim) {
        throw std::invalid_argument("config: embedder in_dim must match the domains");
    }
    if (train.toggles.ci && target.num_cameras < 2) {
        throw std::invalid_argument("config: CI requires C >= 2");
    }
    if (counterparts_per_sample > static_cast<int>(target.num_cameras) - 1) {
        throw std::invalid_argument("config: counterparts_per_sample exceeds C - 1");
    }
    if (test_identity_fraction <= 0.0 || test_identity_fraction >= 1.0) {
        throw std::invalid_argument("config: test_identity_fraction must be in (0, 1)");
    }
    if (target.num_identities < 2) {
        throw std::invalid_argument("config: target needs at least 2 identities to split");
    }
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.source.num_identities = 50;
    cfg.source.samples_per_identity = 12;
    cfg.source.num_cameras = 4;
    cfg.source.in_dim = 32;
    cfg.source.cluster_spread = 0.15;
    cfg.source.camera_strength = 0.1;
    cfg.source.shift_strength = 0.0;
    cfg.source.seed = 42;

    cfg.target = cfg.source;
    cfg.target.num_identities = 40;
    cfg.target.num_cameras = 5;
    cfg.target.shift_strength = 0.2;
    cfg.target.seed = 43;

    cfg.train = TrainConfig{};
    cfg.train.embedder.in_dim = cfg.source.in_dim;
    return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg = default_config();
    check_keys(j,
               {"source", "target", "train", "output_dir", "counterparts_per_sample",
                "test_identity_fraction"},
               "");
    if (j.contains("source")) parse_domain(j["source"], cfg.source, "source.");
    if (j.contains("target")) parse_domain(j["target"], cfg.target, "target.");
    if (j.contains("train")) parse_train(j["train"], cfg.train);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.counterparts_per_sample = j.value("counterparts_per_sample", cfg.counterparts_per_sample);
    cfg.test_identity_fraction = j.value("test_identity_fraction", cfg.test_identity_fraction);
    cfg.train.embedder.in_dim = cfg.source.in_dim;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
    json j;
    j["source"] = dump_domain(cfg.source);
    j["target"] = dump_domain(cfg.target);
    j["train"] = dump_train(cfg.train);
    j["output_dir"] = cfg.output_dir;
    j["counterparts_per_sample"] = cfg.counterparts_per_sample;
    j["test_identity_fraction"] = cfg.test_identity_fraction;
    return j.dump(2) + "\n";
}

GeneratedData generate_datasets(const ExperimentConfig& cfg) {
    cfg.validate();
    DomainSpec src_spec = cfg.source;
    DomainSpec tgt_spec = cfg.target;
    tgt_spec.identity_label_offset =
        src_spec.identity_label_offset + static_cast<std::uint32_t>(src_spec.num_identities);

    const Domain src = generate_domain(src_spec);
    const Domain tgt = generate_domain(tgt_spec);

    GeneratedData out;
    out.source = dataset_from_samples(src.samples, src_spec.in_dim, src_spec.num_cameras);

    // last ceil-rounded share of identities held out as the test split
    const std::size_t n_ids = tgt_spec.num_identities;
    std::size_t n_test = static_cast<std::size_t>(
        std::lround(cfg.test_identity_fraction * static_cast<double>(n_ids)));
    n_test = std::clamp<std::size_t>(n_test, 1, n_ids - 1);
    const std::uint32_t first_test_id =
        tgt_spec.identity_label_offset + static_cast<std::uint32_t>(n_ids - n_test);

    const std::size_t how_many = cfg.counterparts_per_sample < 0
                                     ? tgt_spec.num_cameras - 1
                                     : static_cast<std::size_t>(cfg.counterparts_per_sample);

    std::vector<Sample> train_samples, test_samples;
    std::vector<std::size_t> train_domain_index;  // domain index of each train real sample
    for (std::size_t i = 0; i < tgt.samples.size(); ++i) {
        if (tgt.samples[i].identity >= first_test_id) {
            test_samples.push_back(tgt.samples[i]);
        } else {
            train_domain_index.push_back(i);
            train_samples.push_back(tgt.samples[i]);
        }
    }
    const std::size_t real_count = train_samples.size();
    for (std::size_t pos = 0; pos < real_count; ++pos) {
        for (Sample cp : camstyle_counterparts(tgt, train_domain_index[pos], how_many)) {
            cp.counterpart_of = static_cast<std::int32_t>(pos);
            train_samples.push_back(std::move(cp));
        }
    }

    out.target_train =
        dataset_from_samples(std::move(train_samples), tgt_spec.in_dim, tgt_spec.num_cameras);
    out.target_test =
        dataset_from_samples(std::move(test_samples), tgt_spec.in_dim, tgt_spec.num_cameras);
    return out;
}

void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const GeneratedData data = generate_datasets(cfg);
    std::filesystem::create_directories(out_dir);
    save_dataset(out_dir / "source.imda", data.source);
    save_dataset(out_dir / "target_train.imda", data.target_train);
    save_dataset(out_dir / "target_test.imda", data.target_test);

    const auto summarize = [](const char* name, const Dataset& d) {
        std::set<std::uint32_t> ids;
        std::size_t counterparts = 0;
        for (const Sample& s : d.samples) {
            ids.insert(s.identity);
            if (s.counterpart_of >= 0) ++counterparts;
        }
        std::printf("%-13s %5zu samples (%zu real, %zu counterparts), %zu identities, %zu cameras\n",
                    name, d.samples.size(), d.real_count(), counterparts, ids.size(),
                    d.num_cameras);
    };
    summarize("source", data.source);
    summarize("target_train", data.target_train);
    summarize("target_test", data.target_test);
}

std::string metrics_csv_header() {
    return "epoch,L_src,L_tgt,L_gpp,rank1,rank5,rank10,rank20,mAP,neigh_precision,neigh_recall";
}

std::string metrics_csv_row(const EpochReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", r.epoch,
                  r.l_src, r.l_tgt, r.l_gpp, r.rank1, r.rank5, r.rank10, r.rank20, r.map,
                  r.neigh_precision, r.neigh_recall);
    return buf;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochReport>& reports) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << metrics_csv_header() << '\n';
    for (const EpochReport& r : reports) out << metrics_csv_row(r) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

json metrics_json(const RetrievalMetrics& m) {
    json j;
    j["rank1"] = m.rank1;
    j["rank5"] = m.rank5;
    j["rank10"] = m.rank10;
    j["rank20"] = m.rank20;
    j["mAP"] = m.map;
    return j;
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume,
                       std::size_t stop_after) {
    cfg.validate();
    const Dataset source = load_dataset(data_dir / "source.imda");
    const Dataset target_train = load_dataset(data_dir / "target_train.imda");
    const Dataset target_test = load_dataset(data_dir / "target_test.imda");

    std::filesystem::create_directories(out_dir);
    Trainer trainer(cfg.train, source, target_train, target_test);
    if (resume) trainer.load_checkpoint(*resume);

    std::ofstream csv(out_dir / "metrics.csv");
    if (!csv) throw IoError("cannot open metrics.csv under " + out_dir.string());
    csv << metrics_csv_header() << '\n';

    const std::size_t last_epoch =
        stop_after > 0 ? std::min(stop_after, cfg.train.epochs) : cfg.train.epochs;
    TrainOutcome outcome;
    double total_seconds = 0.0;
    while (trainer.current_epoch() < last_epoch) {
        const EpochReport r = trainer.advance_epoch();
        csv << metrics_csv_row(r) << '\n';
        csv.flush();
        trainer.save_checkpoint(out_dir / "checkpoint.bin");
        outcome.reports.push_back(r);
        total_seconds += r.seconds;
    }
    if (!outcome.reports.empty()) {
        const EpochReport& last = outcome.reports.back();
        outcome.final_metrics = {last.rank1, last.rank5, last.rank10, last.rank20, last.map};
    } else {
        outcome.final_metrics = trainer.evaluate();
    }

    json summary;
    summary["epochs_run"] = outcome.reports.size();
    summary["final"] = metrics_json(outcome.final_metrics);
    summary["total_seconds"] = total_seconds;
    summary["config"] = json::parse(dump_config(cfg));
    std::ofstream js(out_dir / "summary.json");
    js << summary.dump(2) << '\n';
    if (!js) throw IoError("write failed for summary.json under " + out_dir.string());
    return outcome;
}

RetrievalMetrics cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& data_dir) {
    cfg.validate();
    const Dataset source = load_dataset(data_dir / "source.imda");
    const Dataset target_train = load_dataset(data_dir / "target_train.imda");
    const Dataset target_test = load_dataset(data_dir / "target_test.imda");
    Trainer trainer(cfg.train, source, target_train, target_test);
    trainer.load_checkpoint(checkpoint);
    const RetrievalMetrics m = trainer.evaluate();
    std::printf("epoch %zu: rank1=%.4f rank5=%.4f rank10=%.4f rank20=%.4f mAP=%.4f\n",
                trainer.current_epoch(), m.rank1, m.rank5, m.rank10, m.rank20, m.map);
    return m;
}

namespace {

EpochReport run_grid_entry(const TrainConfig& base, const Toggles& toggles,
                           const Dataset& supervised, const Dataset& target_train,
                           const Dataset& target_test) {
    TrainConfig tc = base;
    tc.toggles = toggles;
    Trainer trainer(tc, supervised, target_train, target_test);
    trainer.run();
    if (!trainer.reports().empty()) return trainer.reports().back();
    EpochReport r;
    const RetrievalMetrics m = trainer.evaluate();
    r.rank1 = m.rank1;
    r.rank5 = m.rank5;
    r.rank10 = m.rank10;
    r.rank20 = m.rank20;
    r.map = m.map;
    return r;
}

}  // namespace

std::vector<GridRow> run_ablation_grid(const ExperimentConfig& cfg, const GeneratedData& data) {
    const Toggles off{false, false, false};
    std::vector<GridRow> rows;
    rows.push_back({"train_on_target", off,
                    run_grid_entry(cfg.train, off, data.target_train, data.target_train,
                                   data.target_test)});
    rows.push_back({"source_only", off,
                    run_grid_entry(cfg.train, off, data.source, data.target_train,
                                   data.target_test)});
    const Toggles combos[4] = {{true, false, false}, {true, true, false},
                               {true, false, true}, {true, true, true}};
    const char* names[4] = {"ei", "ei_ci", "ei_ni", "ei_ci_ni"};
    for (int i = 0; i < 4; ++i) {
        rows.push_back({names[i], combos[i],
                        run_grid_entry(cfg.train, combos[i], data.source, data.target_train,
                                       data.target_test)});
    }
    return rows;
}

std::vector<GridRow> cmd_grid(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                              const std::filesystem::path& out_dir) {
    cfg.validate();
    GeneratedData data;
    data.source = load_dataset(data_dir / "source.imda");
    data.target_train = load_dataset(data_dir / "target_train.imda");
    data.target_test = load_dataset(data_dir / "target_test.imda");

    std::filesystem::create_directories(out_dir);
    const Toggles off{false, false, false};
    const struct {
        const char* name;
        Toggles toggles;
        bool on_target;
    } entries[6] = {
        {"train_on_target", off, true},
        {"source_only", off, false},
        {"ei", {true, false, false}, false},
        {"ei_ci", {true, true, false}, false},
        {"ei_ni", {true, false, true}, false},
        {"ei_ci_ni", {true, true, true}, false},
    };

    std::vector<GridRow> rows;
    std::ofstream table(out_dir / "grid_summary.csv");
    if (!table) throw IoError("cannot open grid_summary.csv under " + out_dir.string());
    table << "name,EI,CI,NI,rank1,rank5,rank10,rank20,mAP\n";
    for (const auto& entry : entries) {
        TrainConfig tc = cfg.train;
        tc.toggles = entry.toggles;
        Trainer trainer(tc, entry.on_target ? data.target_train : data.source, data.target_train,
                        data.target_test);
        trainer.run();
        write_metrics_csv(out_dir / (std::string("metrics_") + entry.name + ".csv"),
                          trainer.reports());
        EpochReport final_report;
        if (!trainer.reports().empty()) {
            final_report = trainer.reports().back();
        } else {
            const RetrievalMetrics m = trainer.evaluate();
            final_report.rank1 = m.rank1;
            final_report.rank5 = m.rank5;
            final_report.rank10 = m.rank10;
            final_report.rank20 = m.rank20;
            final_report.map = m.map;
        }
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g",
                      entry.name, entry.toggles.ei ? 1 : 0, entry.toggles.ci ? 1 : 0,
                      entry.toggles.ni ? 1 : 0, final_report.rank1, final_report.rank5,
                      final_report.rank10, final_report.rank20, final_report.map);
        table << buf << '\n';
        std::printf("%-16s rank1=%.4f mAP=%.4f\n", entry.name, final_report.rank1,
                    final_report.map);
        rows.push_back({entry.name, entry.toggles, final_report});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Finite-difference suite
// ---------------------------------------------------------------------------

namespace {

ExemplarMemory random_memory(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    ExemplarMemory mem(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        Vec f(d);
        for (double& v : f) v = normal(rng);
        mem.update_slot(i, l2_normalize(f), 0.0);
    }
    return mem;
}

Vec random_unit(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(d);
    for (double& x : v) x = normal(rng);
    return l2_normalize(v);
}

// Network weight gradients span many orders of magnitude; a single step
// size cannot keep the difference quotient accurate for both the large and
// the near-zero entries. Each entry is compared at two valid step sizes and
// judged by the better match.
GradCheckReport fd_check_two_eps(const std::function<double(const Matrix&)>& loss_fn,
                                 const Matrix& point, const Matrix& analytic_grad,
                                 double tolerance) {
    const double eps_values[2] = {1e-6, 1e-4};
    GradCheckReport report;
    Matrix probe = point;
    for (std::size_t r = 0; r < point.rows; ++r) {
        for (std::size_t c = 0; c < point.cols; ++c) {
            const double saved = probe(r, c);
            const double analytic = analytic_grad(r, c);
            double best = std::numeric_limits<double>::infinity();
            for (double eps : eps_values) {
                probe(r, c) = saved + eps;
                const double f_plus = loss_fn(probe);
                probe(r, c) = saved - eps;
                const double f_minus = loss_fn(probe);
                const double numeric = (f_plus - f_minus) / (2.0 * eps);
                const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
                best = std::min(best, std::fabs(analytic - numeric) / denom);
            }
            probe(r, c) = saved;
            if (best > report.max_relative_error) {
                report.max_relative_error = best;
                report.worst_row = r;
                report.worst_col = c;
            }
        }
    }
    report.passed = report.max_relative_error < tolerance;
    return report;
}

GradCheckReport fd_check_two_eps_vec(const std::function<double(const Vec&)>& loss_fn,
                                     const Vec& point, const Vec& analytic_grad,
                                     double tolerance) {
    Matrix p(1, point.size());
    p.data = point;
    Matrix g(1, analytic_grad.size());
    g.data = analytic_grad;
    return fd_check_two_eps([&](const Matrix& m) { return loss_fn(m.data); }, p, g, tolerance);
}

struct CheckAccumulator {
    GradCheckEntry entry;
    bool all_passed = true;

    void fold(const GradCheckReport& report) {
        ++entry.instances;
        all_passed = all_passed && report.passed;
        if (report.max_relative_error >= entry.report.max_relative_error) {
            entry.report.max_relative_error = report.max_relative_error;
            entry.report.worst_row = report.worst_row;
            entry.report.worst_col = report.worst_col;
        }
        entry.report.passed = all_passed;
    }
};

}  // namespace

GradCheckSuite run_gradcheck_suite(std::size_t instances_per_check, bool corrupt_one,
                                   std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> n_dist(3, 50);
    std::uniform_int_distribution<std::size_t> d_dist(2, 16);
    const double betas[3] = {0.05, 0.5, 1.0};

    GradCheckSuite suite;
    const auto push = [&suite](CheckAccumulator& acc) {
        suite.entries.push_back(acc.entry);
        suite.all_passed = suite.all_passed && acc.entry.report.passed;
    };

    // source cross-entropy w.r.t. logits
    {
        CheckAccumulator acc{{"source_ce_logits", {}, 0}};
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = 0; i < instances_per_check; ++i) {
            const std::size_t m = 3 + i % 10;
            Vec logits(m);
            for (double& v : logits) v = normal(rng);
            const std::size_t label = i % m;
            LossValue lv = source_ce_loss(logits, label);
            if (corrupt_one && i == 0) lv.grad_input[0] += 0.05;
            acc.fold(finite_diff_check_vec(
                [&](const Vec& probe) { return source_ce_loss(probe, label).value; }, logits,
                lv.grad_input, 1e-5, 1e-4));
        }
        push(acc);
    }

    // invariance losses w.r.t. the embedding
    {
        CheckAccumulator self{{"ei_ci_loss_f", {}, 0}};
        CheckAccumulator multi{{"target_loss_f", {}, 0}};
        for (std::size_t i = 0; i < instances_per_check; ++i) {
            const std::size_t n = n_dist(rng);
            const std::size_t d = d_dist(rng);
            const double beta = betas[i % 3];
            const ExemplarMemory mem = random_memory(n, d, rng);
            const Vec f = random_unit(d, rng);
            std::uniform_int_distribution<std::size_t> slot_dist(0, n - 1);
            const std::size_t anchor = slot_dist(rng);

            const LossValue self_lv = ei_ci_loss(mem, anchor, f, beta);
            self.fold(finite_diff_check_vec(
                [&](const Vec& probe) { return ei_ci_loss(mem, anchor, probe, beta).value; }, f,
                self_lv.grad_input, 1e-5, 1e-4));

            std::vector<std::size_t> neighbors;
            for (std::size_t j = 0; j < n && neighbors.size() < 3; ++j) {
                if (j != anchor) neighbors.push_back(j);
            }
            const NeighborSet neigh = NeighborSet::with_neighbors(anchor, neighbors);
            const LossValue multi_lv = target_loss(mem, neigh, f, beta);
            multi.fold(finite_diff_check_vec(
                [&](const Vec& probe) { return target_loss(mem, neigh, probe, beta).value; }, f,
                multi_lv.grad_input, 1e-5, 1e-4));
        }
        push(self);
        push(multi);
    }

    // gradient through the output normalization
    {
        CheckAccumulator acc{{"normalize_backward", {}, 0}};
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = 0; i < instances_per_check; ++i) {
            const std::size_t d = d_dist(rng);
            Vec u(d), g(d);
            for (double& v : u) v = normal(rng);
            for (double& v : g) v = normal(rng);
            if (l2_norm(u) < 0.1) u[0] += 1.0;
            EmbedCache cache;
            cache.pre_norm = u;
            cache.f = l2_normalize(u);
            cache.pre_norm_len = l2_norm(u);
            const Vec grad = backward_through_normalize(g, cache);
            acc.fold(finite_diff_check_vec(
                [&](const Vec& probe) { return dot(g, l2_normalize(probe)); }, u, grad, 1e-5,
                1e-4));
        }
        push(acc);
    }

    // embedder parameters through the target loss
    {
        CheckAccumulator fc1{{"embedder_fc1_w", {}, 0}};
        CheckAccumulator fc2{{"embedder_fc2_w", {}, 0}};
        CheckAccumulator cls{{"identity_classifier_w", {}, 0}};
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = 0; i < instances_per_check; ++i) {
            EmbedderConfig ecfg{5, 7, 4};
            Embedder embedder(ecfg, rng());
            ExemplarMemory mem = random_memory(6, ecfg.out_dim, rng);
            Vec x(ecfg.in_dim);
            const double beta = betas[i % 3];
            const NeighborSet neigh = NeighborSet::with_neighbors(1, {0, 3});

            EmbedCache cache;
            for (int attempt = 0; attempt < 200; ++attempt) {
                for (double& v : x) v = normal(rng);
                embedder.embed(x, &cache);
                double kink_margin = 1.0;
                for (double v : cache.pre_act) kink_margin = std::min(kink_margin, std::fabs(v));
                if (kink_margin > 1e-4) break;
            }
            const Vec f = embedder.embed(x, &cache);
            const LossValue lv = target_loss(mem, neigh, f, beta);
            const Embedder::Gradients grads = embedder.backward(cache, lv.grad_input);

            const auto loss_with = [&](const Embedder& e) {
                return target_loss(mem, neigh, e.embed(x), beta).value;
            };
            fc1.fold(finite_diff_check(
                [&](const Matrix& probe) {
                    Embedder e = embedder;
                    e.w1 = probe;
                    return loss_with(e);
                },
                embedder.w1, grads.dw1, 1e-5, 1e-4));
            fc2.fold(finite_diff_check(
                [&](const Matrix& probe) {
                    Embedder e = embedder;
                    e.w2 = probe;
                    return loss_with(e);
                },
                embedder.w2, grads.dw2, 1e-5, 1e-4));

            IdentityClassifier classifier(ecfg.out_dim, 5, rng());
            const Vec logits = classifier.logits(f);
            const LossValue ce = source_ce_loss(logits, i % 5);
            const IdentityClassifier::Gradients cgrads = classifier.backward(f, ce.grad_input);
            cls.fold(finite_diff_check(
                [&](const Matrix& probe) {
                    IdentityClassifier c = classifier;
                    c.weight = probe;
                    return source_ce_loss(c.logits(f), i % 5).value;
                },
                classifier.weight, cgrads.dweight, 1e-5, 1e-4));
        }
        push(fc1);
        push(fc2);
        push(cls);
    }

    // graph network and positive classifier parameters
    {
        CheckAccumulator gcn{{"gcn_weights", {}, 0}};
        CheckAccumulator cfc1{{"classifier_fc1_w", {}, 0}};
        CheckAccumulator cbn{{"classifier_bn_gamma_beta", {}, 0}};
        CheckAccumulator cprelu{{"classifier_prelu_slope", {}, 0}};
        CheckAccumulator cfc2{{"classifier_fc2_w", {}, 0}};
        std::uniform_int_distribution<std::size_t> k_dist(2, 10);
        std::uniform_int_distribution<std::size_t> gd_dist(4, 8);
        for (std::size_t i = 0; i < instances_per_check; ++i) {
            const std::size_t layers = 1 + i % 4;

            // redraw instances whose batch-norm variance collapses (a fully
            // dead GCN pins every PReLU input on its kink, where central
            // differences are undefined)
            std::size_t k = 0;
            GppConfig gcfg;
            CandidateGraph graph;
            GcnCache gcn_cache;
            ClassifierCache cls_cache;
            ExemplarMemory mem(1, 1);
            GppNetwork net(GppConfig::classifier_only(1), 0);
            for (int attempt = 0; attempt < 200; ++attempt) {
                k = k_dist(rng);
                const std::size_t d = gd_dist(rng);
                gcfg = GppConfig{};
                gcfg.gcn_dims.push_back(d);
                for (std::size_t l = 0; l < layers; ++l) {
                    gcfg.gcn_dims.push_back(std::max<std::size_t>(gcfg.gcn_dims.back() / 2, 2));
                }
                gcfg.classifier_hidden = std::max<std::size_t>(gcfg.gcn_dims.back() / 2, 2);
                net = GppNetwork(gcfg, rng());
                mem = random_memory(k + 4, d, rng);
                graph = build_graph(mem, 0, random_unit(d, rng), k);
                const Matrix z = gcn_forward(graph, net, &gcn_cache);
                classify_positive(z, net, true, &cls_cache);
                double min_var = cls_cache.var[0];
                for (double v : cls_cache.var) min_var = std::min(min_var, v);
                if (min_var <= 1e-9) continue;
                // central differences are undefined on a kink; keep only
                // instances whose activations stay clear of every ReLU and
                // PReLU boundary
                double kink_margin = 1.0;
                for (const GcnLayerCache& layer : gcn_cache.layers) {
                    for (double v : layer.pre_act.data) {
                        kink_margin = std::min(kink_margin, std::fabs(v));
                    }
                }
                for (double v : cls_cache.bn_out.data) {
                    kink_margin = std::min(kink_margin, std::fabs(v));
                }
                if (kink_margin > 1e-4) break;
            }
            std::vector<int> labels(k);
            for (std::size_t j = 0; j < k; ++j) labels[j] = (rng() & 1) ? 1 : 0;
            const GppNetwork::Gradients grads =
                gpp_backward(graph, net, gcn_cache, cls_cache, labels);

            const auto loss_with = [&](const GppNetwork& n) {
                const Matrix zz = gcn_forward(graph, n);
                return gpp_loss(classify_positive(zz, n, true), labels);
            };
            for (std::size_t l = 0; l < net.gcn_weights.size(); ++l) {
                gcn.fold(fd_check_two_eps(
                    [&](const Matrix& probe) {
                        GppNetwork n = net;
                        n.gcn_weights[l] = probe;
                        return loss_with(n);
                    },
                    net.gcn_weights[l], grads.dgcn[l], 1e-4));
            }
            cfc1.fold(fd_check_two_eps(
                [&](const Matrix& probe) {
                    GppNetwork n = net;
                    n.fc1_w = probe;
                    return loss_with(n);
                },
                net.fc1_w, grads.dfc1_w, 1e-4));
            cbn.fold(fd_check_two_eps_vec(
                [&](const Vec& probe) {
                    GppNetwork n = net;
                    n.bn_gamma = probe;
                    return loss_with(n);
                },
                net.bn_gamma, grads.dbn_gamma, 1e-4));
            cbn.fold(fd_check_two_eps_vec(
                [&](const Vec& probe) {
                    GppNetwork n = net;
                    n.bn_beta = probe;
                    return loss_with(n);
                },
                net.bn_beta, grads.dbn_beta, 1e-4));
            cprelu.fold(fd_check_two_eps_vec(
                [&](const Vec& probe) {
                    GppNetwork n = net;
                    n.prelu_slope = probe[0];
                    return loss_with(n);
                },
                {net.prelu_slope}, {grads.dprelu_slope}, 1e-4));
            cfc2.fold(fd_check_two_eps(
                [&](const Matrix& probe) {
                    GppNetwork n = net;
                    n.fc2_w = probe;
                    return loss_with(n);
                },
                net.fc2_w, grads.dfc2_w, 1e-4));
        }
        push(gcn);
        push(cfc1);
        push(cbn);
        push(cprelu);
        push(cfc2);
    }

    return suite;
}

}  // namespace imda
