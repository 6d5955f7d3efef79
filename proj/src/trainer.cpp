#include "imda/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>
#include <utility>

#include "imda/errors.hpp"
#include "imda/numerics.hpp"

namespace imda {

namespace {

constexpr char kCheckpointMagic[8] = {'I', 'M', 'D', 'A', 'C', 'K', 'P', '1'};

// splitmix64 finisher, used to derive independent per-purpose seeds
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

// Whole-epoch randomness depends only on (seed, epoch), so a resumed run
// replays exactly what an uninterrupted run would have drawn.
std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
    return std::mt19937_64(mix_seed(seed, 0x100 + epoch));
}

template <typename Fn>
void parallel_for(std::size_t total, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || total <= 1) {
        for (std::size_t i = 0; i < total; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, total);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < total; i += workers) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

std::vector<std::size_t> batch_slice(const std::vector<std::size_t>& order, std::size_t iter,
                                     std::size_t batch_size) {
    std::vector<std::size_t> batch;
    const std::size_t n = order.size();
    const std::size_t take = std::min(batch_size, n);
    batch.reserve(take);
    for (std::size_t j = 0; j < take; ++j) {
        batch.push_back(order[(iter * batch_size + j) % n]);
    }
    return batch;
}

void check_finite(double value, const char* term) {
    if (!std::isfinite(value)) {
        throw NumericalError(std::string(term) + " is not finite; aborting training");
    }
}

void decay_weights(Embedder& embedder, double lr, double weight_decay) {
    if (weight_decay <= 0.0) return;
    const double factor = 1.0 - lr * weight_decay;
    for (double& v : embedder.w1.data) v *= factor;
    for (double& v : embedder.w2.data) v *= factor;
}

}  // namespace

std::string to_string(NeighborMode mode) {
    switch (mode) {
        case NeighborMode::VNS: return "VNS";
        case NeighborMode::VariantVNS: return "VariantVNS";
        case NeighborMode::VariantGPP: return "VariantGPP";
        case NeighborMode::GPP: return "GPP";
    }
    return "GPP";
}

NeighborMode neighbor_mode_from_string(const std::string& name) {
    if (name == "VNS") return NeighborMode::VNS;
    if (name == "VariantVNS") return NeighborMode::VariantVNS;
    if (name == "VariantGPP") return NeighborMode::VariantGPP;
    if (name == "GPP") return NeighborMode::GPP;
    throw std::invalid_argument("unknown neighbor mode: " + name);
}

void TrainConfig::validate() const {
    if (beta <= 0.0 || beta > 1.0) throw std::invalid_argument("config: beta must be in (0, 1]");
    if (mu < 0.0 || mu > 1.0) throw std::invalid_argument("config: mu must be in [0, 1]");
    if (alpha_base < 0.0) throw std::invalid_argument("config: alpha_base must be nonnegative");
    if (batch_size == 0) throw std::invalid_argument("config: batch_size must be at least 1");
    if (vns_k == 0) throw std::invalid_argument("config: vns_k must be at least 1");
    if (lr <= 0.0 || gpp_lr <= 0.0 || cls_lr_mult <= 0.0) {
        throw std::invalid_argument("config: learning rates must be positive");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be nonnegative");
    if (eval_every == 0) throw std::invalid_argument("config: eval_every must be at least 1");
    const bool uses_gpp = neighbor_mode != NeighborMode::VNS;
    if (uses_gpp && toggles.ni && ni_start_epoch < gpp_start_epoch) {
        throw std::invalid_argument(
            "config: ni_start_epoch must be >= gpp_start_epoch when neighbors come from the "
            "positive predictor");
    }
}

std::size_t TrainConfig::effective_k(std::size_t target_slots) const {
    if (k_candidates > 0) return k_candidates;
    const std::size_t quarter = std::max<std::size_t>(target_slots / 4, 1);
    return std::min<std::size_t>(100, quarter);
}

double TrainConfig::lr_at(std::size_t epoch) const {
    return epoch > (2 * epochs) / 3 ? lr * 0.1 : lr;
}

double TrainConfig::gpp_lr_at(std::size_t epoch) const {
    return epoch > (2 * epochs) / 3 ? gpp_lr * 0.1 : gpp_lr;
}

void query_gallery_split(const Dataset& test, std::vector<std::size_t>& queries,
                         std::vector<std::size_t>& gallery) {
    queries.clear();
    gallery.clear();
    std::set<std::pair<std::uint32_t, std::uint16_t>> seen;
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        const Sample& s = test.samples[i];
        if (seen.emplace(s.identity, s.camera).second) {
            queries.push_back(i);
        } else {
            gallery.push_back(i);
        }
    }
}

namespace {

RetrievalMetrics retrieval_from_features(const Matrix& features, const Dataset& test,
                                         const std::vector<std::size_t>& queries,
                                         const std::vector<std::size_t>& gallery,
                                         bool cross_camera) {
    const std::size_t d = features.cols;
    Matrix qf(queries.size(), d), gf(gallery.size(), d);
    std::vector<std::uint32_t> qids(queries.size()), gids(gallery.size());
    std::vector<std::uint16_t> qcams(queries.size()), gcams(gallery.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::copy_n(features.row(queries[i]), d, qf.row(i));
        qids[i] = test.samples[queries[i]].identity;
        qcams[i] = test.samples[queries[i]].camera;
    }
    for (std::size_t i = 0; i < gallery.size(); ++i) {
        std::copy_n(features.row(gallery[i]), d, gf.row(i));
        gids[i] = test.samples[gallery[i]].identity;
        gcams[i] = test.samples[gallery[i]].camera;
    }
    const auto lists = rank_gallery(qf, qids, qcams, gf, gids, gcams, cross_camera);
    const CmcResult c = cmc(lists, {1, 5, 10, 20});
    RetrievalMetrics m;
    m.rank1 = c.accuracy[0];
    m.rank5 = c.accuracy[1];
    m.rank10 = c.accuracy[2];
    m.rank20 = c.accuracy[3];
    m.map = mean_average_precision(lists);
    return m;
}

}  // namespace

RetrievalMetrics evaluate_retrieval(const Embedder& embedder, const Dataset& test,
                                    bool cross_camera) {
    Matrix features(test.samples.size(), embedder.config().out_dim);
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        const Vec f = embedder.embed(test.samples[i].x);
        std::copy(f.begin(), f.end(), features.row(i));
    }
    std::vector<std::size_t> queries, gallery;
    query_gallery_split(test, queries, gallery);
    return retrieval_from_features(features, test, queries, gallery, cross_camera);
}

Trainer::Trainer(TrainConfig cfg, const Dataset& source, const Dataset& target_train,
                 const Dataset& target_test)
    : cfg_(std::move(cfg)),
      source_(source),
      target_train_(target_train),
      target_test_(target_test),
      class_ids_(source.distinct_identities()),
      embedder_(cfg_.embedder, mix_seed(cfg_.seed, 0xE0)),
      classifier_(cfg_.embedder.out_dim, std::max<std::size_t>(class_ids_.size(), 1),
                  mix_seed(cfg_.seed, 0xC0)),
      source_memory_(std::max<std::size_t>(source.real_count(), 1), cfg_.embedder.out_dim),
      target_memory_(std::max<std::size_t>(target_train.real_count(), 1),
                     cfg_.embedder.out_dim),
      gpp_net_(cfg_.neighbor_mode == NeighborMode::VariantVNS
                   ? GppConfig::classifier_only(cfg_.embedder.out_dim)
                   : GppConfig::for_dim(cfg_.embedder.out_dim),
               mix_seed(cfg_.seed, 0x60)) {
    cfg_.validate();
    if (source_.in_dim != cfg_.embedder.in_dim || target_train_.in_dim != cfg_.embedder.in_dim) {
        throw std::invalid_argument("Trainer: dataset input dim does not match embedder");
    }
    if (source_.real_count() == 0) throw std::invalid_argument("Trainer: empty source dataset");
    source_labels_.resize(source_.real_count());
    for (std::size_t slot = 0; slot < source_.real_count(); ++slot) {
        const std::uint32_t id = source_.slot_identities[slot];
        const auto it = std::lower_bound(class_ids_.begin(), class_ids_.end(), id);
        source_labels_[slot] = static_cast<std::size_t>(it - class_ids_.begin());
    }
    k_candidates_ = cfg_.effective_k(target_memory_.size());
    const std::size_t limit =
        std::min(source_memory_.size(), target_memory_.size());
    if (k_candidates_ + 1 > limit) {
        k_candidates_ = limit > 1 ? limit - 1 : 1;
    }
}

bool Trainer::ni_active(std::size_t epoch) const {
    return cfg_.toggles.ni && cfg_.target_branch_active() && epoch > cfg_.ni_start_epoch;
}

bool Trainer::gpp_training_active(std::size_t epoch) const {
    // Positive-prediction training only matters when its selections will be
    // consumed; it cannot influence the embedder either way.
    return cfg_.toggles.ni && cfg_.target_branch_active() &&
           cfg_.neighbor_mode != NeighborMode::VNS && epoch > cfg_.gpp_start_epoch;
}

NeighborSet Trainer::neighbors_for(std::size_t slot, const Vec& f, std::size_t epoch) const {
    if (!ni_active(epoch)) return NeighborSet::self_only(slot);
    if (cfg_.neighbor_mode == NeighborMode::VNS) {
        const std::size_t k = std::min(cfg_.vns_k, target_memory_.size() - 1);
        return NeighborSet::with_neighbors(slot, target_memory_.topk(f, k, slot));
    }
    const CandidateGraph g = build_graph(target_memory_, slot, f, k_candidates_);
    const Matrix z = gcn_forward(g, gpp_net_);
    // per-graph batch statistics: the running averages are calibrated on
    // source graphs and misrank candidates across the domain gap
    const PositiveScores s = classify_positive(z, gpp_net_, /*training=*/true);
    if (cfg_.neighbor_mode == NeighborMode::VariantGPP) {
        return select_top_scores(s, g.candidate_indices, cfg_.vns_k, slot);
    }
    return select_reliable(s, g.candidate_indices, cfg_.mu, slot);
}

double Trainer::source_step(const std::vector<std::size_t>& batch, double lr,
                            std::vector<EmbedCache>& caches) {
    const std::size_t b = batch.size();
    caches.assign(b, {});
    std::vector<Embedder::Gradients> emb_grads(b);
    std::vector<IdentityClassifier::Gradients> cls_grads(b);
    std::vector<double> losses(b, 0.0);

    parallel_for(b, cfg_.threads, [&](std::size_t j) {
        const std::size_t slot = batch[j];
        const Sample& sample = source_.samples[source_.real_indices[slot]];
        const Vec f = embedder_.embed(sample.x, &caches[j]);
        const Vec logits = classifier_.logits(f);
        const LossValue lv = source_ce_loss(logits, source_labels_[slot]);
        losses[j] = lv.value;
        Vec grad_f;
        cls_grads[j] = classifier_.backward(f, lv.grad_input, &grad_f);
        emb_grads[j] = embedder_.backward(caches[j], grad_f);
    });

    Embedder::Gradients emb_total = embedder_.zero_gradients();
    IdentityClassifier::Gradients cls_total = classifier_.zero_gradients();
    double loss_sum = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
        emb_total.accumulate(emb_grads[j]);
        cls_total.accumulate(cls_grads[j]);
        loss_sum += losses[j];
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    emb_total.scale_by(inv_b);
    cls_total.scale_by(inv_b);
    embedder_.apply_sgd(emb_total, lr);
    classifier_.apply_sgd(cls_total, lr * cfg_.cls_lr_mult);
    decay_weights(embedder_, lr, cfg_.weight_decay);

    const double mean_loss = loss_sum * inv_b;
    check_finite(mean_loss, "L_src");
    return mean_loss;
}

double Trainer::target_step(const std::vector<std::size_t>& batch,
                            const std::vector<std::size_t>& variant_choice, std::size_t epoch,
                            double lr, std::vector<EmbedCache>& caches, double& precision_sum,
                            double& recall_sum, std::size_t& max_non_self) {
    const std::size_t b = batch.size();
    caches.assign(b, {});
    std::vector<Embedder::Gradients> emb_grads(b);
    std::vector<double> losses(b, 0.0);
    std::vector<double> precisions(b, 1.0), recalls(b, 0.0);
    std::vector<std::size_t> non_self(b, 0);

    parallel_for(b, cfg_.threads, [&](std::size_t j) {
        const std::size_t slot = batch[j];
        const Sample& sample = target_train_.samples[variant_choice[j]];
        EmbedCache loss_cache;
        const Vec f = embedder_.embed(sample.x, &loss_cache);
        const NeighborSet neigh = neighbors_for(slot, f, epoch);
        const LossValue lv = target_loss(target_memory_, neigh, f, cfg_.beta);
        losses[j] = lv.value;
        emb_grads[j] = embedder_.backward(loss_cache, lv.grad_input);
        non_self[j] = neigh.non_self_count();
        const NeighborQuality q = neighbor_quality(neigh, target_train_.slot_identities);
        precisions[j] = q.precision;
        recalls[j] = q.recall;
        caches[j] = std::move(loss_cache);  // slot i tracks the sampled variant's feature
    });

    Embedder::Gradients emb_total = embedder_.zero_gradients();
    double loss_sum = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
        emb_total.accumulate(emb_grads[j]);
        loss_sum += losses[j];
        precision_sum += precisions[j];
        recall_sum += recalls[j];
        max_non_self = std::max(max_non_self, non_self[j]);
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    emb_total.scale_by(inv_b);
    embedder_.apply_sgd(emb_total, lr);
    decay_weights(embedder_, lr, cfg_.weight_decay);

    const double mean_loss = loss_sum * inv_b;
    check_finite(mean_loss, "L_tgt");
    return mean_loss;
}

double Trainer::gpp_step(const std::vector<std::size_t>& batch,
                         const std::vector<EmbedCache>& caches, double lr) {
    // one SGD update per anchor, in batch order; the predictor needs far more
    // integrated step size than the embedder, and its updates are serialized
    // by contract anyway
    double loss_sum = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const std::size_t anchor = batch[j];
        const CandidateGraph graph =
            build_graph(source_memory_, anchor, caches[j].f, k_candidates_);
        GcnCache gcn_cache;
        const Matrix z = gcn_forward(graph, gpp_net_, &gcn_cache);
        ClassifierCache cls_cache;
        const PositiveScores scores =
            classify_positive(z, gpp_net_, /*training=*/true, &cls_cache);
        std::vector<std::uint32_t> candidate_ids(graph.candidate_indices.size());
        for (std::size_t c = 0; c < candidate_ids.size(); ++c) {
            candidate_ids[c] = source_.slot_identities[graph.candidate_indices[c]];
        }
        const std::vector<int> labels =
            gpp_labels(candidate_ids, source_.slot_identities[anchor]);
        loss_sum += gpp_loss(scores, labels);
        const GppNetwork::Gradients grads =
            gpp_backward(graph, gpp_net_, gcn_cache, cls_cache, labels);
        commit_bn_stats(gpp_net_, cls_cache);
        gpp_net_.apply_sgd(grads, lr);
    }
    const double mean_loss = loss_sum / static_cast<double>(batch.size());
    check_finite(mean_loss, "L_gpp");
    return mean_loss;
}

void Trainer::update_memories(const std::vector<std::size_t>& source_batch,
                              const std::vector<EmbedCache>& source_caches,
                              const std::vector<std::size_t>& target_batch,
                              const std::vector<EmbedCache>& target_caches, double alpha) {
    for (std::size_t j = 0; j < source_batch.size(); ++j) {
        source_memory_.update_slot(source_batch[j], source_caches[j].f, alpha);
    }
    for (std::size_t j = 0; j < target_batch.size(); ++j) {
        target_memory_.update_slot(target_batch[j], target_caches[j].f, alpha);
    }
}

EpochReport Trainer::run_epoch(std::size_t epoch) {
    const auto start = std::chrono::steady_clock::now();
    const AlphaSchedule alpha_schedule{cfg_.alpha_base};
    const double alpha = alpha_schedule.at(epoch);
    const double lr = cfg_.lr_at(epoch);
    const double gpp_lr = cfg_.gpp_lr_at(epoch);

    std::mt19937_64 rng = epoch_rng(cfg_.seed, epoch);
    std::vector<std::size_t> src_order(source_.real_count());
    std::iota(src_order.begin(), src_order.end(), std::size_t{0});
    std::shuffle(src_order.begin(), src_order.end(), rng);

    const bool target_active = cfg_.target_branch_active() && target_train_.real_count() > 0;
    std::vector<std::size_t> tgt_order;
    if (target_active) {
        tgt_order.resize(target_train_.real_count());
        std::iota(tgt_order.begin(), tgt_order.end(), std::size_t{0});
        std::shuffle(tgt_order.begin(), tgt_order.end(), rng);
    }

    const std::size_t driver =
        std::max(src_order.size(), target_active ? tgt_order.size() : std::size_t{0});
    const std::size_t iters = (driver + cfg_.batch_size - 1) / cfg_.batch_size;
    const bool train_gpp = gpp_training_active(epoch);

    EpochReport report;
    report.epoch = epoch;
    double src_loss_sum = 0.0, tgt_loss_sum = 0.0, gpp_loss_sum = 0.0;
    std::size_t tgt_iters = 0, gpp_iters = 0;
    double precision_sum = 0.0, recall_sum = 0.0;
    std::size_t neigh_count = 0;
    std::size_t max_non_self = 0;

    for (std::size_t it = 0; it < iters; ++it) {
        const std::vector<std::size_t> src_batch = batch_slice(src_order, it, cfg_.batch_size);
        std::vector<EmbedCache> src_caches;
        src_loss_sum += source_step(src_batch, lr, src_caches);

        std::vector<std::size_t> tgt_batch;
        std::vector<EmbedCache> tgt_caches;
        if (target_active) {
            tgt_batch = batch_slice(tgt_order, it, cfg_.batch_size);
            // x_tilde: uniform over the enabled variants of each sample,
            // drawn up front so the parallel loop stays deterministic
            std::vector<std::size_t> variant_choice(tgt_batch.size());
            for (std::size_t j = 0; j < tgt_batch.size(); ++j) {
                const std::size_t slot = tgt_batch[j];
                std::vector<std::size_t> options;
                if (cfg_.toggles.ei) options.push_back(target_train_.real_indices[slot]);
                if (cfg_.toggles.ci) {
                    const auto& cps = target_train_.counterparts_by_slot[slot];
                    options.insert(options.end(), cps.begin(), cps.end());
                }
                if (options.empty()) options.push_back(target_train_.real_indices[slot]);
                std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
                variant_choice[j] = options[pick(rng)];
            }
            tgt_loss_sum += target_step(tgt_batch, variant_choice, epoch, lr, tgt_caches,
                                        precision_sum, recall_sum, max_non_self);
            ++tgt_iters;
            neigh_count += tgt_batch.size();
        }

        if (train_gpp) {
            gpp_loss_sum += gpp_step(src_batch, src_caches, gpp_lr);
            ++gpp_iters;
        }

        update_memories(src_batch, src_caches, tgt_batch, tgt_caches, alpha);
    }

    report.l_src = iters > 0 ? src_loss_sum / static_cast<double>(iters) : 0.0;
    report.l_tgt = tgt_iters > 0 ? tgt_loss_sum / static_cast<double>(tgt_iters) : 0.0;
    report.l_gpp = gpp_iters > 0 ? gpp_loss_sum / static_cast<double>(gpp_iters) : 0.0;
    if (neigh_count > 0) {
        report.neigh_precision = precision_sum / static_cast<double>(neigh_count);
        report.neigh_recall = recall_sum / static_cast<double>(neigh_count);
    }

    const bool eval_now = epoch % cfg_.eval_every == 0 || epoch == cfg_.epochs;
    if (eval_now) {
        const RetrievalMetrics m = evaluate();
        report.rank1 = m.rank1;
        report.rank5 = m.rank5;
        report.rank10 = m.rank10;
        report.rank20 = m.rank20;
        report.map = m.map;
    } else if (!reports_.empty()) {
        report.rank1 = reports_.back().rank1;
        report.rank5 = reports_.back().rank5;
        report.rank10 = reports_.back().rank10;
        report.rank20 = reports_.back().rank20;
        report.map = reports_.back().map;
    }

    diagnostics_.push_back({epoch, alpha, max_non_self});
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EpochReport Trainer::advance_epoch() {
    const std::size_t e = epoch_ + 1;
    EpochReport report = run_epoch(e);
    reports_.push_back(report);
    epoch_ = e;
    return report;
}

void Trainer::run() {
    while (epoch_ < cfg_.epochs) advance_epoch();
}

RetrievalMetrics Trainer::evaluate() const {
    return evaluate_retrieval(embedder_, target_test_, cfg_.cross_camera_eval);
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u64(out, epoch_);
    write_matrix(out, embedder_.w1);
    write_vec(out, embedder_.b1);
    write_matrix(out, embedder_.w2);
    write_vec(out, embedder_.b2);
    write_matrix(out, classifier_.weight);
    write_vec(out, classifier_.bias);
    write_matrix(out, source_memory_.slots());
    write_matrix(out, target_memory_.slots());
    write_u64(out, gpp_net_.gcn_weights.size());
    for (const Matrix& w : gpp_net_.gcn_weights) write_matrix(out, w);
    write_matrix(out, gpp_net_.fc1_w);
    write_vec(out, gpp_net_.fc1_b);
    write_vec(out, gpp_net_.bn_gamma);
    write_vec(out, gpp_net_.bn_beta);
    write_vec(out, gpp_net_.bn_running_mean);
    write_vec(out, gpp_net_.bn_running_var);
    write_f64(out, gpp_net_.prelu_slope);
    write_matrix(out, gpp_net_.fc2_w);
    write_vec(out, gpp_net_.fc2_b);
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

void load_into(std::istream& in, Matrix& m, const char* what) {
    Matrix loaded = read_matrix(in);
    if (!loaded.same_shape(m)) throw IoError(std::string("checkpoint: shape mismatch in ") + what);
    m = std::move(loaded);
}

void load_into(std::istream& in, Vec& v, const char* what) {
    Vec loaded = read_vec(in);
    if (loaded.size() != v.size()) throw IoError(std::string("checkpoint: size mismatch in ") + what);
    v = std::move(loaded);
}

}  // namespace

void Trainer::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw IoError(path.string() + ": not a checkpoint file");
    }
    epoch_ = read_u64(in);
    load_into(in, embedder_.w1, "embedder.w1");
    load_into(in, embedder_.b1, "embedder.b1");
    load_into(in, embedder_.w2, "embedder.w2");
    load_into(in, embedder_.b2, "embedder.b2");
    load_into(in, classifier_.weight, "classifier.weight");
    load_into(in, classifier_.bias, "classifier.bias");
    Matrix src_slots = read_matrix(in);
    Matrix tgt_slots = read_matrix(in);
    if (!src_slots.same_shape(source_memory_.slots()) ||
        !tgt_slots.same_shape(target_memory_.slots())) {
        throw IoError("checkpoint: memory shape mismatch");
    }
    source_memory_.restore_slots(src_slots);
    target_memory_.restore_slots(tgt_slots);
    const std::uint64_t layer_count = read_u64(in);
    if (layer_count != gpp_net_.gcn_weights.size()) {
        throw IoError("checkpoint: GCN layer count mismatch");
    }
    for (Matrix& w : gpp_net_.gcn_weights) load_into(in, w, "gpp.gcn");
    load_into(in, gpp_net_.fc1_w, "gpp.fc1_w");
    load_into(in, gpp_net_.fc1_b, "gpp.fc1_b");
    load_into(in, gpp_net_.bn_gamma, "gpp.bn_gamma");
    load_into(in, gpp_net_.bn_beta, "gpp.bn_beta");
    load_into(in, gpp_net_.bn_running_mean, "gpp.bn_running_mean");
    load_into(in, gpp_net_.bn_running_var, "gpp.bn_running_var");
    gpp_net_.prelu_slope = read_f64(in);
    load_into(in, gpp_net_.fc2_w, "gpp.fc2_w");
    load_into(in, gpp_net_.fc2_b, "gpp.fc2_b");
}

}  // namespace imda
