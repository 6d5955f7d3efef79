#include "imda/gpp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "imda/embedder.hpp"
#include "imda/errors.hpp"
#include "imda/numerics.hpp"

namespace imda {

CandidateGraph build_graph(const ExemplarMemory& mem, std::size_t anchor_index,
                           std::span<const double> anchor_f, std::size_t k) {
    if (k == 0) throw std::invalid_argument("build_graph: k must be at least 1");
    if (k > mem.size() - 1) {
        throw std::invalid_argument("build_graph: k exceeds memory size minus anchor");
    }
    CandidateGraph g;
    g.anchor_feature.assign(anchor_f.begin(), anchor_f.end());
    g.candidate_indices = mem.topk(anchor_f, k, anchor_index);

    const std::size_t d = mem.dim();
    g.node_features = Matrix(k, d);
    for (std::size_t row = 0; row < k; ++row) {
        const double* slot = mem.slots().row(g.candidate_indices[row]);
        double* h = g.node_features.row(row);
        for (std::size_t c = 0; c < d; ++c) h[c] = slot[c] - anchor_f[c];
    }

    // A_raw = H H^T, then each row through a plain softmax.
    Matrix raw = matmul(g.node_features, transpose(g.node_features));
    g.adjacency = Matrix(k, k);
    for (std::size_t row = 0; row < k; ++row) {
        const Vec p = softmax_temp({raw.row(row), k}, 1.0);
        std::copy(p.begin(), p.end(), g.adjacency.row(row));
    }
    return g;
}

GppConfig GppConfig::for_dim(std::size_t d) {
    GppConfig cfg;
    if (d == 2048) {
        cfg.gcn_dims = {2048, 2048, 512, 256, 256};
    } else {
        const std::size_t half = std::max<std::size_t>(d / 2, 1);
        const std::size_t quarter = std::max<std::size_t>(d / 4, 1);
        cfg.gcn_dims = {d, d, half, quarter, quarter};
    }
    cfg.classifier_hidden = cfg.gcn_dims.back();
    return cfg;
}

GppConfig GppConfig::classifier_only(std::size_t d) {
    GppConfig cfg;
    cfg.gcn_dims = {d};
    cfg.classifier_hidden = GppConfig::for_dim(d).classifier_hidden;
    return cfg;
}

GppNetwork::GppNetwork(GppConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    if (cfg_.gcn_dims.empty()) throw std::invalid_argument("GppNetwork: empty dimension chain");
    if (cfg_.classifier_hidden == 0) {
        throw std::invalid_argument("GppNetwork: classifier hidden width must be at least 1");
    }
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < cfg_.gcn_dims.size(); ++l) {
        Matrix w(2 * cfg_.gcn_dims[l], cfg_.gcn_dims[l + 1]);
        init_uniform(w, 2 * cfg_.gcn_dims[l], rng);
        gcn_weights.push_back(std::move(w));
    }
    const std::size_t d_out = cfg_.output_dim();
    const std::size_t h = cfg_.classifier_hidden;
    fc1_w = Matrix(d_out, h);
    fc1_b.assign(h, 0.0);
    init_uniform(fc1_w, d_out, rng);
    init_uniform(fc1_b, d_out, rng);
    bn_gamma.assign(h, 1.0);
    bn_beta.assign(h, 0.0);
    bn_running_mean.assign(h, 0.0);
    bn_running_var.assign(h, 1.0);
    fc2_w = Matrix(h, 2);
    fc2_b.assign(2, 0.0);
    init_uniform(fc2_w, h, rng);
    init_uniform(fc2_b, h, rng);
}

GppNetwork::Gradients GppNetwork::zero_gradients() const {
    Gradients g;
    for (const Matrix& w : gcn_weights) g.dgcn.emplace_back(w.rows, w.cols);
    g.dfc1_w = Matrix(fc1_w.rows, fc1_w.cols);
    g.dfc1_b.assign(fc1_b.size(), 0.0);
    g.dbn_gamma.assign(bn_gamma.size(), 0.0);
    g.dbn_beta.assign(bn_beta.size(), 0.0);
    g.dfc2_w = Matrix(fc2_w.rows, fc2_w.cols);
    g.dfc2_b.assign(fc2_b.size(), 0.0);
    return g;
}

namespace {

void add_into(Matrix& a, const Matrix& b) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}
void add_into(Vec& a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

void GppNetwork::Gradients::accumulate(const Gradients& other) {
    for (std::size_t l = 0; l < dgcn.size(); ++l) add_into(dgcn[l], other.dgcn[l]);
    add_into(dfc1_w, other.dfc1_w);
    add_into(dfc1_b, other.dfc1_b);
    add_into(dbn_gamma, other.dbn_gamma);
    add_into(dbn_beta, other.dbn_beta);
    dprelu_slope += other.dprelu_slope;
    add_into(dfc2_w, other.dfc2_w);
    add_into(dfc2_b, other.dfc2_b);
}

void GppNetwork::Gradients::scale_by(double s) {
    for (Matrix& m : dgcn) {
        for (double& v : m.data) v *= s;
    }
    for (double& v : dfc1_w.data) v *= s;
    for (double& v : dfc1_b) v *= s;
    for (double& v : dbn_gamma) v *= s;
    for (double& v : dbn_beta) v *= s;
    dprelu_slope *= s;
    for (double& v : dfc2_w.data) v *= s;
    for (double& v : dfc2_b) v *= s;
}

void GppNetwork::apply_sgd(const Gradients& g, double lr) {
    for (std::size_t l = 0; l < gcn_weights.size(); ++l) {
        sgd_step_inplace(gcn_weights[l], g.dgcn[l], lr);
    }
    sgd_step_inplace(fc1_w, g.dfc1_w, lr);
    for (std::size_t i = 0; i < fc1_b.size(); ++i) fc1_b[i] -= lr * g.dfc1_b[i];
    for (std::size_t i = 0; i < bn_gamma.size(); ++i) bn_gamma[i] -= lr * g.dbn_gamma[i];
    for (std::size_t i = 0; i < bn_beta.size(); ++i) bn_beta[i] -= lr * g.dbn_beta[i];
    prelu_slope -= lr * g.dprelu_slope;
    sgd_step_inplace(fc2_w, g.dfc2_w, lr);
    for (std::size_t i = 0; i < fc2_b.size(); ++i) fc2_b[i] -= lr * g.dfc2_b[i];
}

Matrix gcn_forward(const CandidateGraph& graph, const GppNetwork& net, GcnCache* cache) {
    if (graph.node_features.cols != net.config().gcn_dims.front()) {
        throw ShapeError("gcn_forward: node feature dimension mismatch");
    }
    if (cache) cache->layers.clear();
    Matrix h = graph.node_features;
    for (const Matrix& w : net.gcn_weights) {
        Matrix mixed = matmul(graph.adjacency, h);
        Matrix pre = matmul(concat_cols(mixed, h), w);
        if (cache) cache->layers.push_back({h, mixed, pre});
        h = relu(pre);
    }
    return h;
}

PositiveScores classify_positive(const Matrix& z, const GppNetwork& net, bool training,
                                 ClassifierCache* cache) {
    const GppConfig& cfg = net.config();
    if (z.cols != cfg.output_dim()) throw ShapeError("classify_positive: input dim mismatch");
    const std::size_t k = z.rows;
    const std::size_t h = cfg.classifier_hidden;

    Matrix a1 = matmul(z, net.fc1_w);
    for (std::size_t r = 0; r < k; ++r) {
        double* row = a1.row(r);
        for (std::size_t j = 0; j < h; ++j) row[j] += net.fc1_b[j];
    }

    // batch statistics need at least two nodes; otherwise fall back to the
    // running averages
    const bool batch_stats = training && k > 1;
    Vec mean(h, 0.0), var(h, 0.0);
    if (batch_stats) {
        for (std::size_t r = 0; r < k; ++r) {
            const double* row = a1.row(r);
            for (std::size_t j = 0; j < h; ++j) mean[j] += row[j];
        }
        for (double& m : mean) m /= static_cast<double>(k);
        for (std::size_t r = 0; r < k; ++r) {
            const double* row = a1.row(r);
            for (std::size_t j = 0; j < h; ++j) {
                const double dvj = row[j] - mean[j];
                var[j] += dvj * dvj;
            }
        }
        for (double& v : var) v /= static_cast<double>(k);
    } else {
        mean = net.bn_running_mean;
        var = net.bn_running_var;
    }

    Matrix xhat(k, h), bn_out(k, h), act(k, h);
    for (std::size_t r = 0; r < k; ++r) {
        const double* arow = a1.row(r);
        double* xrow = xhat.row(r);
        double* brow = bn_out.row(r);
        double* prow = act.row(r);
        for (std::size_t j = 0; j < h; ++j) {
            xrow[j] = (arow[j] - mean[j]) / std::sqrt(var[j] + cfg.bn_eps);
            brow[j] = net.bn_gamma[j] * xrow[j] + net.bn_beta[j];
            prow[j] = brow[j] > 0.0 ? brow[j] : net.prelu_slope * brow[j];
        }
    }

    Matrix logits = matmul(act, net.fc2_w);
    for (std::size_t r = 0; r < k; ++r) {
        logits(r, 0) += net.fc2_b[0];
        logits(r, 1) += net.fc2_b[1];
    }

    PositiveScores scores;
    scores.probs.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        const Vec p = softmax_temp({logits.row(r), 2}, 1.0);
        scores.probs[r] = p[1];
    }

    if (cache) {
        cache->z = z;
        cache->a1 = std::move(a1);
        cache->mean = std::move(mean);
        cache->var = std::move(var);
        cache->used_batch_stats = batch_stats;
        cache->xhat = std::move(xhat);
        cache->bn_out = std::move(bn_out);
        cache->act = std::move(act);
        cache->logits = std::move(logits);
        cache->probs = scores.probs;
    }
    return scores;
}

void commit_bn_stats(GppNetwork& net, const ClassifierCache& cache) {
    if (!cache.used_batch_stats) return;
    const double m = net.config().bn_momentum;
    for (std::size_t j = 0; j < net.bn_running_mean.size(); ++j) {
        net.bn_running_mean[j] = (1.0 - m) * net.bn_running_mean[j] + m * cache.mean[j];
        net.bn_running_var[j] = (1.0 - m) * net.bn_running_var[j] + m * cache.var[j];
    }
}

std::vector<int> gpp_labels(std::span<const std::uint32_t> candidate_ids,
                            std::uint32_t anchor_id) {
    std::vector<int> y(candidate_ids.size());
    for (std::size_t j = 0; j < candidate_ids.size(); ++j) {
        y[j] = candidate_ids[j] == anchor_id ? 1 : 0;
    }
    return y;
}

double gpp_loss(const PositiveScores& scores, const std::vector<int>& labels) {
    if (scores.probs.size() != labels.size()) {
        throw ShapeError("gpp_loss: scores/labels length mismatch");
    }
    const std::size_t k = labels.size();
    double loss = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double p = std::clamp(scores.probs[j], 1e-12, 1.0 - 1e-12);
        loss += labels[j] ? std::log(p) : std::log(1.0 - p);
    }
    return -loss / static_cast<double>(k);
}

GppNetwork::Gradients gpp_backward(const CandidateGraph& graph, const GppNetwork& net,
                                   const GcnCache& gcn_cache, const ClassifierCache& cls_cache,
                                   const std::vector<int>& labels) {
    const GppConfig& cfg = net.config();
    const std::size_t k = cls_cache.probs.size();
    if (labels.size() != k) throw ShapeError("gpp_backward: scores/labels length mismatch");
    const std::size_t h = cfg.classifier_hidden;

    GppNetwork::Gradients g = net.zero_gradients();

    // BCE through the 2-way softmax: dL/dlogit_pos = (p - y)/k.
    Matrix dlogits(k, 2);
    for (std::size_t r = 0; r < k; ++r) {
        const double delta = (cls_cache.probs[r] - static_cast<double>(labels[r])) /
                             static_cast<double>(k);
        dlogits(r, 1) = delta;
        dlogits(r, 0) = -delta;
    }

    g.dfc2_w = matmul(transpose(cls_cache.act), dlogits);
    for (std::size_t r = 0; r < k; ++r) {
        g.dfc2_b[0] += dlogits(r, 0);
        g.dfc2_b[1] += dlogits(r, 1);
    }
    Matrix dact = matmul(dlogits, transpose(net.fc2_w));

    // PReLU
    Matrix dbn_out(k, h);
    for (std::size_t r = 0; r < k; ++r) {
        const double* brow = cls_cache.bn_out.row(r);
        const double* drow = dact.row(r);
        double* orow = dbn_out.row(r);
        for (std::size_t j = 0; j < h; ++j) {
            if (brow[j] > 0.0) {
                orow[j] = drow[j];
            } else {
                orow[j] = drow[j] * net.prelu_slope;
                g.dprelu_slope += drow[j] * brow[j];
            }
        }
    }

    // Batch norm
    Matrix da1(k, h);
    for (std::size_t j = 0; j < h; ++j) {
        const double inv_std = 1.0 / std::sqrt(cls_cache.var[j] + cfg.bn_eps);
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            dgamma += dbn_out(r, j) * cls_cache.xhat(r, j);
            dbeta += dbn_out(r, j);
        }
        g.dbn_gamma[j] = dgamma;
        g.dbn_beta[j] = dbeta;

        if (cls_cache.used_batch_stats) {
            const double kf = static_cast<double>(k);
            double dvar = 0.0, dmean = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                const double dxhat = dbn_out(r, j) * net.bn_gamma[j];
                const double centered = cls_cache.a1(r, j) - cls_cache.mean[j];
                dvar += dxhat * centered * -0.5 * inv_std * inv_std * inv_std;
                dmean += -dxhat * inv_std;
            }
            for (std::size_t r = 0; r < k; ++r) {
                const double dxhat = dbn_out(r, j) * net.bn_gamma[j];
                const double centered = cls_cache.a1(r, j) - cls_cache.mean[j];
                da1(r, j) = dxhat * inv_std + dvar * 2.0 * centered / kf + dmean / kf;
            }
        } else {
            for (std::size_t r = 0; r < k; ++r) {
                da1(r, j) = dbn_out(r, j) * net.bn_gamma[j] * inv_std;
            }
        }
    }

    g.dfc1_w = matmul(transpose(cls_cache.z), da1);
    for (std::size_t r = 0; r < k; ++r) {
        const double* row = da1.row(r);
        for (std::size_t j = 0; j < h; ++j) g.dfc1_b[j] += row[j];
    }
    Matrix dh = matmul(da1, transpose(net.fc1_w));

    // GCN layers, last to first. A and H^(0) are constants of the graph.
    for (std::size_t l = net.gcn_weights.size(); l-- > 0;) {
        const GcnLayerCache& layer = gcn_cache.layers[l];
        const Matrix& w = net.gcn_weights[l];
        const std::size_t d_in = layer.input.cols;

        Matrix dpre = dh;
        for (std::size_t i = 0; i < dpre.data.size(); ++i) {
            if (layer.pre_act.data[i] <= 0.0) dpre.data[i] = 0.0;
        }

        // dW^(l) = [mixed || input]^T dpre, split into the two halves
        Matrix dw_top = matmul(transpose(layer.mixed), dpre);
        Matrix dw_bottom = matmul(transpose(layer.input), dpre);
        for (std::size_t r = 0; r < d_in; ++r) {
            for (std::size_t c = 0; c < w.cols; ++c) {
                g.dgcn[l](r, c) = dw_top(r, c);
                g.dgcn[l](d_in + r, c) = dw_bottom(r, c);
            }
        }

        if (l == 0) break;  // no gradient needed into H^(0)
        Matrix dconcat = matmul(dpre, transpose(w));
        Matrix dmixed(k, d_in), ddirect(k, d_in);
        for (std::size_t r = 0; r < k; ++r) {
            const double* crow = dconcat.row(r);
            for (std::size_t c = 0; c < d_in; ++c) {
                dmixed(r, c) = crow[c];
                ddirect(r, c) = crow[d_in + c];
            }
        }
        dh = add(matmul(transpose(graph.adjacency), dmixed), ddirect);
    }
    return g;
}

NeighborSet select_reliable(const PositiveScores& scores,
                            const std::vector<std::size_t>& candidate_indices, double mu,
                            std::size_t anchor) {
    if (mu < 0.0 || mu > 1.0) throw std::invalid_argument("select_reliable: mu outside [0, 1]");
    if (scores.probs.size() != candidate_indices.size()) {
        throw ShapeError("select_reliable: scores/candidates length mismatch");
    }
    std::vector<std::size_t> chosen;
    for (std::size_t j = 0; j < candidate_indices.size(); ++j) {
        if (scores.probs[j] >= mu) chosen.push_back(candidate_indices[j]);
    }
    return NeighborSet::with_neighbors(anchor, std::move(chosen));
}

NeighborSet select_top_scores(const PositiveScores& scores,
                              const std::vector<std::size_t>& candidate_indices, std::size_t m,
                              std::size_t anchor) {
    if (scores.probs.size() != candidate_indices.size()) {
        throw ShapeError("select_top_scores: scores/candidates length mismatch");
    }
    std::vector<std::size_t> order(candidate_indices.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores.probs[a] > scores.probs[b];
    });
    std::vector<std::size_t> chosen;
    const std::size_t take = std::min(m, order.size());
    for (std::size_t j = 0; j < take; ++j) chosen.push_back(candidate_indices[order[j]]);
    return NeighborSet::with_neighbors(anchor, std::move(chosen));
}

}  // namespace imda
