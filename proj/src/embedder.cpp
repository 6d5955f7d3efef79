#include "imda/embedder.hpp"

#include <cmath>
#include <stdexcept>

#include "imda/errors.hpp"
#include "imda/numerics.hpp"

namespace imda {

void init_uniform(Matrix& m, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : m.data) v = dist(rng);
}

void init_uniform(Vec& v, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
}

Vec backward_through_normalize(std::span<const double> grad_f, const EmbedCache& cache) {
    if (cache.pre_norm_len < 1e-12) {
        throw NumericalError("backward_through_normalize: degenerate pre-norm length");
    }
    if (grad_f.size() != cache.f.size()) {
        throw ShapeError("backward_through_normalize: grad dim mismatch");
    }
    const double radial = dot(grad_f, cache.f);
    Vec grad_u(grad_f.size());
    for (std::size_t i = 0; i < grad_u.size(); ++i) {
        grad_u[i] = (grad_f[i] - cache.f[i] * radial) / cache.pre_norm_len;
    }
    return grad_u;
}

Embedder::Embedder(const EmbedderConfig& cfg, std::uint64_t seed)
    : w1(cfg.in_dim, cfg.hidden),
      w2(cfg.hidden, cfg.out_dim),
      b1(cfg.hidden, 0.0),
      b2(cfg.out_dim, 0.0),
      cfg_(cfg) {
    if (cfg.in_dim == 0 || cfg.hidden == 0 || cfg.out_dim == 0) {
        throw std::invalid_argument("Embedder: all dimensions must be at least 1");
    }
    std::mt19937_64 rng(seed);
    init_uniform(w1, cfg.in_dim, rng);
    init_uniform(b1, cfg.in_dim, rng);
    init_uniform(w2, cfg.hidden, rng);
    init_uniform(b2, cfg.hidden, rng);
}

Vec Embedder::embed(std::span<const double> x, EmbedCache* cache) const {
    if (x.size() != cfg_.in_dim) throw ShapeError("Embedder::embed: input dim mismatch");

    Vec pre_act = b1;
    for (std::size_t i = 0; i < cfg_.in_dim; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* wrow = w1.row(i);
        for (std::size_t j = 0; j < cfg_.hidden; ++j) pre_act[j] += xi * wrow[j];
    }
    Vec hidden = pre_act;
    for (double& v : hidden) v = v > 0.0 ? v : 0.0;

    Vec pre_norm = b2;
    for (std::size_t i = 0; i < cfg_.hidden; ++i) {
        const double hi = hidden[i];
        if (hi == 0.0) continue;
        const double* wrow = w2.row(i);
        for (std::size_t j = 0; j < cfg_.out_dim; ++j) pre_norm[j] += hi * wrow[j];
    }
    Vec f = l2_normalize(pre_norm);

    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->pre_act = pre_act;
        cache->hidden = hidden;
        cache->pre_norm = pre_norm;
        cache->f = f;
        cache->pre_norm_len = l2_norm(pre_norm);
    }
    return f;
}

Embedder::Gradients Embedder::zero_gradients() const {
    Gradients g;
    g.dw1 = Matrix(cfg_.in_dim, cfg_.hidden);
    g.db1.assign(cfg_.hidden, 0.0);
    g.dw2 = Matrix(cfg_.hidden, cfg_.out_dim);
    g.db2.assign(cfg_.out_dim, 0.0);
    return g;
}

void Embedder::Gradients::accumulate(const Gradients& other) {
    for (std::size_t i = 0; i < dw1.data.size(); ++i) dw1.data[i] += other.dw1.data[i];
    for (std::size_t i = 0; i < db1.size(); ++i) db1[i] += other.db1[i];
    for (std::size_t i = 0; i < dw2.data.size(); ++i) dw2.data[i] += other.dw2.data[i];
    for (std::size_t i = 0; i < db2.size(); ++i) db2[i] += other.db2[i];
}

void Embedder::Gradients::scale_by(double s) {
    for (double& v : dw1.data) v *= s;
    for (double& v : db1) v *= s;
    for (double& v : dw2.data) v *= s;
    for (double& v : db2) v *= s;
}

Embedder::Gradients Embedder::backward(const EmbedCache& cache, std::span<const double> grad_f,
                                       Vec* grad_x) const {
    Gradients g = zero_gradients();
    const Vec grad_u = backward_through_normalize(grad_f, cache);

    // FC2: u = hidden^T w2 + b2
    g.db2 = grad_u;
    Vec grad_hidden(cfg_.hidden, 0.0);
    for (std::size_t i = 0; i < cfg_.hidden; ++i) {
        const double hi = cache.hidden[i];
        double* grow = g.dw2.row(i);
        const double* wrow = w2.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < cfg_.out_dim; ++j) {
            grow[j] = hi * grad_u[j];
            acc += wrow[j] * grad_u[j];
        }
        grad_hidden[i] = acc;
    }

    // ReLU
    Vec grad_pre(cfg_.hidden);
    for (std::size_t i = 0; i < cfg_.hidden; ++i) {
        grad_pre[i] = cache.pre_act[i] > 0.0 ? grad_hidden[i] : 0.0;
    }

    // FC1: pre_act = x^T w1 + b1
    g.db1 = grad_pre;
    for (std::size_t i = 0; i < cfg_.in_dim; ++i) {
        const double xi = cache.x[i];
        double* grow = g.dw1.row(i);
        for (std::size_t j = 0; j < cfg_.hidden; ++j) grow[j] = xi * grad_pre[j];
    }
    if (grad_x) {
        grad_x->assign(cfg_.in_dim, 0.0);
        for (std::size_t i = 0; i < cfg_.in_dim; ++i) {
            const double* wrow = w1.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < cfg_.hidden; ++j) acc += wrow[j] * grad_pre[j];
            (*grad_x)[i] = acc;
        }
    }
    return g;
}

void Embedder::apply_sgd(const Gradients& g, double lr) {
    sgd_step_inplace(w1, g.dw1, lr);
    sgd_step_inplace(w2, g.dw2, lr);
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] -= lr * g.db1[i];
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] -= lr * g.db2[i];
}

IdentityClassifier::IdentityClassifier(std::size_t feature_dim, std::size_t num_identities,
                                       std::uint64_t seed)
    : weight(feature_dim, num_identities), bias(num_identities, 0.0) {
    if (feature_dim == 0 || num_identities == 0) {
        throw std::invalid_argument("IdentityClassifier: dimensions must be at least 1");
    }
    std::mt19937_64 rng(seed);
    init_uniform(weight, feature_dim, rng);
    init_uniform(bias, feature_dim, rng);
}

Vec IdentityClassifier::logits(std::span<const double> f) const {
    if (f.size() != weight.rows) throw ShapeError("IdentityClassifier: feature dim mismatch");
    Vec out = bias;
    for (std::size_t c = 0; c < weight.rows; ++c) {
        const double fc = f[c];
        if (fc == 0.0) continue;
        const double* wrow = weight.row(c);
        for (std::size_t m = 0; m < weight.cols; ++m) out[m] += fc * wrow[m];
    }
    return out;
}

IdentityClassifier::Gradients IdentityClassifier::zero_gradients() const {
    Gradients g;
    g.dweight = Matrix(weight.rows, weight.cols);
    g.dbias.assign(bias.size(), 0.0);
    return g;
}

void IdentityClassifier::Gradients::accumulate(const Gradients& other) {
    for (std::size_t i = 0; i < dweight.data.size(); ++i) {
        dweight.data[i] += other.dweight.data[i];
    }
    for (std::size_t i = 0; i < dbias.size(); ++i) dbias[i] += other.dbias[i];
}

void IdentityClassifier::Gradients::scale_by(double s) {
    for (double& v : dweight.data) v *= s;
    for (double& v : dbias) v *= s;
}

IdentityClassifier::Gradients IdentityClassifier::backward(std::span<const double> f,
                                                           std::span<const double> grad_logits,
                                                           Vec* grad_f) const {
    if (grad_logits.size() != weight.cols) {
        throw ShapeError("IdentityClassifier::backward: logits dim mismatch");
    }
    Gradients g = zero_gradients();
    for (std::size_t c = 0; c < weight.rows; ++c) {
        double* grow = g.dweight.row(c);
        const double fc = f[c];
        for (std::size_t m = 0; m < weight.cols; ++m) grow[m] = fc * grad_logits[m];
    }
    g.dbias.assign(grad_logits.begin(), grad_logits.end());
    if (grad_f) {
        grad_f->assign(weight.rows, 0.0);
        for (std::size_t c = 0; c < weight.rows; ++c) {
            const double* wrow = weight.row(c);
            double acc = 0.0;
            for (std::size_t m = 0; m < weight.cols; ++m) acc += wrow[m] * grad_logits[m];
            (*grad_f)[c] = acc;
        }
    }
    return g;
}

void IdentityClassifier::apply_sgd(const Gradients& g, double lr) {
    sgd_step_inplace(weight, g.dweight, lr);
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] -= lr * g.dbias[i];
}

}  // namespace imda
