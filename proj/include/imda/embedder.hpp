#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "imda/matrix.hpp"

namespace imda {

struct EmbedderConfig {
    std::size_t in_dim = 32;
    std::size_t hidden = 128;
    std::size_t out_dim = 64;
};

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
void init_uniform(Matrix& m, std::size_t fan_in, std::mt19937_64& rng);
void init_uniform(Vec& v, std::size_t fan_in, std::mt19937_64& rng);

struct EmbedCache {
    Vec x;         // input
    Vec pre_act;   // FC1 output before ReLU
    Vec hidden;    // after ReLU
    Vec pre_norm;  // FC2 output before normalization
    Vec f;         // unit output
    double pre_norm_len = 0.0;
};

// Gradient w.r.t. the pre-normalization vector u where f = u / ||u||:
// grad_u = (grad_f - f * (f . grad_f)) / ||u||. Throws NumericalError when
// ||u|| < 1e-12.
Vec backward_through_normalize(std::span<const double> grad_f, const EmbedCache& cache);

// Two-layer MLP with a unit-norm output: f(x) = normalize(W2 relu(W1 x + b1) + b2).
class Embedder {
public:
    Embedder(const EmbedderConfig& cfg, std::uint64_t seed);

    const EmbedderConfig& config() const { return cfg_; }

    Vec embed(std::span<const double> x, EmbedCache* cache = nullptr) const;

    struct Gradients {
        Matrix dw1;
        Vec db1;
        Matrix dw2;
        Vec db2;
        void accumulate(const Gradients& other);
        void scale_by(double s);
    };
    Gradients zero_gradients() const;

    // Backprop of grad_f (gradient w.r.t. the unit output) through the
    // normalization and both layers. grad_x, when non-null, receives the
    // gradient w.r.t. the input.
    Gradients backward(const EmbedCache& cache, std::span<const double> grad_f,
                       Vec* grad_x = nullptr) const;

    void apply_sgd(const Gradients& g, double lr);

    Matrix w1, w2;
    Vec b1, b2;

private:
    EmbedderConfig cfg_;
};

// Linear identity head for the labeled domain: logits = W^T f + b.
class IdentityClassifier {
public:
    IdentityClassifier(std::size_t feature_dim, std::size_t num_identities, std::uint64_t seed);

    std::size_t num_identities() const { return weight.cols; }

    Vec logits(std::span<const double> f) const;

    struct Gradients {
        Matrix dweight;
        Vec dbias;
        void accumulate(const Gradients& other);
        void scale_by(double s);
    };
    Gradients zero_gradients() const;

    // Given dL/dlogits and the input feature, fills parameter gradients and,
    // when non-null, the gradient w.r.t. f.
    Gradients backward(std::span<const double> f, std::span<const double> grad_logits,
                       Vec* grad_f = nullptr) const;

    void apply_sgd(const Gradients& g, double lr);

    Matrix weight;  // feature_dim x M
    Vec bias;       // M
};

}  // namespace imda
