#include "imda/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "imda/numerics.hpp"

namespace imda {

namespace {

Vec apply_map(const Matrix& m, const Vec& v) {
    Vec out(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

Matrix perturbed_identity(std::size_t d, double strength, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m = Matrix::identity(d);
    if (strength == 0.0) return m;
    for (double& v : m.data) v += strength * normal(rng);
    return m;
}

// Orthonormal basis of the shared nuisance subspace: d x r, Gram-Schmidt on
// random normal columns.
Matrix nuisance_basis(std::size_t d, std::size_t r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix basis(d, r);
    for (std::size_t c = 0; c < r; ++c) {
        Vec col(d);
        for (double& v : col) v = normal(rng);
        for (std::size_t prev = 0; prev < c; ++prev) {
            double proj = 0.0;
            for (std::size_t i = 0; i < d; ++i) proj += col[i] * basis(i, prev);
            for (std::size_t i = 0; i < d; ++i) col[i] -= proj * basis(i, prev);
        }
        const Vec unit = l2_normalize(col);
        for (std::size_t i = 0; i < d; ++i) basis(i, c) = unit[i];
    }
    return basis;
}

Vec render(const Domain& domain, const Vec& latent, std::size_t camera) {
    Vec x = apply_map(domain.camera_maps[camera], latent);
    if (domain.spec.shift_strength > 0.0) x = apply_map(domain.shift_map, x);
    return x;
}

}  // namespace

void DomainSpec::validate() const {
    if (num_identities == 0 || samples_per_identity == 0 || num_cameras == 0 || in_dim == 0) {
        throw std::invalid_argument("DomainSpec: counts must be at least 1");
    }
    if (cluster_spread < 0.0 || camera_strength < 0.0 || shift_strength < 0.0) {
        throw std::invalid_argument("DomainSpec: spreads must be nonnegative");
    }
    if (nuisance_share < 0.0 || nuisance_share > 1.0) {
        throw std::invalid_argument("DomainSpec: nuisance_share must be in [0, 1]");
    }
    if (nuisance_rank > in_dim) {
        throw std::invalid_argument("DomainSpec: nuisance_rank exceeds in_dim");
    }
}

Domain generate_domain(const DomainSpec& spec) {
    spec.validate();
    Domain domain;
    domain.spec = spec;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    domain.prototypes.reserve(spec.num_identities);
    for (std::size_t id = 0; id < spec.num_identities; ++id) {
        Vec proto(spec.in_dim);
        for (double& v : proto) v = normal(rng);
        domain.prototypes.push_back(l2_normalize(proto));
    }

    domain.camera_maps.reserve(spec.num_cameras);
    for (std::size_t c = 0; c < spec.num_cameras; ++c) {
        domain.camera_maps.push_back(perturbed_identity(spec.in_dim, spec.camera_strength, rng));
    }
    domain.shift_map = perturbed_identity(spec.in_dim, spec.shift_strength, rng);

    const bool structured = spec.nuisance_rank > 0 && spec.nuisance_share > 0.0;
    // nuisance_seed 0 derives a domain-specific basis from the domain seed
    const std::uint64_t basis_seed =
        spec.nuisance_seed != 0 ? spec.nuisance_seed : 0x9e3779b9u ^ (spec.seed * 2654435761u);
    const Matrix basis =
        structured ? nuisance_basis(spec.in_dim, spec.nuisance_rank, basis_seed) : Matrix();
    const double shared_w =
        structured ? std::sqrt(spec.nuisance_share * static_cast<double>(spec.in_dim) /
                               static_cast<double>(spec.nuisance_rank))
                   : 0.0;
    const double iso_w = structured ? std::sqrt(1.0 - spec.nuisance_share) : 1.0;

    const std::size_t total = spec.num_identities * spec.samples_per_identity;
    domain.samples.reserve(total);
    domain.latents.reserve(total);
    for (std::size_t id = 0; id < spec.num_identities; ++id) {
        for (std::size_t s = 0; s < spec.samples_per_identity; ++s) {
            Vec latent = domain.prototypes[id];
            if (structured) {
                Vec z(spec.nuisance_rank);
                for (double& v : z) v = normal(rng);
                for (std::size_t i = 0; i < spec.in_dim; ++i) {
                    double shared = 0.0;
                    for (std::size_t c = 0; c < spec.nuisance_rank; ++c) {
                        shared += basis(i, c) * z[c];
                    }
                    latent[i] += spec.cluster_spread *
                                 (shared_w * shared + iso_w * normal(rng));
                }
            } else {
                for (double& v : latent) v += spec.cluster_spread * normal(rng);
            }
            const auto camera = static_cast<std::uint16_t>(s % spec.num_cameras);

            Sample sample;
            sample.identity = static_cast<std::uint32_t>(id) + spec.identity_label_offset;
            sample.camera = camera;
            sample.x = render(domain, latent, camera);
            domain.samples.push_back(std::move(sample));
            domain.latents.push_back(std::move(latent));
        }
    }
    return domain;
}

std::vector<Sample> camstyle_counterparts(const Domain& domain, std::size_t index,
                                          std::size_t how_many) {
    if (index >= domain.samples.size()) {
        throw std::out_of_range("camstyle_counterparts: sample index out of range");
    }
    const std::size_t c_total = domain.spec.num_cameras;
    if (how_many > c_total - 1) {
        throw std::invalid_argument("camstyle_counterparts: how_many exceeds C - 1");
    }
    const Sample& original = domain.samples[index];
    const Vec& latent = domain.latents[index];

    std::vector<Sample> counterparts;
    counterparts.reserve(how_many);
    for (std::size_t cam = 0; cam < c_total && counterparts.size() < how_many; ++cam) {
        if (cam == original.camera) continue;
        Sample cp;
        cp.identity = original.identity;
        cp.camera = static_cast<std::uint16_t>(cam);
        cp.counterpart_of = static_cast<std::int32_t>(index);
        cp.x = render(domain, latent, cam);
        counterparts.push_back(std::move(cp));
    }
    return counterparts;
}

}  // namespace imda
