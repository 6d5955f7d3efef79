#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "imda/matrix.hpp"

namespace imda {

struct DomainSpec {
    std::size_t num_identities = 50;
    std::size_t samples_per_identity = 12;
    std::size_t num_cameras = 4;
    std::size_t in_dim = 32;
    double cluster_spread = 0.15;   // sigma_id
    double camera_strength = 0.2;   // sigma_cam
    double shift_strength = 0.0;    // sigma_shift; > 0 marks a shifted (target-style) domain
    std::uint64_t seed = 0;
    std::uint32_t identity_label_offset = 0;  // keeps label spaces disjoint across domains

    // Within-identity variation mixes a low-rank component shared across
    // the domain's identities (pose-like nuisance directions) with isotropic
    // noise. nuisance_share is the fraction of variance in that subspace;
    // rank 0 disables it. Seed 0 derives the basis from the domain seed, so
    // distinct domains vary along distinct directions.
    std::size_t nuisance_rank = 5;
    double nuisance_share = 0.0;
    std::uint64_t nuisance_seed = 0;

    void validate() const;
};

struct Sample {
    Vec x;
    std::uint32_t identity = 0;
    std::uint16_t camera = 0;
    std::int32_t counterpart_of = -1;  // -1: a real image, otherwise index of the original
};

// A generated domain keeps its latents and transform maps so that
// style-transferred counterparts can be regenerated exactly.
struct Domain {
    DomainSpec spec;
    std::vector<Sample> samples;
    std::vector<Vec> prototypes;     // per identity, unit vectors
    std::vector<Matrix> camera_maps; // per camera: I + sigma_cam * R_c
    Matrix shift_map;                // I + sigma_shift * S (identity when sigma_shift = 0)
    std::vector<Vec> latents;        // per sample: prototype + sigma_id * noise
};

// Identity prototypes on the unit sphere, per-camera linear style maps, an
// optional global domain shift, and round-robin camera assignment. Pure
// function of the spec.
Domain generate_domain(const DomainSpec& spec);

// Re-renders sample `index` under `how_many` other cameras from its stored
// latent. Identity is preserved exactly; counterpart_of points back at the
// original.
std::vector<Sample> camstyle_counterparts(const Domain& domain, std::size_t index,
                                          std::size_t how_many);

}  // namespace imda
