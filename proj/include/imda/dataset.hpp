#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "imda/matrix.hpp"
#include "imda/synthetic.hpp"

namespace imda {

// In-memory dataset with the index structures the trainer needs. Real
// samples own one memory slot each; counterparts map onto the slot of the
// sample they were rendered from.
struct Dataset {
    std::size_t in_dim = 0;
    std::size_t num_cameras = 0;
    std::vector<Sample> samples;

    // derived by build_index()
    std::vector<std::size_t> real_indices;   // slot -> sample index
    std::vector<std::size_t> slot_of_sample; // sample index -> slot
    std::vector<std::vector<std::size_t>> counterparts_by_slot;
    std::vector<std::uint32_t> slot_identities;
    std::vector<std::uint16_t> slot_cameras;

    std::size_t real_count() const { return real_indices.size(); }
    void build_index();

    // Distinct identities in slot order of first appearance, sorted.
    std::vector<std::uint32_t> distinct_identities() const;
};

Dataset dataset_from_samples(std::vector<Sample> samples, std::size_t in_dim,
                             std::size_t num_cameras);

// Binary "IMDA1" container: header (magic, in_dim u32, count u64, C u16)
// followed by one record per sample (f64 vector, identity u32, camera u16,
// counterpart_of i32), all little-endian.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// Raw binary helpers shared with the checkpoint format.
void write_u16(std::ostream& out, std::uint16_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_i32(std::ostream& out, std::int32_t v);
void write_f64(std::ostream& out, double v);
void write_vec(std::ostream& out, const Vec& v);
void write_matrix(std::ostream& out, const Matrix& m);
std::uint16_t read_u16(std::istream& in);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
std::int32_t read_i32(std::istream& in);
double read_f64(std::istream& in);
Vec read_vec(std::istream& in);
Matrix read_matrix(std::istream& in);

}  // namespace imda
