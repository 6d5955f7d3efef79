#include "imda/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "imda/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset format assumes a little-endian host");

namespace imda {

namespace {

constexpr char kMagic[5] = {'I', 'M', 'D', 'A', '1'};

template <typename T>
void write_raw(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("dataset: unexpected end of file");
    return v;
}

}  // namespace

void write_u16(std::ostream& out, std::uint16_t v) { write_raw(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { write_raw(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_raw(out, v); }
void write_i32(std::ostream& out, std::int32_t v) { write_raw(out, v); }
void write_f64(std::ostream& out, double v) { write_raw(out, v); }

void write_vec(std::ostream& out, const Vec& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void write_matrix(std::ostream& out, const Matrix& m) {
    write_u64(out, m.rows);
    write_u64(out, m.cols);
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

std::uint16_t read_u16(std::istream& in) { return read_raw<std::uint16_t>(in); }
std::uint32_t read_u32(std::istream& in) { return read_raw<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_raw<std::uint64_t>(in); }
std::int32_t read_i32(std::istream& in) { return read_raw<std::int32_t>(in); }
double read_f64(std::istream& in) { return read_raw<double>(in); }

Vec read_vec(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    Vec v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw IoError("dataset: unexpected end of file in vector");
    return v;
}

Matrix read_matrix(std::istream& in) {
    const std::uint64_t rows = read_u64(in);
    const std::uint64_t cols = read_u64(in);
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!in) throw IoError("dataset: unexpected end of file in matrix");
    return m;
}

void Dataset::build_index() {
    real_indices.clear();
    slot_of_sample.assign(samples.size(), 0);
    counterparts_by_slot.clear();
    slot_identities.clear();
    slot_cameras.clear();

    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].counterpart_of >= 0) continue;
        slot_of_sample[i] = real_indices.size();
        real_indices.push_back(i);
        slot_identities.push_back(samples[i].identity);
        slot_cameras.push_back(samples[i].camera);
    }
    counterparts_by_slot.assign(real_indices.size(), {});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::int32_t orig = samples[i].counterpart_of;
        if (orig < 0) continue;
        const auto orig_idx = static_cast<std::size_t>(orig);
        if (orig_idx >= samples.size() || samples[orig_idx].counterpart_of >= 0) {
            throw IoError("dataset: counterpart_of does not point at a real sample");
        }
        const std::size_t slot = slot_of_sample[orig_idx];
        slot_of_sample[i] = slot;
        counterparts_by_slot[slot].push_back(i);
    }
}

std::vector<std::uint32_t> Dataset::distinct_identities() const {
    std::set<std::uint32_t> ids;
    for (const Sample& s : samples) ids.insert(s.identity);
    return {ids.begin(), ids.end()};
}

Dataset dataset_from_samples(std::vector<Sample> samples, std::size_t in_dim,
                             std::size_t num_cameras) {
    Dataset d;
    d.in_dim = in_dim;
    d.num_cameras = num_cameras;
    d.samples = std::move(samples);
    d.build_index();
    return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, static_cast<std::uint32_t>(dataset.in_dim));
    write_u64(out, dataset.samples.size());
    write_u16(out, static_cast<std::uint16_t>(dataset.num_cameras));
    for (const Sample& s : dataset.samples) {
        if (s.x.size() != dataset.in_dim) throw IoError("dataset: sample dim mismatch on save");
        out.write(reinterpret_cast<const char*>(s.x.data()),
                  static_cast<std::streamsize>(s.x.size() * sizeof(double)));
        write_u32(out, s.identity);
        write_u16(out, s.camera);
        write_i32(out, s.counterpart_of);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError(path.string() + ": not an IMDA1 dataset file");
    }
    Dataset d;
    d.in_dim = read_u32(in);
    const std::uint64_t count = read_u64(in);
    d.num_cameras = read_u16(in);
    d.samples.resize(count);
    for (Sample& s : d.samples) {
        s.x.resize(d.in_dim);
        in.read(reinterpret_cast<char*>(s.x.data()),
                static_cast<std::streamsize>(d.in_dim * sizeof(double)));
        if (!in) throw IoError(path.string() + ": truncated sample record");
        s.identity = read_u32(in);
        s.camera = read_u16(in);
        s.counterpart_of = read_i32(in);
    }
    d.build_index();
    return d;
}

}  // namespace imda
