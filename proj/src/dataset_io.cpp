#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>
#include <sstream>

#include "detail/binary_io.hpp"
#include "ulm/dataset.hpp"

namespace ulm {

using detail::get_le;
using detail::put_le;

void write_record(std::ostream& os, const DatasetRecord& rec) {
    const auto& chi = rec.chi;
    if (rec.psi.rows != rec.meta.r * chi.nz || rec.psi.cols != rec.meta.r * chi.nx)
        throw ContractError("track mask footprint must be r times the block footprint");
    os.write("ULMB", 4);
    put_le<std::uint16_t>(os, kBlockFormatVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(chi.nt));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(chi.nz));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(chi.nx));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(rec.meta.r));
    put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(rec.meta.density_per_mm3));
    put_le<std::uint64_t>(os, rec.meta.seed);
    for (const cfloat& v : chi.data) {
        put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v.real()));
        put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v.imag()));
    }
    const int row_bytes = (rec.psi.cols + 7) / 8;
    std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
    for (int i = 0; i < rec.psi.rows; ++i) {
        std::fill(row.begin(), row.end(), 0);
        for (int j = 0; j < rec.psi.cols; ++j)
            if (rec.psi(i, j)) row[static_cast<std::size_t>(j / 8)] |= static_cast<unsigned char>(0x80u >> (j % 8));
        os.write(reinterpret_cast<const char*>(row.data()), row_bytes);
    }
    if (!os) throw std::runtime_error("write failed");
}

DatasetRecord read_record(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "ULMB") throw FormatError("bad magic, expected ULMB");
    const auto version = get_le<std::uint16_t>(is);
    if (version != kBlockFormatVersion) throw FormatError("unsupported block version " + std::to_string(version));
    DatasetRecord rec;
    const int nt = static_cast<int>(get_le<std::uint32_t>(is));
    const int nz = static_cast<int>(get_le<std::uint32_t>(is));
    const int nx = static_cast<int>(get_le<std::uint32_t>(is));
    rec.meta.r = static_cast<int>(get_le<std::uint32_t>(is));
    rec.meta.density_per_mm3 = std::bit_cast<double>(get_le<std::uint64_t>(is));
    rec.meta.seed = get_le<std::uint64_t>(is);
    rec.chi = CorrelationBlock(nt, nz, nx);
    for (cfloat& v : rec.chi.data) {
        const float re = std::bit_cast<float>(get_le<std::uint32_t>(is));
        const float im = std::bit_cast<float>(get_le<std::uint32_t>(is));
        v = {re, im};
    }
    rec.psi = BinaryImage(rec.meta.r * nz, rec.meta.r * nx);
    const int row_bytes = (rec.psi.cols + 7) / 8;
    std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
    for (int i = 0; i < rec.psi.rows; ++i) {
        if (!is.read(reinterpret_cast<char*>(row.data()), row_bytes)) throw FormatError("truncated track mask");
        for (int j = 0; j < rec.psi.cols; ++j)
            rec.psi(i, j) = (row[static_cast<std::size_t>(j / 8)] >> (7 - j % 8)) & 1u;
    }
    return rec;
}

void save_record(const std::filesystem::path& path, const DatasetRecord& rec) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_record(os, rec);
}

DatasetRecord load_record(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    return read_record(is);
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split label '" + s + "'");
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "ulmmanifest v1\n";
    os.precision(17);
    for (const auto& e : entries)
        os << e.file << ' ' << split_name(e.split) << ' ' << e.block_index << ' ' << e.origin_z_um << ' '
           << e.origin_x_um << '\n';
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "ulmmanifest v1") throw FormatError("missing 'ulmmanifest v1' header");
    std::vector<ManifestEntry> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string split;
        if (!(ls >> e.file >> split >> e.block_index >> e.origin_z_um >> e.origin_x_um))
            throw FormatError("malformed manifest line: " + line);
        e.split = parse_split(split);
        out.push_back(e);
    }
    return out;
}

std::vector<Split> train_validation_split(int block_count, std::uint64_t seed) {
    std::vector<int> order(static_cast<std::size_t>(block_count));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto ha = mix_seed(seed ^ 0x5D1Full, static_cast<std::uint64_t>(a));
        const auto hb = mix_seed(seed ^ 0x5D1Full, static_cast<std::uint64_t>(b));
        return ha != hb ? ha < hb : a < b;
    });
    const int n_val = static_cast<int>(std::lround(0.1 * block_count));
    std::vector<Split> split(static_cast<std::size_t>(block_count), Split::Train);
    for (int k = 0; k < n_val; ++k) split[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = Split::Validation;
    return split;
}

}  // namespace ulm
