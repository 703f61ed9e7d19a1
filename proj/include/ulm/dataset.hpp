#pragma once

// Paired (chi, psi) records, their binary container, and the end-to-end
// simulation that produces them.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ulm/acoustics.hpp"
#include "ulm/preprocess.hpp"
#include "ulm/vasculature.hpp"

namespace ulm {

struct RecordMetadata {
    double density_per_mm3 = 0;
    std::uint64_t seed = 0;
    int r = 8;
    int block_index = 0;
    double origin_z_um = 0;  // block corner, imaging-plane coordinates
    double origin_x_um = 0;
};

struct DatasetRecord {
    CorrelationBlock chi;
    BinaryImage psi;
    RecordMetadata meta;
};

inline constexpr std::uint16_t kBlockFormatVersion = 1;

// Little-endian container: "ULMB", u16 version, u32 {nt, nz, nx, r},
// f64 density, u64 seed, chi as interleaved f32 (t, z, x), psi bit-packed rows.
void write_record(std::ostream& os, const DatasetRecord& rec);
DatasetRecord read_record(std::istream& is);
void save_record(const std::filesystem::path& path, const DatasetRecord& rec);
DatasetRecord load_record(const std::filesystem::path& path);

enum class Split { Train, Validation, Test };
const char* split_name(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
    std::string file;
    Split split = Split::Train;
    int block_index = 0;
    double origin_z_um = 0;
    double origin_x_um = 0;
};

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

// Deterministic 90/10 split: the round(n / 10) blocks with the smallest
// hash(seed, index) go to validation.
std::vector<Split> train_validation_split(int block_count, std::uint64_t seed);

struct SimulationConfig {
    ProbeConfig probe;
    SequenceConfig sequence;
    int nt = 512;
    int nz = 32;
    int nx = 32;
    int r = 8;
    double pitch_um = 25.0;
    double depth_center_mm = 4.0;
    int psf_size = 9;
    int svd_cutoff = 0;

    BlockGeometry geometry() const;
    Placement placement(const VascularGraph& g) const;
    void validate() const;
};

// One simulated block; the motion is kept for localization-error checks.
struct SimulatedBlock {
    DatasetRecord record;
    BlockMotion motion;
};

std::uint64_t block_seed(std::uint64_t seed, int block_index);

class BlockSimulator {
public:
    BlockSimulator(const VascularGraph& g, const SimulationConfig& cfg);

    SimulatedBlock simulate(double density_per_mm3, std::uint64_t seed, int block_index) const;
    // Track mask only; identical to simulate().record.psi for the same inputs.
    BinaryImage ground_truth(double density_per_mm3, std::uint64_t seed, int block_index) const;

    const PSFPatch& psf() const { return psf_; }
    const ImageGrid& imaging_grid() const { return grid_; }

private:
    const VascularGraph* graph_;
    SimulationConfig cfg_;
    FlowField flow_;
    PSFPatch psf_;
    ImageGrid grid_;  // block footprint plus a PSF half-width margin
    int margin_ = 0;
};

std::vector<SimulatedBlock> simulate_blocks(const BlockSimulator& sim, double density_per_mm3, int block_count,
                                            std::uint64_t seed, int threads = 1, int first_index = 0);

std::vector<BinaryImage> ground_truth_masks(const BlockSimulator& sim, double density_per_mm3, int block_count,
                                            std::uint64_t seed, int threads = 1, int first_index = 0);

struct DatasetSummary {
    std::vector<ManifestEntry> entries;
};

// Simulates `block_count` blocks and writes block_NNNNN.ulmb + manifest.txt
// under out_dir. held_out marks every block as test data.
DatasetSummary generate_dataset(const VascularGraph& g, double density_per_mm3, int block_count,
                                const SimulationConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                                bool held_out, int threads = 1);

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir, std::vector<ManifestEntry>* entries = nullptr);

// Runs fn(i) for i in [0, n) over `threads` workers; results must be written
// by index so output is independent of scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace ulm
