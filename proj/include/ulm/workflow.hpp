#pragma once

// End-to-end building blocks shared by the command-line tool and the
// acceptance experiments: graphs, datasets, both reconstruction methods and
// the comparison protocol.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ulm/config.hpp"
#include "ulm/dataset.hpp"
#include "ulm/evaluate.hpp"
#include "ulm/inference.hpp"
#include "ulm/neural/training.hpp"

namespace ulm {

struct GraphSet {
    std::vector<VascularGraph> train;
    VascularGraph test;  // held out from training
};

std::uint64_t train_graph_seed(const RunConfig& cfg, int k);
std::uint64_t test_graph_seed(const RunConfig& cfg);
GraphSet generate_graphs(const RunConfig& cfg);

// Seeds for test sets and references; replicate selects independent repeats.
std::uint64_t test_set_seed(const RunConfig& cfg, double density, int replicate = 0);
std::uint64_t reference_seed(const RunConfig& cfg, int replicate = 0);

// Training blocks of graph k go under out_dir/graph_<k>.
void generate_training_data(const RunConfig& cfg, const GraphSet& graphs, const std::filesystem::path& out_dir);
void load_training_data(const std::filesystem::path& dir, std::vector<DatasetRecord>& train,
                        std::vector<DatasetRecord>& validation);

std::vector<DatasetRecord> simulate_test_set(const RunConfig& cfg, const VascularGraph& test, double density,
                                             int replicate = 0, int block_count = -1);

// Expert pseudo-tracks: localize, accumulate on the r-times grid, binarize per block.
std::vector<BinaryImage> expert_masks(const RunConfig& cfg, const std::vector<DatasetRecord>& records);
std::vector<BinaryImage> cnn_masks(const RunConfig& cfg, const nn::Network<float>& net,
                                   const std::vector<DatasetRecord>& records);
std::vector<BinaryImage> truth_masks(const std::vector<DatasetRecord>& records);

// Union of the track masks of reference_blocks blocks at the reference density.
BinaryImage reference_angiogram(const RunConfig& cfg, const VascularGraph& test, int replicate = 0);
// Each density has its own seed stream; first_index skips blocks already used.
std::vector<BinaryImage> reference_block_masks(const RunConfig& cfg, const VascularGraph& test, double density,
                                               int block_count, int replicate = 0, int first_index = 0);

// Per-density block masks for filling curves, drawn after the reference
// blocks, and the union of every simulated track (reference plus all curve
// blocks) that they are scored against.
struct FillingData {
    std::vector<double> densities;
    std::vector<std::vector<BinaryImage>> masks;
    BinaryImage reference;
};

FillingData filling_data(const RunConfig& cfg, const VascularGraph& test, const std::vector<double>& densities,
                         int block_count, int replicate = 0);
std::vector<FillingSeries> filling_curves(const FillingData& data, const std::vector<int>& checkpoints);

// Ground truth, expert and Deep-stULM rows for one density.
std::vector<MethodRow> comparison_rows(double density, const std::vector<BinaryImage>& truth,
                                       const std::vector<BinaryImage>& expert, const std::vector<BinaryImage>& cnn,
                                       const BinaryImage& reference);

// Multi-image binary PBM (one P4 image per block).
void write_mask_stack(const std::filesystem::path& path, const std::vector<BinaryImage>& masks);
std::vector<BinaryImage> read_mask_stack(const std::filesystem::path& path);

}  // namespace ulm
