#include "ulm/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ulm/expert.hpp"

namespace ulm {

std::uint64_t train_graph_seed(const RunConfig& cfg, int k) {
    return mix_seed(cfg.vasculature.seed, static_cast<std::uint64_t>(k));
}

std::uint64_t test_graph_seed(const RunConfig& cfg) { return mix_seed(cfg.vasculature.seed, 0x7E570000ull); }

GraphSet generate_graphs(const RunConfig& cfg) {
    GraphSet set;
    for (int k = 0; k < cfg.data.train_graphs; ++k) {
        GraphConfig g = cfg.vasculature;
        g.seed = train_graph_seed(cfg, k);
        set.train.push_back(generate_synthetic_graph(g));
    }
    GraphConfig g = cfg.vasculature;
    g.seed = test_graph_seed(cfg);
    set.test = generate_synthetic_graph(g);
    return set;
}

std::uint64_t test_set_seed(const RunConfig& cfg, double density, int replicate) {
    const auto d = static_cast<std::uint64_t>(std::llround(density * 1000.0));
    return mix_seed(cfg.seed ^ 0x7E57ull, d * 1009 + static_cast<std::uint64_t>(replicate));
}

std::uint64_t reference_seed(const RunConfig& cfg, int replicate) {
    return mix_seed(cfg.seed ^ 0x5EFull, static_cast<std::uint64_t>(replicate));
}

void generate_training_data(const RunConfig& cfg, const GraphSet& graphs, const std::filesystem::path& out_dir) {
    const int n_graphs = static_cast<int>(graphs.train.size());
    if (n_graphs == 0) throw ContractError("no training graphs");
    for (int k = 0; k < n_graphs; ++k) {
        const int count = cfg.data.train_blocks / n_graphs + (k < cfg.data.train_blocks % n_graphs ? 1 : 0);
        generate_dataset(graphs.train[static_cast<std::size_t>(k)], cfg.data.train_density, count, cfg.simulation,
                         mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(k)),
                         out_dir / ("graph_" + std::to_string(k)), false, cfg.threads);
    }
}

void load_training_data(const std::filesystem::path& dir, std::vector<DatasetRecord>& train,
                        std::vector<DatasetRecord>& validation) {
    std::vector<std::filesystem::path> parts;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_directory() && e.path().filename().string().rfind("graph_", 0) == 0) parts.push_back(e.path());
    std::sort(parts.begin(), parts.end());
    if (parts.empty()) throw std::runtime_error("no graph_* datasets under " + dir.string());
    for (const auto& p : parts) {
        std::vector<ManifestEntry> entries;
        auto records = load_dataset(p, &entries);
        for (std::size_t i = 0; i < records.size(); ++i)
            (entries[i].split == Split::Validation ? validation : train).push_back(std::move(records[i]));
    }
}

std::vector<DatasetRecord> simulate_test_set(const RunConfig& cfg, const VascularGraph& test, double density,
                                             int replicate, int block_count) {
    const BlockSimulator sim(test, cfg.simulation);
    const int n = block_count < 0 ? cfg.data.test_blocks : block_count;
    auto blocks = simulate_blocks(sim, density, n, test_set_seed(cfg, density, replicate), cfg.threads);
    std::vector<DatasetRecord> out;
    out.reserve(blocks.size());
    for (auto& b : blocks) out.push_back(std::move(b.record));
    return out;
}

std::vector<BinaryImage> expert_masks(const RunConfig& cfg, const std::vector<DatasetRecord>& records) {
    std::vector<BinaryImage> out(records.size());
    const double pitch = cfg.simulation.pitch_um;
    parallel_for(static_cast<int>(records.size()), cfg.threads, [&](int i) {
        const auto& rec = records[static_cast<std::size_t>(i)];
        const auto dets = localize_block(rec.chi, cfg.evaluation.detection_threshold, pitch);
        out[static_cast<std::size_t>(i)] = accumulate_block(dets, rec.chi.nz, rec.chi.nx, pitch, rec.meta.r).binary();
    });
    return out;
}

std::vector<BinaryImage> cnn_masks(const RunConfig& cfg, const nn::Network<float>& net,
                                   const std::vector<DatasetRecord>& records) {
    std::vector<BinaryImage> out(records.size());
    const auto& mc = net.config();
    parallel_for(static_cast<int>(records.size()), cfg.threads, [&](int i) {
        const auto& chi = records[static_cast<std::size_t>(i)].chi;
        if (chi.nt == mc.nt && chi.nz == mc.nz && chi.nx == mc.nx) {
            out[static_cast<std::size_t>(i)] = nn::predict_mask(net, chi);
        } else {
            out[static_cast<std::size_t>(i)] = sliding_window_infer(chi, net, cfg.inference).mask;
        }
    });
    return out;
}

std::vector<BinaryImage> truth_masks(const std::vector<DatasetRecord>& records) {
    std::vector<BinaryImage> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.psi);
    return out;
}

std::vector<BinaryImage> reference_block_masks(const RunConfig& cfg, const VascularGraph& test, double density,
                                               int block_count, int replicate, int first_index) {
    const BlockSimulator sim(test, cfg.simulation);
    const auto d = static_cast<std::uint64_t>(std::llround(density * 1000.0));
    return ground_truth_masks(sim, density, block_count, mix_seed(reference_seed(cfg, replicate), d), cfg.threads,
                              first_index);
}

BinaryImage reference_angiogram(const RunConfig& cfg, const VascularGraph& test, int replicate) {
    return ground_truth_angiogram(
        reference_block_masks(cfg, test, cfg.data.reference_density, cfg.data.reference_blocks, replicate));
}

FillingData filling_data(const RunConfig& cfg, const VascularGraph& test, const std::vector<double>& densities,
                         int block_count, int replicate) {
    FillingData out;
    out.densities = densities;
    std::vector<BinaryImage> all =
        reference_block_masks(cfg, test, cfg.data.reference_density, cfg.data.reference_blocks, replicate);
    for (double d : densities) {
        out.masks.push_back(reference_block_masks(cfg, test, d, block_count, replicate, cfg.data.reference_blocks));
        all.insert(all.end(), out.masks.back().begin(), out.masks.back().end());
    }
    out.reference = ground_truth_angiogram(all);
    return out;
}

std::vector<FillingSeries> filling_curves(const FillingData& data, const std::vector<int>& checkpoints) {
    std::vector<FillingSeries> out;
    for (std::size_t k = 0; k < data.densities.size(); ++k) {
        char label[32];
        std::snprintf(label, sizeof(label), "d%g", data.densities[k]);
        out.push_back({label, network_filling_curve(data.masks[k], data.reference, checkpoints)});
    }
    return out;
}

std::vector<MethodRow> comparison_rows(double density, const std::vector<BinaryImage>& truth,
                                       const std::vector<BinaryImage>& expert, const std::vector<BinaryImage>& cnn,
                                       const BinaryImage& reference) {
    std::vector<NamedMask> methods;
    if (!truth.empty()) methods.push_back({"ground_truth", ground_truth_angiogram(truth)});
    if (!expert.empty()) methods.push_back({"expert", ground_truth_angiogram(expert)});
    if (!cnn.empty()) methods.push_back({"deep_stulm", ground_truth_angiogram(cnn)});
    return compare_methods(density, methods, reference);
}

void write_mask_stack(const std::filesystem::path& path, const std::vector<BinaryImage>& masks) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    for (const auto& m : masks) {
        os << "P4\n" << m.cols << ' ' << m.rows << '\n';
        const int row_bytes = (m.cols + 7) / 8;
        std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
        for (int i = 0; i < m.rows; ++i) {
            std::fill(row.begin(), row.end(), 0);
            for (int j = 0; j < m.cols; ++j)
                if (m(i, j)) row[static_cast<std::size_t>(j / 8)] |= static_cast<unsigned char>(0x80u >> (j % 8));
            os.write(reinterpret_cast<const char*>(row.data()), row_bytes);
        }
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<BinaryImage> read_mask_stack(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::vector<BinaryImage> out;
    std::string magic;
    while (is >> magic) {
        int cols = 0, rows = 0;
        if (magic != "P4" || !(is >> cols >> rows) || cols < 0 || rows < 0)
            throw FormatError("not a binary PBM stack: " + path.string());
        is.get();
        BinaryImage m(rows, cols);
        const int row_bytes = (cols + 7) / 8;
        std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
        for (int i = 0; i < rows; ++i) {
            if (!is.read(reinterpret_cast<char*>(row.data()), row_bytes)) throw FormatError("truncated PBM: " + path.string());
            for (int j = 0; j < cols; ++j) m(i, j) = (row[static_cast<std::size_t>(j / 8)] >> (7 - j % 8)) & 1u;
        }
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace ulm
