#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include "ulm/dataset.hpp"

namespace ulm {

BlockGeometry SimulationConfig::geometry() const {
    BlockGeometry g;
    g.nz = nz;
    g.nx = nx;
    g.pitch_um = pitch_um;
    g.corner_z_um = depth_center_mm * 1000.0 - 0.5 * nz * pitch_um;
    g.corner_x_um = -0.5 * nx * pitch_um;
    return g;
}

Placement SimulationConfig::placement(const VascularGraph& g) const {
    Placement p;
    p.x_shift_um = -0.5 * (g.bbox_min.x + g.bbox_max.x);
    p.z_shift_um = depth_center_mm * 1000.0 - 0.5 * (g.bbox_min.z + g.bbox_max.z);
    return p;
}

void SimulationConfig::validate() const {
    probe.validate();
    sequence.validate(probe);
    if (nt < 1 || nz < 1 || nx < 1) throw ContractError("block dimensions must be positive");
    if (r < 1 || (r & (r - 1)) != 0) throw ContractError("r must be a power of two");
    if (psf_size < 1 || psf_size % 2 == 0) throw ContractError("PSF size must be odd");
    if (depth_center_mm * 1000.0 - 0.5 * nz * pitch_um < 500.0)
        throw ContractError("imaging window must start deeper than 0.5 mm");
}

std::uint64_t block_seed(std::uint64_t seed, int block_index) {
    return mix_seed(seed, static_cast<std::uint64_t>(block_index));
}

BlockSimulator::BlockSimulator(const VascularGraph& g, const SimulationConfig& cfg)
    : graph_(&g), cfg_(cfg), flow_(FlowField::from_graph(g)) {
    cfg_.validate();
    const double pitch_m = cfg.pitch_um * 1e-6;
    psf_ = synthesize_psf(cfg.probe, cfg.sequence, cfg.psf_size, cfg.psf_size, cfg.depth_center_mm * 1e-3, pitch_m);
    margin_ = cfg.psf_size / 2;
    const BlockGeometry geom = cfg.geometry();
    grid_.nz = cfg.nz + 2 * margin_;
    grid_.nx = cfg.nx + 2 * margin_;
    grid_.pitch_m = pitch_m;
    grid_.z0_m = (geom.corner_z_um + (0.5 - margin_) * cfg.pitch_um) * 1e-6;
    grid_.x0_m = (geom.corner_x_um + (0.5 - margin_) * cfg.pitch_um) * 1e-6;
}

SimulatedBlock BlockSimulator::simulate(double density_per_mm3, std::uint64_t seed, int block_index) const {
    SimulatedBlock out;
    const std::uint64_t bseed = block_seed(seed, block_index);
    Rng rng(bseed);
    out.motion = simulate_block_motion(*graph_, flow_, density_per_mm3, cfg_.nt,
                                       cfg_.sequence.frame_period_s(), rng);
    const Placement place = cfg_.placement(*graph_);
    const BlockGeometry geom = cfg_.geometry();

    IQBlock iq(cfg_.nt, grid_.nz, grid_.nx);
    for (int t = 0; t < cfg_.nt; ++t) {
        std::vector<Scatterer> scatterers;
        scatterers.reserve(out.motion.frames[static_cast<std::size_t>(t)].size());
        for (const Vec3& p : out.motion.frames[static_cast<std::size_t>(t)])
            scatterers.push_back({place.lateral(p) * 1e-6, place.depth(p) * 1e-6, 1.0});
        iq.set_frame(t, image_scatterers(scatterers, cfg_.probe, cfg_.sequence, grid_));
    }
    if (cfg_.svd_cutoff > 0) iq = svd_clutter_filter(iq, cfg_.svd_cutoff);

    std::vector<ComplexFrame> corr;
    corr.reserve(static_cast<std::size_t>(cfg_.nt));
    for (int t = 0; t < cfg_.nt; ++t) corr.push_back(correlation_map(iq.frame(t), psf_));

    DatasetRecord& rec = out.record;
    rec.chi = assemble_block(corr, 0, cfg_.nt, margin_, margin_, cfg_.nz, cfg_.nx);
    rec.psi = rasterize_tracks(out.motion.trajectories, geom, place, cfg_.r);
    rec.meta.density_per_mm3 = density_per_mm3;
    rec.meta.seed = bseed;
    rec.meta.r = cfg_.r;
    rec.meta.block_index = block_index;
    rec.meta.origin_z_um = geom.corner_z_um;
    rec.meta.origin_x_um = geom.corner_x_um;
    return out;
}

BinaryImage BlockSimulator::ground_truth(double density_per_mm3, std::uint64_t seed, int block_index) const {
    Rng rng(block_seed(seed, block_index));
    const BlockMotion motion = simulate_block_motion(*graph_, flow_, density_per_mm3, cfg_.nt,
                                                     cfg_.sequence.frame_period_s(), rng);
    return rasterize_tracks(motion.trajectories, cfg_.geometry(), cfg_.placement(*graph_), cfg_.r);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(threads, n); ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<SimulatedBlock> simulate_blocks(const BlockSimulator& sim, double density_per_mm3, int block_count,
                                            std::uint64_t seed, int threads, int first_index) {
    std::vector<SimulatedBlock> out(static_cast<std::size_t>(block_count));
    parallel_for(block_count, threads, [&](int i) {
        out[static_cast<std::size_t>(i)] = sim.simulate(density_per_mm3, seed, first_index + i);
    });
    return out;
}

std::vector<BinaryImage> ground_truth_masks(const BlockSimulator& sim, double density_per_mm3, int block_count,
                                            std::uint64_t seed, int threads, int first_index) {
    std::vector<BinaryImage> out(static_cast<std::size_t>(block_count));
    parallel_for(block_count, threads, [&](int i) {
        out[static_cast<std::size_t>(i)] = sim.ground_truth(density_per_mm3, seed, first_index + i);
    });
    return out;
}

DatasetSummary generate_dataset(const VascularGraph& g, double density_per_mm3, int block_count,
                                const SimulationConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                                bool held_out, int threads) {
    std::filesystem::create_directories(out_dir);
    const BlockSimulator sim(g, cfg);
    const auto splits = train_validation_split(block_count, seed);
    DatasetSummary summary;
    summary.entries.resize(static_cast<std::size_t>(block_count));
    parallel_for(block_count, threads, [&](int i) {
        const SimulatedBlock b = sim.simulate(density_per_mm3, seed, i);
        char name[32];
        std::snprintf(name, sizeof(name), "block_%05d.ulmb", i);
        try {
            save_record(out_dir / name, b.record);
        } catch (const std::exception& e) {
            throw std::runtime_error("block " + std::to_string(i) + ": " + e.what());
        }
        ManifestEntry& entry = summary.entries[static_cast<std::size_t>(i)];
        entry.file = name;
        entry.split = held_out ? Split::Test : splits[static_cast<std::size_t>(i)];
        entry.block_index = i;
        entry.origin_z_um = b.record.meta.origin_z_um;
        entry.origin_x_um = b.record.meta.origin_x_um;
    });
    save_manifest(out_dir / "manifest.txt", summary.entries);
    return summary;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir, std::vector<ManifestEntry>* entries) {
    const auto manifest = load_manifest(dir / "manifest.txt");
    std::vector<DatasetRecord> out;
    out.reserve(manifest.size());
    for (const auto& e : manifest) {
        DatasetRecord rec = load_record(dir / e.file);
        rec.meta.block_index = e.block_index;
        rec.meta.origin_z_um = e.origin_z_um;
        rec.meta.origin_x_um = e.origin_x_um;
        out.push_back(std::move(rec));
    }
    if (entries) *entries = manifest;
    return out;
}

}  // namespace ulm
