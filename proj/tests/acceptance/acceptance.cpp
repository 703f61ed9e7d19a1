// Acceptance run: one PASS/FAIL line per criterion, each with the measured
// quantities it was judged on. Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../support/gradient_suite.hpp"
#include "ulm/acoustics.hpp"
#include "ulm/config.hpp"
#include "ulm/expert.hpp"
#include "ulm/neural/checkpoint.hpp"
#include "ulm/neural/optim.hpp"
#include "ulm/workflow.hpp"

namespace fs = std::filesystem;
using namespace ulm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

int popcount(const BinaryImage& m) { return static_cast<int>(std::count(m.data.begin(), m.data.end(), 1)); }

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// 1. Finite-difference gradient suite, 20 random shapes for every layer.
Outcome gradient_suite() {
    const auto t0 = Clock::now();
    test::GradientSuite s(20260101);
    const std::vector<test::GradientResult> results{s.conv3d(20),   s.maxpool(20),       s.avgpool(20), s.prelu(20),
                                                    s.resize2x(20), s.concat(20),        s.temporal_mean(20),
                                                    s.sigmoid(20),  s.dice(20),          s.network(20)};
    const double secs = seconds_since(t0);
    Outcome o{secs < 120, ""};
    double worst = 0;
    for (const auto& r : results) {
        o.pass = o.pass && r.shapes >= 20 && r.worst < 1e-3;
        worst = std::max(worst, r.worst);
        o.detail += r.layer + " " + fmt("%.1e", r.worst) + ", ";
    }
    o.detail += "worst " + fmt("%.2e", worst) + ", runtime " + fmt("%.1f s", secs);
    return o;
}

// Nearest 25 um image node, then a 2.5 um grid of +-40 um around it.
ImageGrid fine_grid(double x, double z) {
    ImageGrid g;
    g.pitch_m = 2.5e-6;
    g.nz = g.nx = 33;
    g.z0_m = std::round(z / 25e-6) * 25e-6 - 16 * g.pitch_m;
    g.x0_m = std::round(x / 25e-6) * 25e-6 - 16 * g.pitch_m;
    return g;
}

// 2. Beamformed peak position and linearity of the scatterer to image map.
Outcome beamforming() {
    const ProbeConfig probe;
    const SequenceConfig seq;
    Rng rng(2);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const double x = (uniform01(rng) - 0.5) * 3e-3, z = 3e-3 + 2e-3 * uniform01(rng);
        const ImageGrid g = fine_grid(x, z);
        const ComplexFrame img = image_scatterers({{x, z, 1.0}}, probe, seq, g);
        int bi = 0, bj = 0;
        for (int i = 0; i < g.nz; ++i)
            for (int j = 0; j < g.nx; ++j)
                if (std::abs(img(i, j)) > std::abs(img(bi, bj))) {
                    bi = i;
                    bj = j;
                }
        worst = std::max(worst, std::hypot(g.z(bi) - z, g.x(bj) - x) * 1e6);
    }
    double lin = 0;
    for (int trial = 0; trial < 5; ++trial) {
        const Scatterer s1{(uniform01(rng) - 0.5) * 1e-3, 3.8e-3 + 0.4e-3 * uniform01(rng), 0.5 + uniform01(rng)};
        const Scatterer s2{(uniform01(rng) - 0.5) * 1e-3, 3.8e-3 + 0.4e-3 * uniform01(rng), 0.5 + uniform01(rng)};
        ImageGrid g;
        g.nz = g.nx = 48;
        g.z0_m = 3.4e-3;
        g.x0_m = -0.6e-3;
        const ComplexFrame a = image_scatterers({s1}, probe, seq, g), b = image_scatterers({s2}, probe, seq, g);
        const ComplexFrame ab = image_scatterers({s1, s2}, probe, seq, g);
        double num = 0, den = 0;
        for (std::size_t k = 0; k < ab.size(); ++k) {
            num += std::norm(std::complex<double>(ab.data[k]) - std::complex<double>(a.data[k]) -
                             std::complex<double>(b.data[k]));
            den += std::norm(std::complex<double>(ab.data[k]));
        }
        lin = std::max(lin, std::sqrt(num / den));
    }
    return {worst <= 12.5 && lin <= 1e-6,
            "worst peak error " + fmt("%.2f um", worst) + " over 20 scatterers, linearity residual " + fmt("%.1e", lin)};
}

// 3. Poiseuille profile invariants and the velocity calibration endpoints.
Outcome flow_physics() {
    bool ok = true;
    double worst_quad = 0, worst_wall = 0;
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
        const double R = 1.0 + 27.6 * uniform01(rng), v = mean_velocity(R);
        ok = ok && poiseuille_velocity(0, R, v) == v;
        worst_wall = std::max(worst_wall, poiseuille_velocity(R * (1 - 1e-9), R, v) / v);
        const int n = 20000;
        double flux = 0;
        for (int i = 0; i < n; ++i) {
            const double rho = (i + 0.5) * R / n;
            flux += poiseuille_velocity(rho, R, v) * 2 * std::numbers::pi * rho * (R / n);
        }
        worst_quad = std::max(worst_quad, std::abs(flux / (std::numbers::pi * R * R) - v / 2) / (v / 2));
    }
    const double e_lo = std::abs(mean_velocity(1.0) - 0.0093) / 0.0093;
    const double e_hi = std::abs(mean_velocity(28.6) - 5.4) / 5.4;
    // Edge velocities of a dilated graph follow the pre-dilation radii.
    const VascularGraph g = generate_synthetic_graph(RunConfig::desk().vasculature);
    const FlowField flow = FlowField::from_graph(g);
    double edge_err = 0;
    for (std::size_t e = 0; e < g.edges.size(); ++e)
        edge_err = std::max(edge_err, std::abs(flow.v_mean_mm_s[e] - mean_velocity(g.edges[e].radius_um / g.dilation)) /
                                          flow.v_mean_mm_s[e]);
    ok = ok && worst_quad < 1e-6 && worst_wall < 1e-6 && e_lo < 1e-12 && e_hi < 1e-12 && edge_err < 1e-12;
    return {ok, "quadrature " + fmt("%.1e", worst_quad) + ", wall " + fmt("%.1e", worst_wall) + ", endpoints " +
                    fmt("%.1e", e_lo) + " / " + fmt("%.1e", e_hi) + ", graph edges " + fmt("%.1e", edge_err)};
}

// 4. Correlation magnitude bound over generated blocks.
Outcome correlation_bound() {
    const RunConfig cfg = RunConfig::desk();
    const GraphSet gs = generate_graphs(cfg);
    const BlockSimulator sim(gs.train.front(), cfg.simulation);
    std::size_t voxels = 0;
    double worst = 0;
    int blocks = 0;
    while (voxels < 1000000) {
        for (double d : {5.0, 20.0}) {
            const DatasetRecord rec = sim.simulate(d, 44, blocks).record;
            for (const cfloat& v : rec.chi.data) worst = std::max(worst, double(std::abs(v)));
            voxels += rec.chi.data.size();
            ++blocks;
        }
    }
    return {worst <= 1 + 1e-6,
            "max |chi| " + fmt("%.7f", worst) + " over " + std::to_string(voxels) + " voxels in " + std::to_string(blocks) + " blocks"};
}

// 5. Expert localization on frames holding one isolated bubble.
Outcome expert_sparse() {
    const RunConfig cfg = RunConfig::desk();
    const GraphSet gs = generate_graphs(cfg);
    const BlockSimulator sim(gs.test, cfg.simulation);
    const Placement place = cfg.simulation.placement(gs.test);
    const BlockGeometry geom = cfg.simulation.geometry();
    const double pitch = cfg.simulation.pitch_um;
    const double guard = 4 * pitch, inset = 2 * pitch;
    const double side_z = geom.nz * pitch, side_x = geom.nx * pitch;
    int frames = 0, single = 0;
    double sq = 0;
    for (int b = 0; b < 60 && frames < 400; ++b) {
        const SimulatedBlock blk = sim.simulate(2.0, 55, b);
        const auto dets = localize_block(blk.record.chi, cfg.evaluation.detection_threshold, pitch);
        for (int t = 0; t < cfg.simulation.nt; ++t) {
            std::vector<std::pair<double, double>> near;
            for (const Vec3& p : blk.motion.frames[static_cast<std::size_t>(t)]) {
                const double z = place.depth(p) - geom.corner_z_um, x = place.lateral(p) - geom.corner_x_um;
                if (z > -guard && z < side_z + guard && x > -guard && x < side_x + guard) near.push_back({z, x});
            }
            if (near.size() != 1) continue;
            const auto [z, x] = near.front();
            if (z < inset || z > side_z - inset || x < inset || x > side_x - inset) continue;
            ++frames;
            std::vector<const Detection*> hit;
            for (const auto& d : dets)
                if (d.frame == t) hit.push_back(&d);
            if (hit.size() != 1) continue;
            ++single;
            sq += std::pow(hit.front()->z_um - z, 2) + std::pow(hit.front()->x_um - x, 2);
        }
    }
    const double rate = frames ? double(single) / frames : 0;
    const double rms = single ? std::sqrt(sq / single) : INFINITY;
    return {frames >= 100 && rate >= 0.9 && rms < 10.0,
            std::to_string(frames) + " isolated frames, single detection " + fmt("%.1f %%", 100 * rate) + ", RMS error " +
                fmt("%.2f um", rms)};
}

std::vector<DatasetRecord> busiest_blocks(const RunConfig& cfg, int count) {
    const GraphSet gs = generate_graphs(cfg);
    const BlockSimulator sim(gs.train.front(), cfg.simulation);
    auto blocks = simulate_blocks(sim, cfg.data.train_density, 12, 66);
    std::stable_sort(blocks.begin(), blocks.end(), [](const SimulatedBlock& a, const SimulatedBlock& b) {
        return popcount(a.record.psi) > popcount(b.record.psi);
    });
    std::vector<DatasetRecord> out;
    for (int i = 0; i < count; ++i) out.push_back(blocks[static_cast<std::size_t>(i)].record);
    return out;
}

// 6. Two desk blocks memorized within 200 phase-1 epochs, bit-reproducible.
Outcome overfit() {
    const RunConfig cfg = RunConfig::desk();
    const auto recs = busiest_blocks(cfg, 2);
    std::vector<const DatasetRecord*> tr{&recs[0], &recs[1]};
    nn::TrainConfig tc = cfg.training;
    tc.batch_size = 2;
    tc.threads = 1;
    const nn::PhaseConfig phase{{cfg.training.phase1.schedule.start, {}, 0.1}, 200, cfg.training.phase1.dilation_radius};
    auto run = [&](int threads) {
        tc.threads = threads;
        nn::Network<float> net(cfg.model);
        net.initialize(mix_seed(tc.seed, 0xC0FFEE));
        return nn::train_phase(net, tr, {}, phase, 1, tc);
    };
    const auto a = run(1), b = run(1);
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].train_loss == b[i].train_loss;
    int first = -1;
    for (const auto& row : a)
        if (row.train_loss < 0.2) {
            first = row.epoch;
            break;
        }
    return {first >= 0 && same,
            "first epoch below 0.2: " + (first >= 0 ? std::to_string(first) : std::string("none")) + ", final loss " +
                fmt("%.4f", a.back().train_loss) + ", repeated run " + (same ? "identical" : "differs")};
}

// 7. Desk pipeline per seed: CNN versus expert at the highest test density.
Outcome desk_comparison(const fs::path& work) {
    const auto t0 = Clock::now();
    std::vector<double> cnn_p, exp_p, cnn_d, exp_d;
    std::string per_seed;
    for (std::uint64_t seed : {1, 2, 3}) {
        RunConfig cfg = RunConfig::desk();
        cfg.seed = seed;
        cfg.vasculature.seed = mix_seed(cfg.vasculature.seed, seed);
        cfg.training.seed = seed;
        const GraphSet gs = generate_graphs(cfg);
        const fs::path dir = work / ("desk_seed" + std::to_string(seed));
        fs::remove_all(dir);
        generate_training_data(cfg, gs, dir / "train");
        std::vector<DatasetRecord> train, val;
        load_training_data(dir / "train", train, val);
        const auto result = nn::train_two_phase(train, val, cfg.model, cfg.training, dir / "model");
        const double d = *std::max_element(cfg.data.test_densities.begin(), cfg.data.test_densities.end());
        const auto test = simulate_test_set(cfg, gs.test, d);
        const auto rows = comparison_rows(d, truth_masks(test), expert_masks(cfg, test),
                                          cnn_masks(cfg, result.model, test), reference_angiogram(cfg, gs.test));
        for (const auto& r : rows) {
            if (r.method == "expert") {
                exp_p.push_back(r.report.precision.value_or(0));
                exp_d.push_back(r.report.dice.value_or(0));
            } else if (r.method == "deep_stulm") {
                cnn_p.push_back(r.report.precision.value_or(0));
                cnn_d.push_back(r.report.dice.value_or(0));
            }
        }
        per_seed += " seed " + std::to_string(seed) + ": precision " + fmt("%.1f", 100 * cnn_p.back()) + " vs " +
                    fmt("%.1f", 100 * exp_p.back()) + ", dice " + fmt("%.1f", 100 * cnn_d.back()) + " vs " +
                    fmt("%.1f", 100 * exp_d.back()) + ";";
    }
    const double secs = seconds_since(t0);
    const double cp = median3(cnn_p), ep = median3(exp_p), cd = median3(cnn_d), ed = median3(exp_d);
    return {cp > ep && cd >= ed && secs <= 7200,
            "median precision CNN " + fmt("%.1f", 100 * cp) + " vs expert " + fmt("%.1f", 100 * ep) + ", median dice " +
                fmt("%.1f", 100 * cd) + " vs " + fmt("%.1f", 100 * ed) + " (percent);" + per_seed + " runtime " +
                fmt("%.0f s", secs)};
}

// Ground-truth filling data per replicate for the densities used by 8 and 9.
struct FillingStudy {
    std::vector<int> checkpoints;
    std::vector<double> densities{1, 2, 5, 10, 20};
    std::vector<FillingData> reps;

    FillingStudy() {
        const RunConfig cfg = RunConfig::desk();
        checkpoints = cfg.evaluation.checkpoints;
        const GraphSet gs = generate_graphs(cfg);
        for (int rep = 0; rep < 3; ++rep) reps.push_back(filling_data(cfg, gs.test, densities, checkpoints.back(), rep));
    }
    std::size_t index(double d) const {
        return static_cast<std::size_t>(std::find(densities.begin(), densities.end(), d) - densities.begin());
    }
    double filling(int rep, double d, int blocks) const {
        const FillingData& f = reps[static_cast<std::size_t>(rep)];
        return network_filling_curve(f.masks[index(d)], f.reference, {blocks}).front().dice;
    }
};

// 8. Filling curves rise with N_b, and doubling the density never hurts.
Outcome filling_curves(const FillingStudy& st) {
    bool monotone = true, dominant = true;
    std::string where;
    for (const FillingData& rep : st.reps)
        for (const FillingSeries& curve : filling_curves(rep, st.checkpoints))
            for (std::size_t k = 1; k < curve.points.size(); ++k)
                if (curve.points[k].dice < curve.points[k - 1].dice) {
                    monotone = false;
                    where += " decrease for " + curve.label + " at N_b " + std::to_string(curve.points[k].blocks) + ";";
                }
    std::string table;
    for (auto [lo, hi] : {std::pair{1.0, 2.0}, std::pair{5.0, 10.0}, std::pair{10.0, 20.0}})
        for (int n : st.checkpoints) {
            const double a = median3({st.filling(0, lo, n), st.filling(1, lo, n), st.filling(2, lo, n)});
            const double b = median3({st.filling(0, hi, n), st.filling(1, hi, n), st.filling(2, hi, n)});
            if (b < a) {
                dominant = false;
                where += " " + fmt("%g", hi) + " below " + fmt("%g", lo) + " at N_b " + std::to_string(n) + ";";
            }
            if (n == st.checkpoints.back())
                table += " d" + fmt("%g", lo) + "/d" + fmt("%g", hi) + " at " + std::to_string(n) + ": " +
                         fmt("%.3f", a) + " / " + fmt("%.3f", b) + ";";
        }
    return {monotone && dominant, std::string(monotone ? "nondecreasing" : "NOT nondecreasing") + ", " +
                                      (dominant ? "2x density dominates" : "2x density does not dominate") + ";" + table +
                                      where};
}

// 9. Half the blocks at twice the density fills the network equally.
Outcome half_time(const FillingStudy& st) {
    bool ok = true;
    std::string detail;
    for (auto [d, n] : {std::pair{1.0, 500}, std::pair{5.0, 200}, std::pair{10.0, 100}}) {
        std::vector<double> diffs;
        for (int rep = 0; rep < 3; ++rep) diffs.push_back(st.filling(rep, 2 * d, n / 2) - st.filling(rep, d, n));
        const double m = median3(diffs);
        ok = ok && std::abs(m) <= 0.05;
        detail += " (" + fmt("%g", d) + ", " + std::to_string(n) + ") vs (" + fmt("%g", 2 * d) + ", " +
                  std::to_string(n / 2) + "): " + fmt("%+.1f", 100 * m) + " points;";
    }
    return {ok, "median dice difference" + detail};
}

// 10. Integer accumulation, metric formulas, dilation footprint, LR table.
Outcome exactness() {
    Rng rng(10);
    std::vector<BinaryImage> masks;
    for (int k = 0; k < 37; ++k) {
        BinaryImage m(24, 20);
        for (auto& v : m.data) v = uniform01(rng) < 0.3;
        masks.push_back(m);
    }
    const Angiogram a = accumulate_angiogram(masks);
    Angiogram inc;
    for (const auto& m : masks) add_to_angiogram(inc, m);
    bool acc = a.blocks == 37 && inc.counts == a.counts;
    for (int i = 0; i < 24; ++i)
        for (int j = 0; j < 20; ++j) {
            int s = 0;
            for (const auto& m : masks) s += m(i, j);
            acc = acc && a.counts(i, j) == s;
        }

    bool met = *metrics({2, 1, 2, 0}).precision == 2.0 / 3.0 && *metrics({2, 1, 2, 0}).recall == 0.5 &&
               *metrics({2, 1, 2, 0}).dice == 4.0 / 7.0;
    for (int k = 0; k < 1000; ++k) {
        const ConfusionCounts c{1 + std::int64_t(uniform01(rng) * 1e6), std::int64_t(uniform01(rng) * 1e6),
                                std::int64_t(uniform01(rng) * 1e6), 0};
        const auto m = metrics(c);
        met = met && *m.precision == double(c.tp) / double(c.tp + c.fp) && *m.recall == double(c.tp) / double(c.tp + c.fn) &&
              *m.dice == double(2 * c.tp) / double(2 * c.tp + c.fp + c.fn);
    }

    BinaryImage one(9, 9);
    one(4, 4) = 1;
    const BinaryImage dil = nn::dilate_mask(one, 2);
    std::set<std::pair<int, int>> expect;
    for (int di = -2; di <= 2; ++di)
        for (int dj = -2; dj <= 2; ++dj)
            if (di * di + dj * dj <= 4) expect.insert({4 + di, 4 + dj});
    bool dil_ok = popcount(dil) == 13 && expect.size() == 13;
    for (auto [i, j] : expect) dil_ok = dil_ok && dil(i, j) == 1;

    const nn::TrainConfig paper = nn::TrainConfig::paper();
    const std::vector<std::pair<int, double>> p1{{0, 1e-1},  {14, 1e-1}, {15, 1e-2}, {44, 1e-2}, {45, 1e-3},
                                                 {74, 1e-3}, {75, 1e-4}, {99, 1e-4}, {100, 1e-5}, {149, 1e-5}};
    const std::vector<std::pair<int, double>> p2{{0, 1e-3}, {9, 1e-3}, {10, 1e-4}, {49, 1e-4}, {50, 1e-5}, {99, 1e-5},
                                                 {100, 1e-6}, {149, 1e-6}};
    bool lr_ok = true;
    for (auto [e, v] : p1) lr_ok = lr_ok && std::abs(nn::lr_at_epoch(paper.phase1.schedule, e) - v) <= 1e-12 * v;
    for (auto [e, v] : p2) lr_ok = lr_ok && std::abs(nn::lr_at_epoch(paper.phase2.schedule, e) - v) <= 1e-12 * v;
    auto word = [](bool b) { return b ? "exact" : "MISMATCH"; };
    return {acc && met && dil_ok && lr_ok, std::string("accumulation ") + word(acc) + ", metrics " + word(met) +
                                               ", radius-2 disk " + std::to_string(popcount(dil)) + " pixels, LR table " +
                                               word(lr_ok)};
}

// 11. Sliding-window mosaic, registration range and the 32-pixel crop.
Outcome inference_plumbing() {
    const auto cfg = nn::ModelConfig::desk();
    nn::Network<float> net(cfg);
    net.initialize(11);
    for (auto& p : net.params())
        if (p.name.ends_with(".b")) {
            Rng rng(p.value.size());
            for (float& v : p.value.data) v = float(uniform01(rng) - 0.5);
        }
    const cfloat c(0.3f, -0.2f);
    const BinaryImage single = nn::predict_mask(net, CorrelationBlock(cfg.nt, cfg.nz, cfg.nx, c));
    bool mosaic = true;
    for (const WindowPlan& plan : {WindowPlan::desk(), WindowPlan{16, 16, 5, 8}}) {
        const CorrelationBlock field(cfg.nt, 40, 29, c);
        const FieldMask fm = sliding_window_infer(field, net, plan);
        BinaryImage expect(160, 116);
        for (int z0 : window_starts(40, 16, plan.stride))
            for (int x0 : window_starts(29, 16, plan.stride))
                for (int i = plan.crop_margin; i < 64 - plan.crop_margin; ++i)
                    for (int j = plan.crop_margin; j < 64 - plan.crop_margin; ++j)
                        if (single(i, j)) expect(4 * z0 + i, 4 * x0 + j) = 1;
        mosaic = mosaic && fm.mask == expect;
    }

    Rng rng(12);
    Image2D<float> ref(64, 64);
    for (auto& v : ref.data) v = float(uniform01(rng));
    int recovered = 0, tried = 0;
    for (int dz = -16; dz <= 16; ++dz)
        for (int dx = -16; dx <= 16; ++dx) {
            const Registration r = rigid_register(ref, shift_image(ref, dz, dx));
            recovered += r.dz == dz && r.dx == dx;
            ++tried;
        }

    const WindowPlan paper = WindowPlan::paper();
    const int r = 8;
    auto ones = [&](const CorrelationBlock& b) { return BinaryImage(r * b.nz, r * b.nx, 1); };
    const FieldMask one = sliding_window_infer(CorrelationBlock(2, 32, 32), ones, paper, r);
    const FieldMask many = sliding_window_infer(CorrelationBlock(2, 44, 37), ones, paper, r);
    bool crop = paper.crop_margin == 32;
    for (int i = 0; i < 256; ++i)
        for (int j = 0; j < 256; ++j) {
            const bool inside = i >= 32 && i < 224 && j >= 32 && j < 224;
            crop = crop && one.mask(i, j) == inside && one.coverage(i, j) == int(inside);
        }
    for (int i = 0; i < many.mask.rows; ++i)
        for (int j = 0; j < many.mask.cols; ++j) {
            const bool inside = i >= 32 && i < many.mask.rows - 32 && j >= 32 && j < many.mask.cols - 32;
            crop = crop && many.mask(i, j) == inside && (many.coverage(i, j) > 0) == inside;
        }
    return {mosaic && recovered == tried && crop,
            std::string("mosaic ") + (mosaic ? "matches" : "DIFFERS") + ", shifts recovered " + std::to_string(recovered) +
                "/" + std::to_string(tried) + " (|shift| <= 16 on 64x64), 32-pixel crop " + (crop ? "exact" : "WRONG")};
}

// 12. Byte-exact record, checkpoint and dataset reproduction.
Outcome serialization(const fs::path& work) {
    const RunConfig cfg = RunConfig::desk();
    const GraphSet gs = generate_graphs(cfg);
    const BlockSimulator sim(gs.test, cfg.simulation);
    const DatasetRecord rec = sim.simulate(10, 3, 0).record;
    std::stringstream s1;
    write_record(s1, rec);
    const DatasetRecord back = read_record(s1);
    std::stringstream s2;
    write_record(s2, back);
    bool record = s1.str() == s2.str() && back.psi == rec.psi && back.chi.data.size() == rec.chi.data.size();
    for (std::size_t k = 0; record && k < rec.chi.data.size(); ++k)
        record = std::memcmp(&rec.chi.data[k], &back.chi.data[k], sizeof(cfloat)) == 0;

    nn::Network<float> net(cfg.model);
    net.initialize(12);
    std::stringstream c1;
    nn::write_checkpoint(c1, net);
    const nn::Network<float> loaded = nn::read_checkpoint(c1);
    std::stringstream c2;
    nn::write_checkpoint(c2, loaded);
    bool ckpt = c1.str() == c2.str() && loaded.params().size() == net.params().size();
    for (std::size_t p = 0; ckpt && p < net.params().size(); ++p)
        ckpt = loaded.params()[p].name == net.params()[p].name &&
               std::memcmp(loaded.params()[p].value.data.data(), net.params()[p].value.data.data(),
                           net.params()[p].value.size() * sizeof(float)) == 0;

    const fs::path a = work / "repro_a", b = work / "repro_b";
    fs::remove_all(a);
    fs::remove_all(b);
    generate_dataset(gs.test, 10, 6, cfg.simulation, 99, a, false, 1);
    generate_dataset(gs.test, 10, 6, cfg.simulation, 99, b, false, 2);
    bool same = true;
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        same = same && fs::exists(b / e.path().filename()) && slurp(e.path()) == slurp(b / e.path().filename());
        ++files;
    }
    same = same && files == std::distance(fs::directory_iterator(b), fs::directory_iterator{});
    return {record && ckpt && same && files > 1,
            std::string("record ") + (record ? "bit-exact" : "DIFFERS") + ", checkpoint " + (ckpt ? "bit-exact" : "DIFFERS") +
                ", dataset " + std::to_string(files) + " files " + (same ? "byte-identical" : "DIFFER") +
                " across runs (1 and 2 threads)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = (fs::temp_directory_path() / "ulm_acceptance").string();
    std::vector<int> only;
    app.add_option("--work", work, "Scratch directory");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);

    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    std::unique_ptr<FillingStudy> study;
    auto filling = [&]() -> const FillingStudy& {
        if (!study) study = std::make_unique<FillingStudy>();
        return *study;
    };
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient suite", gradient_suite},
        {"beamforming fidelity", beamforming},
        {"flow physics", flow_physics},
        {"correlation bound", correlation_bound},
        {"expert at sparse density", expert_sparse},
        {"overfit smoke test", overfit},
        {"desk comparison", [&] { return desk_comparison(work); }},
        {"filling curves", [&] { return filling_curves(filling()); }},
        {"half-time equivalence", [&] { return half_time(filling()); }},
        {"exactness", exactness},
        {"inference plumbing", inference_plumbing},
        {"serialization", [&] { return serialization(work); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!wanted(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << "criterion " << id << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " | "
                  << o.detail << " [" << fmt("%.1f s", seconds_since(t0)) << "]" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
