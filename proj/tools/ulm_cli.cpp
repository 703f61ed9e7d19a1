// ulm: simulate, train, reconstruct and score in-silico ULM angiograms.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ulm/config.hpp"
#include "ulm/neural/checkpoint.hpp"
#include "ulm/workflow.hpp"

namespace fs = std::filesystem;
using namespace ulm;

namespace {

struct GlobalOptions {
    std::string config;
    std::string profile = "desk";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
};

RunConfig resolve(const GlobalOptions& g) {
    RunConfig cfg = g.config.empty() ? RunConfig::for_profile(g.profile) : load_run_config(g.config, g.profile);
    if (g.seed) cfg.seed = *g.seed;
    if (g.threads) cfg.threads = *g.threads;
    if (!g.out.empty()) cfg.out = g.out;
    cfg.training.seed = cfg.seed;
    cfg.training.threads = cfg.threads;
    cfg.validate();
    return cfg;
}

// Writes into <final>.partial and renames on commit; removed if never committed.
class Staging {
public:
    explicit Staging(fs::path final_dir) : final_(std::move(final_dir)), tmp_(final_.string() + ".partial") {
        fs::remove_all(tmp_);
        fs::create_directories(tmp_);
    }
    ~Staging() {
        if (!done_) {
            std::error_code ec;
            fs::remove_all(tmp_, ec);
        }
    }
    const fs::path& dir() const { return tmp_; }
    void commit() {
        fs::remove_all(final_);
        fs::rename(tmp_, final_);
        done_ = true;
    }

private:
    fs::path final_, tmp_;
    bool done_ = false;
};

void announce(const RunConfig& cfg, const std::string& cmd, const fs::path& stage) {
    const std::string text = to_json_text(cfg);
    std::cout << "# " << cmd << " effective configuration\n" << text << std::flush;
    std::ofstream(stage / "config.json") << text;
}

std::string density_tag(double d) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "d%g", d);
    return buf;
}

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.out); }

GraphSet load_graphs(const RunConfig& cfg) {
    const fs::path dir = out_dir(cfg) / "graphs";
    GraphSet set;
    for (int k = 0; k < cfg.data.train_graphs; ++k)
        set.train.push_back(load_graph((dir / ("train_graph_" + std::to_string(k) + ".txt")).string()));
    set.test = load_graph((dir / "test_graph.txt").string());
    return set;
}

void cmd_genvasc(const RunConfig& cfg) {
    Staging st(out_dir(cfg) / "graphs");
    announce(cfg, "genvasc", st.dir());
    const GraphSet set = generate_graphs(cfg);
    for (std::size_t k = 0; k < set.train.size(); ++k) {
        save_graph((st.dir() / ("train_graph_" + std::to_string(k) + ".txt")).string(), set.train[k]);
        std::cout << "train graph " << k << ": " << set.train[k].edges.size() << " vessels\n";
    }
    save_graph((st.dir() / "test_graph.txt").string(), set.test);
    std::cout << "test graph: " << set.test.edges.size() << " vessels\n";
    st.commit();
}

void cmd_dataset(const RunConfig& cfg) {
    const GraphSet set = load_graphs(cfg);
    Staging st(out_dir(cfg) / "data");
    announce(cfg, "dataset", st.dir());
    generate_training_data(cfg, set, st.dir() / "train");
    std::cout << "training blocks: " << cfg.data.train_blocks << " at " << cfg.data.train_density << " MB/mm^3\n";
    for (double d : cfg.data.test_densities) {
        generate_dataset(set.test, d, cfg.data.test_blocks, cfg.simulation, test_set_seed(cfg, d), st.dir() / "test" / density_tag(d),
                         true, cfg.threads);
        std::cout << "test blocks: " << cfg.data.test_blocks << " at " << d << " MB/mm^3\n";
    }
    st.commit();
}

void cmd_train(const RunConfig& cfg) {
    std::vector<DatasetRecord> train, val;
    load_training_data(out_dir(cfg) / "data" / "train", train, val);
    std::cout << "train " << train.size() << " / validation " << val.size() << " blocks\n";
    Staging st(out_dir(cfg) / "model");
    announce(cfg, "train", st.dir());
    std::ofstream log(st.dir() / "train_log.txt");
    log << "# phase epoch lr train_loss val_loss\n";
    std::cout << "# phase epoch lr train_loss val_loss\n";
    struct Tee : std::streambuf {
        std::streambuf *a, *b;
        int overflow(int c) override {
            if (c == EOF) return 0;
            a->sputc(static_cast<char>(c));
            b->sputc(static_cast<char>(c));
            return c;
        }
        int sync() override { return a->pubsync() | b->pubsync(); }
    } tee;
    tee.a = log.rdbuf();
    tee.b = std::cout.rdbuf();
    std::ostream progress(&tee);
    const auto result = nn::train_two_phase(train, val, cfg.model, cfg.training, st.dir(), &progress);
    std::cout << "phase-1 weights on raw targets: validation loss " << result.phase1_end_raw_val_loss << '\n';
    st.commit();
}

nn::Network<float> load_model(const RunConfig& cfg, const std::string& checkpoint) {
    const fs::path p = checkpoint.empty() ? out_dir(cfg) / "model" / "phase2.ulmw" : fs::path(checkpoint);
    return nn::load_checkpoint(p);
}

std::vector<DatasetRecord> load_test_set(const RunConfig& cfg, double d) {
    return load_dataset(out_dir(cfg) / "data" / "test" / density_tag(d));
}

void save_masks(const fs::path& dir, const std::vector<BinaryImage>& masks, const RunConfig& cfg) {
    fs::create_directories(dir);
    write_mask_stack(dir / "masks.pbm", masks);
    save_angiogram(dir / "angiogram.pgm", accumulate_angiogram(masks), cfg.simulation.r,
                   cfg.simulation.pitch_um / cfg.simulation.r);
}

void cmd_infer(const RunConfig& cfg, const std::string& checkpoint) {
    const auto net = load_model(cfg, checkpoint);
    Staging st(out_dir(cfg) / "infer");
    announce(cfg, "infer", st.dir());
    for (double d : cfg.data.test_densities) {
        const auto masks = cnn_masks(cfg, net, load_test_set(cfg, d));
        save_masks(st.dir() / density_tag(d), masks, cfg);
        std::cout << "deep-stULM angiogram at " << d << " MB/mm^3 from " << masks.size() << " blocks\n";
    }
    st.commit();
}

void cmd_expert(const RunConfig& cfg) {
    Staging st(out_dir(cfg) / "expert");
    announce(cfg, "expert", st.dir());
    for (double d : cfg.data.test_densities) {
        const auto masks = expert_masks(cfg, load_test_set(cfg, d));
        save_masks(st.dir() / density_tag(d), masks, cfg);
        std::cout << "expert angiogram at " << d << " MB/mm^3 from " << masks.size() << " blocks\n";
    }
    st.commit();
}

Image2D<int> counts_of(const std::vector<BinaryImage>& masks) { return accumulate_angiogram(masks).counts; }

void cmd_evaluate(const RunConfig& cfg) {
    const GraphSet set = load_graphs(cfg);
    Staging st(out_dir(cfg) / "eval");
    announce(cfg, "evaluate", st.dir());
    const BinaryImage reference = reference_angiogram(cfg, set.test);
    write_mask_stack(st.dir() / "reference.pbm", {reference});

    std::vector<MethodRow> rows;
    for (double d : cfg.data.test_densities) {
        const auto truth = truth_masks(load_test_set(cfg, d));
        const fs::path ed = out_dir(cfg) / "expert" / density_tag(d) / "masks.pbm";
        const fs::path cd = out_dir(cfg) / "infer" / density_tag(d) / "masks.pbm";
        const auto expert = fs::exists(ed) ? read_mask_stack(ed) : std::vector<BinaryImage>{};
        const auto cnn = fs::exists(cd) ? read_mask_stack(cd) : std::vector<BinaryImage>{};
        const auto r = comparison_rows(d, truth, expert, cnn, reference);
        rows.insert(rows.end(), r.begin(), r.end());

        if (!expert.empty() && !cnn.empty()) {
            const auto a = counts_of(expert), b = counts_of(cnn);
            const int row = cfg.evaluation.profile_row >= 0 ? cfg.evaluation.profile_row : a.rows / 2;
            std::ofstream prof(st.dir() / ("profile_" + density_tag(d) + ".csv"));
            write_line_profiles(prof, a, b, row, "expert", "deep_stulm");
        }
    }
    {
        std::ofstream os(st.dir() / "report.csv");
        write_report_csv(os, rows);
        write_report_csv(std::cout, rows);
    }
    const int max_cp = cfg.evaluation.checkpoints.empty()
                           ? 0
                           : *std::max_element(cfg.evaluation.checkpoints.begin(), cfg.evaluation.checkpoints.end());
    const std::vector<FillingSeries> filling =
        filling_curves(filling_data(cfg, set.test, cfg.data.test_densities, max_cp), cfg.evaluation.checkpoints);
    {
        std::ofstream os(st.dir() / "filling.csv");
        write_filling_csv(os, filling);
    }
    std::vector<PlotSeries> plot;
    for (const auto& f : filling) {
        PlotSeries s{f.label, {}, {}};
        for (const auto& p : f.points) {
            s.x.push_back(p.blocks);
            s.y.push_back(p.dice);
        }
        plot.push_back(std::move(s));
    }
    write_svg_plot(st.dir() / "filling.svg", "Network filling", "blocks", "dice", plot);
    st.commit();
}

void cmd_config(const RunConfig& cfg) { std::cout << to_json_text(cfg); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"In-silico ultrasound localization microscopy workbench"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "JSON run configuration");
    app.add_option("--profile", g.profile, "Default profile: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--seed", g.seed, "Global seed");
    app.add_option("--threads", g.threads, "Worker threads; 1 is bit-deterministic")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output directory");

    std::string checkpoint;
    auto* genvasc = app.add_subcommand("genvasc", "Generate training and held-out vascular graphs");
    auto* dataset = app.add_subcommand("dataset", "Simulate training and test blocks");
    auto* train = app.add_subcommand("train", "Two-phase training of Deep-stULM");
    auto* infer = app.add_subcommand("infer", "Deep-stULM masks and angiograms for the test sets");
    infer->add_option("--checkpoint", checkpoint, "Weights file (default: <out>/model/phase2.ulmw)");
    auto* expert = app.add_subcommand("expert", "Expert localization angiograms for the test sets");
    auto* evaluate = app.add_subcommand("evaluate", "Score angiograms against the ground truth");
    auto* config = app.add_subcommand("config", "Print the effective configuration");

    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const RunConfig cfg = resolve(g);
        if (genvasc->parsed()) cmd_genvasc(cfg);
        else if (dataset->parsed()) cmd_dataset(cfg);
        else if (train->parsed()) cmd_train(cfg);
        else if (infer->parsed()) cmd_infer(cfg, checkpoint);
        else if (expert->parsed()) cmd_expert(cfg);
        else if (evaluate->parsed()) cmd_evaluate(cfg);
        else if (config->parsed()) cmd_config(cfg);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        std::cerr << "error: " << name << ": " << msg << '\n';
        return 1;
    }
    return 0;
}
