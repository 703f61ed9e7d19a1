#include "ulm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ulm {

using Json = nlohmann::ordered_json;

template <typename J>
void to_json(J& j, const Vec3& v) {
    j = J::array({v.x, v.y, v.z});
}

template <typename J>
void from_json(const J& j, Vec3& v) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
    v = {j[0].template get<double>(), j[1].template get<double>(), j[2].template get<double>()};
}

namespace {

class Writer {
public:
    Json root = Json::object();

    template <typename T>
    void field(const char* key, T& v) {
        (*stack_.back())[key] = v;
    }
    template <typename F>
    void section(const char* key, F&& body) {
        Json& s = (*stack_.back())[key] = Json::object();
        stack_.push_back(&s);
        body();
        stack_.pop_back();
    }

private:
    std::vector<Json*> stack_{&root};
};

class Reader {
public:
    explicit Reader(const Json& root) : stack_{&root}, used_(1), path_{""} {
        if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
    }

    template <typename T>
    void field(const char* key, T& v) {
        used_.back().insert(key);
        const Json& o = *stack_.back();
        const auto it = o.find(key);
        if (it == o.end()) return;
        try {
            v = it->template get<T>();
        } catch (const std::exception& e) {
            throw ConfigError("bad value for '" + path_.back() + key + "': " + e.what());
        }
    }

    template <typename F>
    void section(const char* key, F&& body) {
        used_.back().insert(key);
        const Json& o = *stack_.back();
        const auto it = o.find(key);
        if (it == o.end()) return;
        if (!it->is_object()) throw ConfigError("'" + path_.back() + key + "' must be an object");
        stack_.push_back(&*it);
        used_.emplace_back();
        path_.push_back(path_.back() + key + ".");
        body();
        reject_unknown();
        path_.pop_back();
        used_.pop_back();
        stack_.pop_back();
    }

    void reject_unknown() const {
        for (const auto& [k, _] : stack_.back()->items())
            if (!used_.back().count(k)) throw ConfigError("unknown configuration key '" + path_.back() + k + "'");
    }

private:
    std::vector<const Json*> stack_;
    std::vector<std::set<std::string>> used_;
    std::vector<std::string> path_;
};

template <typename V>
void visit_phase(V& v, nn::PhaseConfig& p) {
    v.field("learning_rate", p.schedule.start);
    v.field("milestones", p.schedule.milestones);
    v.field("gamma", p.schedule.gamma);
    v.field("epochs", p.epochs);
    v.field("dilation_radius", p.dilation_radius);
}

// Single field list shared by serialization and parsing.
template <typename V>
void visit(V& v, RunConfig& c) {
    v.field("version", c.version);
    v.field("profile", c.profile);
    v.field("seed", c.seed);
    v.field("threads", c.threads);
    v.field("out", c.out);
    v.section("vasculature", [&] {
        auto& g = c.vasculature;
        v.field("volume_um", g.volume_um);
        v.field("vessel_count", g.vessel_count);
        v.field("min_radius_um", g.min_radius_um);
        v.field("max_radius_um", g.max_radius_um);
        v.field("dilation", g.dilation);
        v.field("loop_fraction", g.loop_fraction);
        v.field("segment_min_um", g.segment_min_um);
        v.field("segment_max_um", g.segment_max_um);
        v.field("seed", g.seed);
    });
    v.section("acoustics", [&] {
        auto& p = c.simulation.probe;
        auto& s = c.simulation.sequence;
        v.field("element_count", p.element_count);
        v.field("pitch_m", p.pitch_m);
        v.field("element_width_m", p.element_width_m);
        v.field("center_frequency_hz", p.center_frequency_hz);
        v.field("elevation_focus_m", p.elevation_focus_m);
        v.field("sound_speed_m_s", p.sound_speed_m_s);
        v.field("transmit_frequency_hz", s.transmit_frequency_hz);
        v.field("cycles", s.cycles);
        v.field("angles_deg", s.angles_deg);
        v.field("prf_hz", s.prf_hz);
        v.field("frame_rate_hz", s.frame_rate_hz);
        v.field("sampling_rate_hz", s.sampling_rate_hz);
        v.field("decimation", s.decimation);
        v.field("f_number", s.f_number);
    });
    v.section("blocks", [&] {
        auto& s = c.simulation;
        v.field("nt", s.nt);
        v.field("nz", s.nz);
        v.field("nx", s.nx);
        v.field("r", s.r);
        v.field("pitch_um", s.pitch_um);
        v.field("depth_center_mm", s.depth_center_mm);
        v.field("psf_size", s.psf_size);
        v.field("svd_cutoff", s.svd_cutoff);
    });
    v.section("model", [&] {
        auto& m = c.model;
        v.field("encoder_widths", m.encoder_widths);
        v.field("decoder_widths", m.decoder_widths);
        v.field("upsampler_widths", m.upsampler_widths);
        v.field("kernel_3d", m.kernel_3d);
        v.field("kernel_2d", m.kernel_2d);
        v.field("temporal_pool", m.temporal_pool);
        v.field("spatial_pool", m.spatial_pool);
        v.field("decoder_temporal_pool", m.decoder_temporal_pool);
        v.field("threshold", m.threshold);
    });
    v.section("training", [&] {
        v.section("phase1", [&] { visit_phase(v, c.training.phase1); });
        v.section("phase2", [&] { visit_phase(v, c.training.phase2); });
        v.field("batch_size", c.training.batch_size);
    });
    v.section("inference", [&] {
        v.field("window_z", c.inference.window_z);
        v.field("window_x", c.inference.window_x);
        v.field("stride", c.inference.stride);
        v.field("crop_margin", c.inference.crop_margin);
    });
    v.section("data", [&] {
        auto& d = c.data;
        v.field("train_graphs", d.train_graphs);
        v.field("train_blocks", d.train_blocks);
        v.field("train_density", d.train_density);
        v.field("test_blocks", d.test_blocks);
        v.field("test_densities", d.test_densities);
        v.field("reference_blocks", d.reference_blocks);
        v.field("reference_density", d.reference_density);
    });
    v.section("evaluation", [&] {
        v.field("checkpoints", c.evaluation.checkpoints);
        v.field("detection_threshold", c.evaluation.detection_threshold);
        v.field("profile_row", c.evaluation.profile_row);
    });
}

// The model input shape follows the block geometry.
void sync_model(RunConfig& c) {
    c.model.nt = c.simulation.nt;
    c.model.nz = c.simulation.nz;
    c.model.nx = c.simulation.nx;
    c.model.r = c.simulation.r;
}

}  // namespace

RunConfig RunConfig::paper() {
    RunConfig c;
    c.profile = "paper";
    c.inference = WindowPlan::paper();
    c.model = nn::ModelConfig::paper();
    c.training = nn::TrainConfig::paper();
    sync_model(c);
    return c;
}

RunConfig RunConfig::desk() {
    RunConfig c;
    c.profile = "desk";
    c.simulation.nt = 128;
    c.simulation.nz = 16;
    c.simulation.nx = 16;
    c.simulation.r = 4;
    c.model = nn::ModelConfig::desk();
    c.training = nn::TrainConfig::desk();
    c.inference = WindowPlan::desk();
    c.data.train_graphs = 2;
    c.data.train_blocks = 200;
    c.data.test_blocks = 100;
    c.data.reference_blocks = 500;
    c.evaluation.checkpoints = {10, 25, 50, 100, 250, 500};
    sync_model(c);
    return c;
}

RunConfig RunConfig::for_profile(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

void RunConfig::validate() const {
    if (version != kConfigVersion)
        throw ConfigError("unsupported configuration version " + std::to_string(version));
    if (threads < 1) throw ConfigError("threads must be at least 1");
    try {
        simulation.validate();
        model.validate();
        training.validate();
        inference.validate(model.r);
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    if (model.nt != simulation.nt || model.nz != simulation.nz || model.nx != simulation.nx || model.r != simulation.r)
        throw ConfigError("model input shape must match the block geometry");
    if (data.train_graphs < 1 || data.train_blocks < data.train_graphs)
        throw ConfigError("need at least one training block per training graph");
    if (data.test_blocks < 1 || data.reference_blocks < 1) throw ConfigError("block counts must be positive");
    for (int cp : evaluation.checkpoints)
        if (cp < 0 || cp > data.reference_blocks) throw ConfigError("evaluation checkpoint beyond the reference block count");
}

std::string to_json_text(const RunConfig& cfg) {
    Writer w;
    RunConfig copy = cfg;
    visit(w, copy);
    return w.root.dump(2) + "\n";
}

RunConfig parse_run_config(const std::string& text, const std::string& fallback_profile) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
    std::string profile = fallback_profile;
    if (j.is_object() && j.contains("profile")) {
        if (!j["profile"].is_string()) throw ConfigError("'profile' must be a string");
        profile = j["profile"].get<std::string>();
    }
    RunConfig c = RunConfig::for_profile(profile);
    Reader r(j);
    visit(r, c);
    r.reject_unknown();
    sync_model(c);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::string& fallback_profile) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read configuration " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_run_config(ss.str(), fallback_profile);
}

}  // namespace ulm
