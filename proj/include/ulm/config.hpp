#pragma once

// Run configuration shared by every command. Stored as versioned JSON; keys
// omitted from a file keep the selected profile's defaults, unknown keys are
// rejected.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ulm/dataset.hpp"
#include "ulm/inference.hpp"
#include "ulm/neural/model.hpp"
#include "ulm/neural/training.hpp"
#include "ulm/vasculature.hpp"

namespace ulm {

inline constexpr int kConfigVersion = 1;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataPlan {
    int train_graphs = 5;
    int train_blocks = 2500;  // split evenly over the training graphs
    double train_density = 5.0;
    int test_blocks = 800;    // per test density, on the held-out graph
    std::vector<double> test_densities{1, 5, 10, 20};
    int reference_blocks = 4000;
    double reference_density = 5.0;
};

struct EvaluationPlan {
    std::vector<int> checkpoints{100, 250, 500, 1000, 2000, 4000};
    double detection_threshold = 0.5;
    int profile_row = -1;  // fine-grid row for line profiles; -1 picks the middle
};

struct RunConfig {
    int version = kConfigVersion;
    std::string profile = "paper";
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "ulm_out";
    GraphConfig vasculature;
    SimulationConfig simulation;
    nn::ModelConfig model;
    nn::TrainConfig training;
    WindowPlan inference;
    DataPlan data;
    EvaluationPlan evaluation;

    static RunConfig paper();
    static RunConfig desk();
    static RunConfig for_profile(const std::string& name);

    // Cross-section consistency (block shape vs model, r, ...).
    void validate() const;
};

std::string to_json_text(const RunConfig& cfg);
// Overlays text onto the profile it names (or fallback_profile when absent).
RunConfig parse_run_config(const std::string& text, const std::string& fallback_profile = "desk");
RunConfig load_run_config(const std::filesystem::path& path, const std::string& fallback_profile = "desk");

}  // namespace ulm
