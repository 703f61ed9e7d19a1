#pragma once

// Two-phase dice-loss training: phase 1 against dilated track masks, phase 2
// resumed from the phase-1 weights against raw masks.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "ulm/dataset.hpp"
#include "ulm/neural/model.hpp"
#include "ulm/neural/optim.hpp"

namespace ulm::nn {

struct PhaseConfig {
    LRSchedule schedule;
    int epochs = 150;
    int dilation_radius = 0;
};

struct TrainConfig {
    PhaseConfig phase1{{1e-1, {15, 45, 75, 100}, 0.1}, 150, 2};
    PhaseConfig phase2{{1e-3, {10, 50, 100}, 0.1}, 150, 0};
    int batch_size = 4;
    std::uint64_t seed = 1;
    int threads = 1;

    static TrainConfig paper() { return TrainConfig{}; }
    static TrainConfig desk();
    void validate() const;
};

struct LogRow {
    int phase = 1;
    int epoch = 0;
    double lr = 0;
    double train_loss = 0;
    double val_loss = 0;  // NaN without validation data
};

class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(int phase, int epoch);
    int phase;
    int epoch;
};

struct TrainResult {
    Network<float> model;
    std::vector<LogRow> log;
    double phase1_end_raw_val_loss = 0;  // phase-1 weights scored against raw targets
    double phase2_initial_val_loss = 0;  // same weights, measured when phase 2 starts
};

// One phase of minibatch Adam on a single dice per minibatch (all blocks of
// the batch scored as one mask). Per-sample gradients are reduced in sample
// order, so results do not depend on the thread count. The logged train loss
// is the block-weighted mean of the batch losses; validation loss is the
// mean per-block dice loss.
std::vector<LogRow> train_phase(Network<float>& net, const std::vector<const DatasetRecord*>& train,
                                const std::vector<const DatasetRecord*>& validation, const PhaseConfig& phase,
                                int phase_index, const TrainConfig& cfg, std::ostream* progress = nullptr);

// Writes phase1.ulmw and phase2.ulmw into checkpoint_dir when it is non-empty.
TrainResult train_two_phase(const std::vector<DatasetRecord>& train, const std::vector<DatasetRecord>& validation,
                            const ModelConfig& model, const TrainConfig& cfg,
                            const std::filesystem::path& checkpoint_dir = {}, std::ostream* progress = nullptr);

// Mean dice loss over records, targets dilated by radius.
double mean_dice_loss(const Network<float>& net, const std::vector<const DatasetRecord*>& records, int radius,
                      int threads = 1);

Image2D<float> predict_probability(const Network<float>& net, const CorrelationBlock& chi);
BinaryImage predict_mask(const Network<float>& net, const CorrelationBlock& chi);

void write_train_log(std::ostream& os, const std::vector<LogRow>& rows);

}  // namespace ulm::nn
