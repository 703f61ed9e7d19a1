#include "ulm/neural/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "ulm/neural/checkpoint.hpp"

namespace ulm::nn {

TrainConfig TrainConfig::desk() {
    // Without normalization layers the tiny desk network saturates its
    // sigmoid head within a few Adam steps at the paper's 1e-1 start rate.
    TrainConfig c;
    c.phase1 = {{3e-3, {20}, 0.1}, 30, 2};
    c.phase2 = {{3e-4, {20}, 0.1}, 30, 0};
    return c;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ContractError("batch size must be positive");
    if (threads < 1) throw ContractError("thread count must be positive");
    for (const PhaseConfig* p : {&phase1, &phase2}) {
        if (p->epochs < 0) throw ContractError("epoch count must be nonnegative");
        if (p->dilation_radius < 0) throw ContractError("dilation radius must be nonnegative");
        if (!(p->schedule.start > 0)) throw ContractError("learning rate must be positive");
    }
}

TrainingDivergence::TrainingDivergence(int p, int e)
    : std::runtime_error("non-finite loss in phase " + std::to_string(p) + " at epoch " + std::to_string(e)),
      phase(p),
      epoch(e) {}

namespace {

struct SampleResult {
    Network<float>::Cache cache;
    Tensor<float> prob;
    std::vector<Tensor<float>> grads;
};

// One dice over the whole minibatch: probabilities and targets are stacked
// and scored as a single mask, so blocks without tracks cannot dominate.
double batch_dice(const std::vector<SampleResult>& samples, const std::vector<const BinaryImage*>& targets,
                  std::vector<Tensor<float>>& grad_probs) {
    const std::size_t per = samples.front().prob.size();
    Tensor<float> p({static_cast<int>(samples.size() * per)}), t(p.shape);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        std::copy(samples[k].prob.data.begin(), samples[k].prob.data.end(), p.data.begin() + static_cast<long>(k * per));
        const Tensor<float> tk = mask_to_tensor<float>(*targets[k]);
        std::copy(tk.data.begin(), tk.data.end(), t.data.begin() + static_cast<long>(k * per));
    }
    Tensor<float> g;
    const double loss = dice_loss(p, t, &g);
    grad_probs.resize(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        grad_probs[k] = Tensor<float>(samples[k].prob.shape);
        std::copy(g.data.begin() + static_cast<long>(k * per), g.data.begin() + static_cast<long>((k + 1) * per),
                  grad_probs[k].data.begin());
    }
    return loss;
}

std::vector<BinaryImage> targets_for(const std::vector<const DatasetRecord*>& records, int radius) {
    std::vector<BinaryImage> out;
    out.reserve(records.size());
    for (const auto* r : records) out.push_back(dilate_mask(r->psi, radius));
    return out;
}

}  // namespace

double mean_dice_loss(const Network<float>& net, const std::vector<const DatasetRecord*>& records, int radius,
                      int threads) {
    if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> losses(records.size());
    parallel_for(static_cast<int>(records.size()), threads, [&](int i) {
        const DatasetRecord& rec = *records[static_cast<std::size_t>(i)];
        const Tensor<float> prob = net.forward(block_to_input<float>(rec.chi));
        losses[static_cast<std::size_t>(i)] =
            dice_loss(prob, mask_to_tensor<float>(dilate_mask(rec.psi, radius)), static_cast<Tensor<float>*>(nullptr));
    });
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

std::vector<LogRow> train_phase(Network<float>& net, const std::vector<const DatasetRecord*>& train,
                                const std::vector<const DatasetRecord*>& validation, const PhaseConfig& phase,
                                int phase_index, const TrainConfig& cfg, std::ostream* progress) {
    if (train.empty()) throw ContractError("training set is empty");
    const std::vector<BinaryImage> targets = targets_for(train, phase.dilation_radius);
    AdamState<float> adam;
    std::vector<LogRow> log;
    std::vector<int> order(train.size());
    for (int epoch = 0; epoch < phase.epochs; ++epoch) {
        const double lr = lr_at_epoch(phase.schedule, epoch);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(phase_index * 100000 + epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start));
            std::vector<SampleResult> results(static_cast<std::size_t>(n));
            std::vector<const BinaryImage*> batch_targets(static_cast<std::size_t>(n));
            parallel_for(n, cfg.threads, [&](int k) {
                const auto idx = static_cast<std::size_t>(order[start + static_cast<std::size_t>(k)]);
                auto& r = results[static_cast<std::size_t>(k)];
                r.prob = net.forward(block_to_input<float>(train[idx]->chi), r.cache);
                batch_targets[static_cast<std::size_t>(k)] = &targets[idx];
            });
            std::vector<Tensor<float>> grad_probs;
            const double loss = batch_dice(results, batch_targets, grad_probs);
            if (!std::isfinite(loss)) throw TrainingDivergence(phase_index, epoch);
            loss_sum += loss * n;
            parallel_for(n, cfg.threads, [&](int k) {
                auto& r = results[static_cast<std::size_t>(k)];
                r.grads = net.zero_grads();
                net.backward(r.cache, grad_probs[static_cast<std::size_t>(k)], r.grads);
                r.cache = {};
            });
            // Summed in sample order so the update does not depend on the thread count.
            std::vector<Tensor<float>> grads = net.zero_grads();
            for (const SampleResult& r : results)
                for (std::size_t p = 0; p < grads.size(); ++p)
                    for (std::size_t i = 0; i < grads[p].size(); ++i) grads[p][i] += r.grads[p][i];
            adam_step(net.params(), grads, adam, lr);
        }
        LogRow row;
        row.phase = phase_index;
        row.epoch = epoch;
        row.lr = lr;
        row.train_loss = loss_sum / static_cast<double>(train.size());
        row.val_loss = mean_dice_loss(net, validation, phase.dilation_radius, cfg.threads);
        if (!std::isfinite(row.train_loss)) throw TrainingDivergence(phase_index, epoch);
        for (const auto& p : net.params())
            for (float v : p.value.data)
                if (!std::isfinite(v)) throw TrainingDivergence(phase_index, epoch);
        log.push_back(row);
        if (progress) {
            write_train_log(*progress, {row});
            progress->flush();
        }
    }
    return log;
}

TrainResult train_two_phase(const std::vector<DatasetRecord>& train, const std::vector<DatasetRecord>& validation,
                            const ModelConfig& model, const TrainConfig& cfg,
                            const std::filesystem::path& checkpoint_dir, std::ostream* progress) {
    cfg.validate();
    if (train.empty()) throw ContractError("training set is empty");
    for (const auto* set : {&train, &validation})
        for (const auto& rec : *set)
            if (rec.chi.nt != model.nt || rec.chi.nz != model.nz || rec.chi.nx != model.nx || rec.meta.r != model.r)
                throw ContractError("dataset block shape does not match the model configuration");
    std::vector<const DatasetRecord*> tr, va;
    for (const auto& r : train) tr.push_back(&r);
    for (const auto& r : validation) va.push_back(&r);

    TrainResult out{Network<float>(model), {}, 0, 0};
    out.model.initialize(mix_seed(cfg.seed, 0xC0FFEE));
    if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

    auto log1 = train_phase(out.model, tr, va, cfg.phase1, 1, cfg, progress);
    out.log.insert(out.log.end(), log1.begin(), log1.end());
    out.phase1_end_raw_val_loss = mean_dice_loss(out.model, va, cfg.phase2.dilation_radius, cfg.threads);
    if (!checkpoint_dir.empty()) save_checkpoint(checkpoint_dir / "phase1.ulmw", out.model);

    out.phase2_initial_val_loss = mean_dice_loss(out.model, va, cfg.phase2.dilation_radius, cfg.threads);
    auto log2 = train_phase(out.model, tr, va, cfg.phase2, 2, cfg, progress);
    out.log.insert(out.log.end(), log2.begin(), log2.end());
    if (!checkpoint_dir.empty()) save_checkpoint(checkpoint_dir / "phase2.ulmw", out.model);
    return out;
}

Image2D<float> predict_probability(const Network<float>& net, const CorrelationBlock& chi) {
    return tensor_to_map(net.forward(block_to_input<float>(chi)));
}

BinaryImage predict_mask(const Network<float>& net, const CorrelationBlock& chi) {
    return threshold_binarize(predict_probability(net, chi), net.config().threshold);
}

void write_train_log(std::ostream& os, const std::vector<LogRow>& rows) {
    for (const LogRow& r : rows)
        os << r.phase << ' ' << r.epoch << ' ' << r.lr << ' ' << r.train_loss << ' ' << r.val_loss << '\n';
}

}  // namespace ulm::nn
