#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bintabl/data.hpp"
#include "bintabl/metrics.hpp"
#include "bintabl/network.hpp"

namespace bintabl {

struct LrStep {
    int epoch;    // 1-based epoch from which `rate` applies
    double rate;
};

enum class WeightReg { Decay, MaxNorm };

std::string to_string(WeightReg reg);
WeightReg parse_weight_reg(const std::string& text);

struct TrainConfig {
    int epochs = 80;
    std::vector<LrStep> schedule{{1, 1e-3}, {11, 1e-4}, {71, 1e-5}};
    std::size_t batch_size = 256;
    WeightReg reg = WeightReg::MaxNorm;
    double weight_decay = 1e-3;
    double max_norm = 10.0;
    double dropout = 0.1;
    int horizon = 10;
    int runs = 5;
    std::uint64_t seed = 0;
    /// Worker threads for protocol runs; 0 picks the hardware concurrency.
    unsigned threads = 0;

    /// Throws ConfigError on an empty or non-monotone schedule, a
    /// non-positive rate, or non-positive counts.
    void validate() const;
};

/// Rate of the last schedule step whose epoch is <= `epoch`.
double lr_at(const TrainConfig& cfg, int epoch);

struct LossResult {
    double loss = 0.0;
    Matrix grad_logits;  // N x kClasses
};

/// Mean over the batch of -w[y] log(p[y] + 1e-12), with the gradient with
/// respect to the logits, w[y] (p - onehot(y)) / N.
LossResult weighted_cross_entropy(const Matrix& probs, std::span<const int> labels,
                                  const ClassWeights& weights);

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam update of every slot. Accumulators are created on
/// first use.
void adam_update(std::span<const ParamSlot> params, std::span<const Matrix> grads,
                 AdamState& state, double lr);

/// Rescales every row of each Weight-kind slot whose Euclidean norm
/// exceeds `max_norm` down to `max_norm`.
void apply_max_norm(std::span<const ParamSlot> params, double max_norm);

/// One optimizer step on `net`: weight decay folded into the Weight-kind
/// gradients (decay mode), Adam update, constraint projections, then the
/// max-norm projection (max-norm mode).
void optimizer_step(Network& net, std::vector<Matrix> grads, AdamState& state, double lr,
                    const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double accuracy = 0.0;  // percent, on the training batches
    double wall_seconds = 0.0;

    /// "epoch=1 lr=0.001 loss=... accuracy=... wall_s=..."
    std::string to_record() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffled mini-batch training for cfg.epochs epochs. All randomness
/// (shuffling, dropout) comes from `rng`.
std::vector<EpochRecord> train(Network& net, const SeriesBatch& data, const TrainConfig& cfg,
                               Rng& rng, const EpochCallback& on_epoch = {});

/// Argmax predictions in inference mode.
std::vector<int> predict(Network& net, std::span<const Matrix> samples,
                         std::size_t batch_size = 1024);
Confusion evaluate(Network& net, const SeriesBatch& data, std::size_t batch_size = 1024);

using NetworkBuilder = std::function<Network(Rng&)>;

struct ProtocolResult {
    EvalReport report;
    std::vector<Network> models;
    std::vector<std::vector<EpochRecord>> logs;
    /// Index of the run whose F1 is closest to the median F1.
    std::size_t median_run = 0;
};

/// Trains cfg.runs independently seeded models (seed i = derive_seed(cfg.seed,
/// i) drives initialization, shuffling and dropout), evaluates each on
/// `test`, and reports per-run metrics with their per-metric median.
ProtocolResult run_protocol(const NetworkBuilder& builder, const SeriesBatch& train_data,
                            const SeriesBatch& test_data, const TrainConfig& cfg,
                            const std::string& label = "run",
                            Averaging averaging = Averaging::Macro);

}  // namespace bintabl
