#include "bintabl/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "bintabl/error.hpp"
#include "bintabl/format.hpp"
#include "bintabl/rng.hpp"

namespace bintabl {

std::string to_string(WeightReg reg) { return reg == WeightReg::Decay ? "decay" : "maxnorm"; }

WeightReg parse_weight_reg(const std::string& text) {
    if (text == "decay") return WeightReg::Decay;
    if (text == "maxnorm") return WeightReg::MaxNorm;
    throw ConfigError("unknown weight regularization '" + text + "' (expected decay or maxnorm)");
}

void TrainConfig::validate() const {
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (runs <= 0) throw ConfigError("runs must be positive");
    if (schedule.empty()) throw ConfigError("learning-rate schedule is empty");
    if (schedule.front().epoch != 1) throw ConfigError("learning-rate schedule must start at epoch 1");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i].rate > 0.0)) throw ConfigError("learning rates must be positive");
        if (i > 0 && (schedule[i].epoch <= schedule[i - 1].epoch ||
                      schedule[i].rate >= schedule[i - 1].rate)) {
            throw ConfigError(
                "learning-rate schedule must have increasing epochs and decreasing rates");
        }
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (weight_decay < 0.0 || max_norm <= 0.0)
        throw ConfigError("weight decay must be >= 0 and max-norm > 0");
}

double lr_at(const TrainConfig& cfg, int epoch) {
    double rate = cfg.schedule.front().rate;
    for (const auto& step : cfg.schedule)
        if (step.epoch <= epoch) rate = step.rate;
    return rate;
}

LossResult weighted_cross_entropy(const Matrix& probs, std::span<const int> labels,
                                  const ClassWeights& weights) {
    if (probs.cols() != kClasses || probs.rows() != labels.size()) {
        throw ShapeError("weighted_cross_entropy: probabilities " + probs.shape() + " for " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = labels.size();
    LossResult result;
    result.grad_logits = Matrix(n, kClasses);
    if (n == 0) return result;
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= static_cast<int>(kClasses))
            throw DataError("label out of range: " + std::to_string(y));
        const double w = weights[static_cast<std::size_t>(y)];
        loss -= w * std::log(probs(i, static_cast<std::size_t>(y)) + 1e-12);
        for (std::size_t k = 0; k < kClasses; ++k) {
            const double onehot = static_cast<int>(k) == y ? 1.0 : 0.0;
            result.grad_logits(i, k) = w * (probs(i, k) - onehot) * inv_n;
        }
    }
    result.loss = loss * inv_n;
    return result;
}

void adam_update(std::span<const ParamSlot> params, std::span<const Matrix> grads,
                 AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (params.size() != grads.size()) {
        throw ContractError("adam_update: " + std::to_string(params.size()) + " parameters but " +
                            std::to_string(grads.size()) + " gradients");
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.value->rows(), p.value->cols());
            state.v.emplace_back(p.value->rows(), p.value->cols());
        }
    }
    if (state.m.size() != params.size())
        throw ContractError("adam_update: optimizer state does not match parameters");

    ++state.step;
    const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& value = *params[i].value;
        const Matrix& g = grads[i];
        require_same_shape(value, g, "adam_update");
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        for (std::size_t e = 0; e < value.size(); ++e) {
            m[e] = state.beta1 * m[e] + (1.0 - state.beta1) * g[e];
            v[e] = state.beta2 * v[e] + (1.0 - state.beta2) * g[e] * g[e];
            const double m_hat = m[e] / correction1;
            const double v_hat = v[e] / correction2;
            value[e] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

void apply_max_norm(std::span<const ParamSlot> params, double max_norm) {
    for (const auto& slot : params) {
        if (slot.kind != ParamKind::Weight) continue;
        Matrix& w = *slot.value;
        for (std::size_t r = 0; r < w.rows(); ++r) {
            auto row = w.row(r);
            double sq = 0.0;
            for (double v : row) sq += v * v;
            const double norm = std::sqrt(sq);
            if (norm > max_norm) {
                const double scale = max_norm / norm;
                for (double& v : row) v *= scale;
            }
        }
    }
}

void optimizer_step(Network& net, std::vector<Matrix> grads, AdamState& state, double lr,
                    const TrainConfig& cfg) {
    const auto params = net.parameters();
    if (cfg.reg == WeightReg::Decay && cfg.weight_decay > 0.0) {
        for (std::size_t i = 0; i < params.size() && i < grads.size(); ++i) {
            if (params[i].kind != ParamKind::Weight) continue;
            const Matrix& w = *params[i].value;
            for (std::size_t e = 0; e < w.size(); ++e) grads[i][e] += cfg.weight_decay * w[e];
        }
    }
    adam_update(params, grads, state, lr);
    net.enforce_constraints();
    if (cfg.reg == WeightReg::MaxNorm) apply_max_norm(params, cfg.max_norm);
}

std::string EpochRecord::to_record() const {
    return "epoch=" + std::to_string(epoch) + " lr=" + format_double(lr) +
           " loss=" + format_double(loss) + " accuracy=" + format_double(accuracy) +
           " wall_s=" + format_double(wall_seconds);
}

namespace {

int argmax_row(const Matrix& m, std::size_t r) {
    const auto row = m.row(r);
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

std::vector<EpochRecord> train(Network& net, const SeriesBatch& data, const TrainConfig& cfg,
                               Rng& rng, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.size() == 0) throw DataError("training set is empty");
    const ClassWeights weights = class_weights(data.labels);
    const bool needs_pairs = net.norm_kind() == NormKind::BatchNorm;

    AdamState adam;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EpochRecord> log;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const double lr = lr_at(cfg, epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            // Training-mode batch norm cannot standardize a single sample.
            if (needs_pairs && end - start < 2) continue;
            Batch batch;
            std::vector<int> labels;
            batch.reserve(end - start);
            labels.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(data.samples[order[k]]);
                labels.push_back(data.labels[order[k]]);
            }
            auto fwd = network_forward(batch, net, {.training = true, .dropout_rng = &rng});
            auto loss = weighted_cross_entropy(fwd.probs, labels, weights);
            if (!std::isfinite(loss.loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            auto grads = network_backward(loss.grad_logits, fwd.cache, net);
            optimizer_step(net, std::move(grads), adam, lr, cfg);

            loss_sum += loss.loss * static_cast<double>(labels.size());
            seen += labels.size();
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (argmax_row(fwd.probs, i) == labels[i]) ++correct;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.lr = lr;
        record.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        record.accuracy = seen ? 100.0 * static_cast<double>(correct) / static_cast<double>(seen)
                               : 0.0;
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        log.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    return log;
}

std::vector<int> predict(Network& net, std::span<const Matrix> samples, std::size_t batch_size) {
    std::vector<int> out;
    out.reserve(samples.size());
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t end = std::min(samples.size(), start + batch_size);
        auto fwd = network_forward(samples.subspan(start, end - start), net, {});
        for (std::size_t i = 0; i < end - start; ++i) out.push_back(argmax_row(fwd.probs, i));
    }
    return out;
}

Confusion evaluate(Network& net, const SeriesBatch& data, std::size_t batch_size) {
    const auto predicted = predict(net, data.samples, batch_size);
    return confusion_from(data.labels, predicted);
}

ProtocolResult run_protocol(const NetworkBuilder& builder, const SeriesBatch& train_data,
                            const SeriesBatch& test_data, const TrainConfig& cfg,
                            const std::string& label, Averaging averaging) {
    cfg.validate();
    const auto runs = static_cast<std::size_t>(cfg.runs);
    std::vector<RunResult> results(runs);
    std::vector<Network> models(runs);
    std::vector<std::vector<EpochRecord>> logs(runs);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < runs; i = next++) {
            try {
                const std::uint64_t seed = derive_seed(cfg.seed, i);
                Rng rng(seed);
                Network net = builder(rng);
                logs[i] = train(net, train_data, cfg, rng);
                results[i].seed = seed;
                results[i].confusion = evaluate(net, test_data);
                results[i].metrics = compute_metrics(results[i].confusion, averaging);
                models[i] = std::move(net);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    unsigned threads = cfg.threads ? cfg.threads : std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, runs));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    ProtocolResult out;
    out.report = make_report(label, std::move(results));
    out.models = std::move(models);
    out.logs = std::move(logs);
    double best = INFINITY;
    for (std::size_t i = 0; i < out.report.runs.size(); ++i) {
        const double gap = std::abs(out.report.runs[i].metrics.f1 - out.report.median.f1);
        if (gap < best) {
            best = gap;
            out.median_run = i;
        }
    }
    return out;
}

}  // namespace bintabl
