#include "bintabl/network.hpp"

#include <type_traits>

#include "bintabl/error.hpp"
#include "bintabl/rng.hpp"

namespace bintabl {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string to_string(Arch arch) { return arch == Arch::B ? "B" : "C"; }

std::string to_string(NormKind norm) {
    switch (norm) {
        case NormKind::None: return "none";
        case NormKind::Bin: return "bin";
        case NormKind::Dain: return "dain";
        case NormKind::BatchNorm: return "bn";
    }
    return "none";
}

Arch parse_arch(const std::string& text) {
    if (text == "B" || text == "b") return Arch::B;
    if (text == "C" || text == "c") return Arch::C;
    throw ConfigError("unknown architecture '" + text + "' (expected B or C)");
}

NormKind parse_norm(const std::string& text) {
    if (text == "none") return NormKind::None;
    if (text == "bin") return NormKind::Bin;
    if (text == "dain") return NormKind::Dain;
    if (text == "bn") return NormKind::BatchNorm;
    throw ConfigError("unknown normalizer '" + text + "' (expected bin, dain, bn or none)");
}

NormKind Network::norm_kind() const noexcept {
    return std::visit(overloaded{
                          [](const std::monostate&) { return NormKind::None; },
                          [](const BinParams&) { return NormKind::Bin; },
                          [](const DainParams&) { return NormKind::Dain; },
                          [](const BatchNormParams&) { return NormKind::BatchNorm; },
                      },
                      normalizer);
}

std::vector<ParamSlot> Network::parameters() {
    std::vector<ParamSlot> out;
    std::visit(overloaded{
                   [](std::monostate&) {},
                   [&](auto& p) {
                       auto s = p.slots("norm.");
                       out.insert(out.end(), s.begin(), s.end());
                   },
               },
               normalizer);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto s = std::visit([&](auto& layer) { return layer.slots("layer" + std::to_string(l) + "."); },
                            layers[l]);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

std::vector<ParamSlot> Network::state() {
    auto out = parameters();
    if (auto* bn = std::get_if<BatchNormParams>(&normalizer)) {
        auto s = bn->state_slots("norm.");
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

std::size_t Network::param_count() const {
    std::size_t n = std::visit(overloaded{
                                   [](const std::monostate&) -> std::size_t { return 0; },
                                   [](const auto& p) -> std::size_t { return p.param_count(); },
                               },
                               normalizer);
    for (const auto& layer : layers)
        n += std::visit([](const auto& l) { return l.param_count(); }, layer);
    return n;
}

std::size_t count_params(const Network& net) { return net.param_count(); }

void Network::enforce_constraints() {
    if (auto* bin = std::get_if<BinParams>(&normalizer)) bin->enforce_constraints();
    for (auto& layer : layers)
        if (auto* tabl = std::get_if<TablLayer>(&layer)) tabl->enforce_constraints();
}

Network Network::zeros_like() const {
    Network z = *this;
    std::visit(overloaded{
                   [](std::monostate&) {},
                   [&](auto& p) { p = p.zeros_like(); },
               },
               z.normalizer);
    for (auto& layer : z.layers) std::visit([](auto& l) { l = l.zeros_like(); }, layer);
    return z;
}

namespace {

Normalizer make_normalizer(const NetworkOptions& options) {
    switch (options.norm) {
        case NormKind::None: return std::monostate{};
        case NormKind::Bin: {
            auto p = BinParams::init(kInputFeatures, kInputSteps);
            p.feature_scale = options.bin_feature_scale;
            return p;
        }
        case NormKind::Dain: return DainParams::init(kInputFeatures);
        case NormKind::BatchNorm: return BatchNormParams::init(kInputFeatures, kInputSteps);
    }
    return std::monostate{};
}

}  // namespace

Network build_b_tabl(Rng& rng, const NetworkOptions& options) {
    Network net;
    net.normalizer = make_normalizer(options);
    net.layers.emplace_back(
        BilinearLayer::init(rng, kInputFeatures, kInputSteps, 120, 5, Activation::Relu));
    net.layers.emplace_back(TablLayer::init(rng, 120, 5, kClasses, 1));
    net.dropout = {options.dropout, 0.0};
    return net;
}

Network build_c_tabl(Rng& rng, const NetworkOptions& options) {
    Network net;
    net.normalizer = make_normalizer(options);
    net.layers.emplace_back(
        BilinearLayer::init(rng, kInputFeatures, kInputSteps, 60, 10, Activation::Relu));
    net.layers.emplace_back(BilinearLayer::init(rng, 60, 10, 120, 5, Activation::Relu));
    net.layers.emplace_back(TablLayer::init(rng, 120, 5, kClasses, 1));
    net.dropout = {options.dropout, options.dropout, 0.0};
    return net;
}

Network build_network(Arch arch, Rng& rng, const NetworkOptions& options) {
    return arch == Arch::B ? build_b_tabl(rng, options) : build_c_tabl(rng, options);
}

NetworkForward network_forward(std::span<const Matrix> batch, Network& net,
                               const ForwardOptions& options) {
    for (const Matrix& x : batch) {
        if (x.rows() != net.input_rows || x.cols() != net.input_cols) {
            throw ShapeError("network_forward: sample is " + x.shape() + ", network expects " +
                             std::to_string(net.input_rows) + "x" +
                             std::to_string(net.input_cols));
        }
    }
    const std::size_t n = batch.size();
    NetworkForward result;
    NetworkCache& cache = result.cache;
    cache.batch_size = n;

    Batch current = std::visit(
        overloaded{
            [&](std::monostate&) { return Batch(batch.begin(), batch.end()); },
            [&](BinParams& p) {
                auto f = bin_forward(batch, p);
                cache.normalizer = std::move(f.cache);
                return std::move(f.output);
            },
            [&](DainParams& p) {
                auto f = dain_forward(batch, p);
                cache.normalizer = std::move(f.cache);
                return std::move(f.output);
            },
            [&](BatchNormParams& p) {
                auto f = batchnorm_forward(batch, p, options.training);
                cache.normalizer = std::move(f.cache);
                return std::move(f.output);
            },
        },
        net.normalizer);

    cache.layers.resize(net.layers.size());
    cache.masks.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const double rate = l < net.dropout.size() ? net.dropout[l] : 0.0;
        const bool drop = options.training && options.dropout_rng != nullptr && rate > 0.0;
        cache.layers[l].reserve(n);
        cache.masks[l].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            Matrix out = std::visit(
                [&](const auto& layer) -> Matrix {
                    if constexpr (std::is_same_v<std::decay_t<decltype(layer)>, BilinearLayer>) {
                        auto f = bilinear_forward(current[i], layer);
                        cache.layers[l].emplace_back(std::move(f.cache));
                        return std::move(f.output);
                    } else {
                        auto f = tabl_forward(current[i], layer);
                        cache.layers[l].emplace_back(std::move(f.cache));
                        return std::move(f.output);
                    }
                },
                net.layers[l]);
            if (drop) {
                Matrix mask(out.rows(), out.cols());
                const double keep_scale = 1.0 / (1.0 - rate);
                for (double& m : mask.values())
                    m = options.dropout_rng->uniform() < rate ? 0.0 : keep_scale;
                for (std::size_t e = 0; e < out.size(); ++e) out[e] *= mask[e];
                cache.masks[l][i] = std::move(mask);
            }
            current[i] = std::move(out);
        }
    }

    result.logits = Matrix(n, kClasses);
    for (std::size_t i = 0; i < n; ++i) {
        if (current[i].size() != kClasses) {
            throw ShapeError("network_forward: final layer produced " + current[i].shape() +
                             ", expected " + std::to_string(kClasses) + "x1");
        }
        for (std::size_t k = 0; k < kClasses; ++k) result.logits(i, k) = current[i][k];
    }
    result.probs = row_softmax(result.logits);
    return result;
}

namespace {

NetworkBackward backward_impl(const Matrix& grad_logits, const NetworkCache& cache,
                              const Network& net, bool want_input_grad) {
    const std::size_t n = cache.batch_size;
    if (grad_logits.rows() != n || grad_logits.cols() != kClasses) {
        throw ContractError("network_backward: gradient is " + grad_logits.shape() +
                            ", forward batch had " + std::to_string(n) + " samples");
    }
    if (cache.layers.size() != net.layers.size()) {
        throw ContractError("network_backward: cache does not match network depth");
    }
    Network grads = net.zeros_like();
    const bool has_normalizer = net.norm_kind() != NormKind::None;

    Batch current(n);
    for (std::size_t i = 0; i < n; ++i) {
        current[i] = Matrix(kClasses, 1);
        for (std::size_t k = 0; k < kClasses; ++k) current[i][k] = grad_logits(i, k);
    }

    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const bool need_input = l > 0 || has_normalizer || want_input_grad;
        for (std::size_t i = 0; i < n; ++i) {
            const Matrix& mask = cache.masks[l][i];
            if (!mask.empty())
                for (std::size_t e = 0; e < mask.size(); ++e) current[i][e] *= mask[e];
            current[i] = std::visit(
                [&](const auto& layer) -> Matrix {
                    using L = std::decay_t<decltype(layer)>;
                    auto& g = std::get<L>(grads.layers[l]);
                    if constexpr (std::is_same_v<L, BilinearLayer>) {
                        return bilinear_backward_acc(current[i],
                                                     std::get<BilinearCache>(cache.layers[l][i]),
                                                     layer, g, need_input);
                    } else {
                        return tabl_backward_acc(current[i],
                                                 std::get<TablCache>(cache.layers[l][i]), layer,
                                                 g, need_input);
                    }
                },
                net.layers[l]);
        }
    }

    NetworkBackward result;
    result.grad_in = std::visit(
        overloaded{
            [&](const std::monostate&) { return current; },
            [&](const BinParams& p) {
                return bin_backward_acc(current, std::get<BinCache>(cache.normalizer), p,
                                        std::get<BinParams>(grads.normalizer));
            },
            [&](const DainParams& p) {
                return dain_backward_acc(current, std::get<DainCache>(cache.normalizer), p,
                                         std::get<DainParams>(grads.normalizer));
            },
            [&](const BatchNormParams& p) {
                return batchnorm_backward_acc(current,
                                              std::get<BatchNormCache>(cache.normalizer), p,
                                              std::get<BatchNormParams>(grads.normalizer));
            },
        },
        net.normalizer);

    for (auto& slot : grads.parameters()) result.param_grads.push_back(std::move(*slot.value));
    return result;
}

}  // namespace

std::vector<Matrix> network_backward(const Matrix& grad_logits, const NetworkCache& cache,
                                     const Network& net) {
    return backward_impl(grad_logits, cache, net, false).param_grads;
}

NetworkBackward network_backward_full(const Matrix& grad_logits, const NetworkCache& cache,
                                      const Network& net) {
    return backward_impl(grad_logits, cache, net, true);
}

}  // namespace bintabl
