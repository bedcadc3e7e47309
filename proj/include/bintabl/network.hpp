#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bintabl/layers.hpp"
#include "bintabl/normalization.hpp"

namespace bintabl {

class Rng;

inline constexpr std::size_t kClasses = 3;
inline constexpr std::size_t kInputFeatures = 40;
inline constexpr std::size_t kInputSteps = 10;

enum class Arch { B, C };
enum class NormKind { None, Bin, Dain, BatchNorm };

std::string to_string(Arch arch);
std::string to_string(NormKind norm);
Arch parse_arch(const std::string& text);
NormKind parse_norm(const std::string& text);

using Normalizer = std::variant<std::monostate, BinParams, DainParams, BatchNormParams>;
using Layer = std::variant<BilinearLayer, TablLayer>;

/// Optional input normalizer followed by a chain of bilinear / TABL layers.
/// The last layer produces a kClasses x 1 logit column.
struct Network {
    Normalizer normalizer;
    std::vector<Layer> layers;
    /// Dropout rate applied to the output of each layer (0 for the last).
    std::vector<double> dropout;
    std::size_t input_rows = kInputFeatures;
    std::size_t input_cols = kInputSteps;

    NormKind norm_kind() const noexcept;
    /// Trainable parameters, normalizer first, then layers in order.
    std::vector<ParamSlot> parameters();
    /// parameters() plus non-trainable state (batch-norm running statistics).
    std::vector<ParamSlot> state();
    std::size_t param_count() const;
    /// Optimizer post-step projections (BiN lambdas, TABL lambda and
    /// attention diagonal).
    void enforce_constraints();
    /// A network of the same structure with every tensor zeroed.
    Network zeros_like() const;
};

std::size_t count_params(const Network& net);

struct NetworkOptions {
    NormKind norm = NormKind::None;
    double dropout = 0.1;
    FeatureScale bin_feature_scale = FeatureScale::FeatureStd;
};

/// 40x10 -> Bilinear(120x5, relu) -> TABL(3x1)
Network build_b_tabl(Rng& rng, const NetworkOptions& options = {});
/// 40x10 -> Bilinear(60x10, relu) -> Bilinear(120x5, relu) -> TABL(3x1)
Network build_c_tabl(Rng& rng, const NetworkOptions& options = {});
Network build_network(Arch arch, Rng& rng, const NetworkOptions& options = {});

struct ForwardOptions {
    /// Batch norm uses (and updates) batch statistics when set.
    bool training = false;
    /// Dropout is active only when training and a generator is supplied.
    Rng* dropout_rng = nullptr;
};

using LayerCache = std::variant<BilinearCache, TablCache>;
using NormalizerCache = std::variant<std::monostate, BinCache, DainCache, BatchNormCache>;

struct NetworkCache {
    NormalizerCache normalizer;
    /// layers[l][i]: cache of layer l for sample i.
    std::vector<std::vector<LayerCache>> layers;
    /// masks[l][i]: dropout mask of layer l's output for sample i; empty
    /// when dropout was inactive for that layer.
    std::vector<std::vector<Matrix>> masks;
    std::size_t batch_size = 0;
};

struct NetworkForward {
    Matrix logits;  // N x kClasses
    Matrix probs;   // row softmax of logits
    NetworkCache cache;
};

NetworkForward network_forward(std::span<const Matrix> batch, Network& net,
                               const ForwardOptions& options = {});

/// Gradients of a loss with respect to every trainable parameter, aligned
/// with net.parameters(), given dLoss/dlogits (N x kClasses).
std::vector<Matrix> network_backward(const Matrix& grad_logits, const NetworkCache& cache,
                                     const Network& net);

/// Input gradients as well, for gradient checking.
struct NetworkBackward {
    std::vector<Matrix> param_grads;
    Batch grad_in;
};
NetworkBackward network_backward_full(const Matrix& grad_logits, const NetworkCache& cache,
                                      const Network& net);

}  // namespace bintabl
