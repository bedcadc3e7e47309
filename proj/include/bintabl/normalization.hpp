#pragma once

// Input normalization layers for D x T series windows (D features, T
// events): bilinear normalization (BiN), deep adaptive input normalization
// (DAIN) and entry-wise batch normalization. Every layer is a pair of pure
// functions, forward returning a cache and backward consuming it.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bintabl/matrix.hpp"
#include "bintabl/params.hpp"

namespace bintabl {

using Batch = std::vector<Matrix>;

inline constexpr double kNormEpsilon = 1e-8;

// ---------------------------------------------------------------------------
// BiN
// ---------------------------------------------------------------------------

/// Divisor used by the feature-mode (per event, across features) path.
enum class FeatureScale {
    /// Standard deviation of each column, across features. Default.
    FeatureStd,
    /// Standard deviation of each row, across time: the temporal-path
    /// spread reused as the divisor. Kept only for comparison runs.
    TemporalStd,
};

/// Learnable parameters of a BiN layer.
///
/// gamma2/beta2 are D x 1 and scale/shift the temporal path (each row
/// standardized over time); gamma1/beta1 are T x 1 and scale/shift the
/// feature path (each column standardized over features). lambda1 weighs
/// the feature path and lambda2 the temporal path; both stay non-negative.
struct BinParams {
    Matrix gamma2, beta2;
    Matrix gamma1, beta1;
    Matrix lambda1, lambda2;  // 1 x 1
    double epsilon = kNormEpsilon;
    FeatureScale feature_scale = FeatureScale::FeatureStd;

    /// Unit scales, zero shifts, lambda1 = lambda2 = 0.5.
    static BinParams init(std::size_t features, std::size_t steps);

    std::size_t features() const noexcept { return gamma2.rows(); }
    std::size_t steps() const noexcept { return gamma1.rows(); }
    /// 2(D + T) + 2
    std::size_t param_count() const noexcept;

    std::vector<ParamSlot> slots(const std::string& prefix);
    /// Projects the lambdas back onto [0, inf).
    void enforce_constraints();
    BinParams zeros_like() const;
    std::uint64_t fingerprint() const;
};

struct BinSampleCache {
    Matrix z2;                    // temporal-path standardized input
    Matrix z1;                    // feature-path standardized input
    std::vector<double> sigma2;   // per-row std (length D)
    std::vector<double> sigma1;   // per-column std (length T)
};

struct BinCache {
    std::vector<BinSampleCache> samples;
    std::uint64_t params_fingerprint = 0;
};

struct BinForward {
    Batch output;
    BinCache cache;
};

struct BinBackward {
    Batch grad_in;
    BinParams grads;
};

BinForward bin_forward(std::span<const Matrix> x, const BinParams& p);
BinBackward bin_backward(std::span<const Matrix> grad_out, const BinCache& cache,
                         const BinParams& p);
/// Accumulating variant used by the network: adds parameter gradients into
/// `grads` and returns the input gradients.
Batch bin_backward_acc(std::span<const Matrix> grad_out, const BinCache& cache,
                       const BinParams& p, BinParams& grads);

// ---------------------------------------------------------------------------
// DAIN
// ---------------------------------------------------------------------------

/// DAIN parameters: shift projection wa, scale projection wb, gate weights wc
/// (all D x D) and gate bias wd (D x 1).
struct DainParams {
    Matrix wa, wb, wc, wd;
    double epsilon = kNormEpsilon;

    static constexpr double kDefaultGateBias = 4.0;

    /// wa = wb = I, wc = 0, wd = gate_bias: starts as per-row z-scoring with
    /// an almost open gate.
    static DainParams init(std::size_t features, double gate_bias = kDefaultGateBias);

    std::size_t features() const noexcept { return wa.rows(); }
    std::size_t param_count() const noexcept;
    std::vector<ParamSlot> slots(const std::string& prefix);
    DainParams zeros_like() const;
    std::uint64_t fingerprint() const;
};

struct DainSampleCache {
    std::vector<double> mean;    // a: temporal mean
    Matrix shifted;              // y = x - wa a
    std::vector<double> rms;     // b: rms of y over time
    std::vector<double> scale;   // wb b
    Matrix z;                    // y / (wb b + eps)
    std::vector<double> z_mean;  // c
    std::vector<double> gate;    // sigmoid(wc c + wd)
};

struct DainCache {
    std::vector<DainSampleCache> samples;
    std::uint64_t params_fingerprint = 0;
};

struct DainForward {
    Batch output;
    DainCache cache;
};

struct DainBackward {
    Batch grad_in;
    DainParams grads;
};

DainForward dain_forward(std::span<const Matrix> x, const DainParams& p);
DainBackward dain_backward(std::span<const Matrix> grad_out, const DainCache& cache,
                           const DainParams& p);
Batch dain_backward_acc(std::span<const Matrix> grad_out, const DainCache& cache,
                        const DainParams& p, DainParams& grads);

// ---------------------------------------------------------------------------
// Batch normalization over the batch axis, one statistic per (d, t) entry.
// ---------------------------------------------------------------------------

struct BatchNormParams {
    Matrix gamma, beta;
    Matrix running_mean, running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;

    static BatchNormParams init(std::size_t features, std::size_t steps);

    std::size_t param_count() const noexcept { return gamma.size() + beta.size(); }
    /// Trainable tensors only.
    std::vector<ParamSlot> slots(const std::string& prefix);
    /// Running statistics (checkpointed, never optimized).
    std::vector<ParamSlot> state_slots(const std::string& prefix);
    BatchNormParams zeros_like() const;
    std::uint64_t fingerprint() const;
};

struct BatchNormCache {
    bool training = false;
    Batch normalized;  // x_hat per sample
    Matrix inv_std;    // 1 / sqrt(var + eps) per entry
    std::uint64_t params_fingerprint = 0;
};

struct BatchNormForward {
    Batch output;
    BatchNormCache cache;
};

struct BatchNormBackward {
    Batch grad_in;
    BatchNormParams grads;
};

/// Training mode standardizes with batch statistics and folds them into the
/// running statistics; inference mode uses the running statistics and leaves
/// `p` untouched.
BatchNormForward batchnorm_forward(std::span<const Matrix> x, BatchNormParams& p, bool training);
BatchNormBackward batchnorm_backward(std::span<const Matrix> grad_out,
                                     const BatchNormCache& cache, const BatchNormParams& p);
Batch batchnorm_backward_acc(std::span<const Matrix> grad_out, const BatchNormCache& cache,
                             const BatchNormParams& p, BatchNormParams& grads);

}  // namespace bintabl
