#include "bintabl/normalization.hpp"

#include <cmath>

#include "bintabl/error.hpp"

namespace bintabl {

namespace {

void check_sample(const Matrix& x, std::size_t rows, std::size_t cols, const char* layer) {
    if (x.rows() != rows || x.cols() != cols) {
        throw ShapeError(std::string(layer) + ": sample is " + x.shape() + ", layer expects " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

void check_grad_batch(std::span<const Matrix> grad_out, std::size_t cached, std::uint64_t cache_fp,
                      std::uint64_t params_fp, const char* layer) {
    if (grad_out.size() != cached) {
        throw ContractError(std::string(layer) + " backward: cache holds " +
                            std::to_string(cached) + " samples, gradient batch has " +
                            std::to_string(grad_out.size()));
    }
    if (cache_fp != params_fp) {
        throw ContractError(std::string(layer) +
                            " backward: cache was produced with different parameters");
    }
}

double sigmoid(double q) {
    if (q >= 0.0) return 1.0 / (1.0 + std::exp(-q));
    const double e = std::exp(q);
    return e / (1.0 + e);
}

// Gradient through z = (x - mean(x)) / (std(x) + eps) along one mode,
// expressed in terms of the cached z. `gz` and `gx` are read/written with
// the given stride over `n` elements.
void standardize_backward(const double* z, const double* gz, double* gx, std::size_t n,
                          std::size_t stride, double sigma, double eps) {
    const double s = sigma + eps;
    double g_mean = 0.0;
    double gz_mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        g_mean += gz[j * stride];
        gz_mean += gz[j * stride] * z[j * stride];
    }
    g_mean /= static_cast<double>(n);
    gz_mean /= static_cast<double>(n);
    const double spread_term = sigma > 0.0 ? (s / sigma) * gz_mean : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        gx[j * stride] += (gz[j * stride] - g_mean - z[j * stride] * spread_term) / s;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// BiN
// ---------------------------------------------------------------------------

BinParams BinParams::init(std::size_t features, std::size_t steps) {
    BinParams p;
    p.gamma2 = Matrix(features, 1, 1.0);
    p.beta2 = Matrix(features, 1, 0.0);
    p.gamma1 = Matrix(steps, 1, 1.0);
    p.beta1 = Matrix(steps, 1, 0.0);
    p.lambda1 = Matrix(1, 1, 0.5);
    p.lambda2 = Matrix(1, 1, 0.5);
    return p;
}

std::size_t BinParams::param_count() const noexcept {
    return gamma2.size() + beta2.size() + gamma1.size() + beta1.size() + lambda1.size() +
           lambda2.size();
}

std::vector<ParamSlot> BinParams::slots(const std::string& prefix) {
    return {
        {prefix + "gamma2", &gamma2, ParamKind::Normalizer},
        {prefix + "beta2", &beta2, ParamKind::Normalizer},
        {prefix + "gamma1", &gamma1, ParamKind::Normalizer},
        {prefix + "beta1", &beta1, ParamKind::Normalizer},
        {prefix + "lambda1", &lambda1, ParamKind::Mixing},
        {prefix + "lambda2", &lambda2, ParamKind::Mixing},
    };
}

void BinParams::enforce_constraints() {
    if (lambda1[0] < 0.0) lambda1[0] = 0.0;
    if (lambda2[0] < 0.0) lambda2[0] = 0.0;
}

BinParams BinParams::zeros_like() const {
    BinParams g = *this;
    for (Matrix* m : {&g.gamma2, &g.beta2, &g.gamma1, &g.beta1, &g.lambda1, &g.lambda2})
        m->fill(0.0);
    return g;
}

std::uint64_t BinParams::fingerprint() const {
    return bintabl::fingerprint({&gamma2, &beta2, &gamma1, &beta1, &lambda1, &lambda2},
                                {epsilon, static_cast<double>(feature_scale)});
}

BinForward bin_forward(std::span<const Matrix> x, const BinParams& p) {
    const std::size_t D = p.features();
    const std::size_t T = p.steps();
    const double eps = p.epsilon;
    const double l1 = p.lambda1[0];
    const double l2 = p.lambda2[0];

    BinForward result;
    result.output.reserve(x.size());
    result.cache.samples.reserve(x.size());
    result.cache.params_fingerprint = p.fingerprint();

    for (const Matrix& sample : x) {
        check_sample(sample, D, T, "bin_forward");
        BinSampleCache c;
        const auto mean2 = row_mean(sample);
        c.sigma2 = row_std(sample);
        const auto mean1 = col_mean(sample);
        c.sigma1 = col_std(sample);

        c.z2 = Matrix(D, T);
        c.z1 = Matrix(D, T);
        Matrix out(D, T);
        for (std::size_t d = 0; d < D; ++d) {
            const double s2 = c.sigma2[d] + eps;
            for (std::size_t t = 0; t < T; ++t) {
                const double v = sample(d, t);
                const double z2 = (v - mean2[d]) / s2;
                const double s1 = p.feature_scale == FeatureScale::FeatureStd ? c.sigma1[t] + eps
                                                                              : s2;
                const double z1 = (v - mean1[t]) / s1;
                c.z2(d, t) = z2;
                c.z1(d, t) = z1;
                out(d, t) = l1 * (p.gamma1[t] * z1 + p.beta1[t]) +
                            l2 * (p.gamma2[d] * z2 + p.beta2[d]);
            }
        }
        result.output.push_back(std::move(out));
        result.cache.samples.push_back(std::move(c));
    }
    return result;
}

Batch bin_backward_acc(std::span<const Matrix> grad_out, const BinCache& cache,
                       const BinParams& p, BinParams& grads) {
    check_grad_batch(grad_out, cache.samples.size(), cache.params_fingerprint, p.fingerprint(),
                     "bin");
    const std::size_t D = p.features();
    const std::size_t T = p.steps();
    const double eps = p.epsilon;
    const double l1 = p.lambda1[0];
    const double l2 = p.lambda2[0];

    Batch grad_in;
    grad_in.reserve(grad_out.size());
    Matrix gz2(D, T);
    Matrix gz1(D, T);
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        const Matrix& g = grad_out[i];
        const BinSampleCache& c = cache.samples[i];
        check_sample(g, D, T, "bin_backward");

        double dl1 = 0.0;
        double dl2 = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            for (std::size_t t = 0; t < T; ++t) {
                const double gv = g(d, t);
                const double z1 = c.z1(d, t);
                const double z2 = c.z2(d, t);
                dl1 += gv * (p.gamma1[t] * z1 + p.beta1[t]);
                dl2 += gv * (p.gamma2[d] * z2 + p.beta2[d]);
                grads.gamma2[d] += l2 * gv * z2;
                grads.beta2[d] += l2 * gv;
                grads.gamma1[t] += l1 * gv * z1;
                grads.beta1[t] += l1 * gv;
                gz2(d, t) = l2 * p.gamma2[d] * gv;
                gz1(d, t) = l1 * p.gamma1[t] * gv;
            }
        }
        grads.lambda1[0] += dl1;
        grads.lambda2[0] += dl2;

        Matrix gx(D, T);
        for (std::size_t d = 0; d < D; ++d) {
            standardize_backward(c.z2.row(d).data(), gz2.row(d).data(), gx.row(d).data(), T, 1,
                                 c.sigma2[d], eps);
        }
        if (p.feature_scale == FeatureScale::FeatureStd) {
            for (std::size_t t = 0; t < T; ++t) {
                standardize_backward(c.z1.values().data() + t, gz1.values().data() + t,
                                     gx.values().data() + t, D, T, c.sigma1[t], eps);
            }
        } else {
            // z1 = (x - column mean) / (row std + eps): column centering plus a
            // dependence on each row's temporal spread.
            std::vector<double> centered_col_mean(T, 0.0);
            std::vector<double> dscale(D, 0.0);
            for (std::size_t d = 0; d < D; ++d) {
                const double s2 = c.sigma2[d] + eps;
                for (std::size_t t = 0; t < T; ++t) {
                    centered_col_mean[t] += gz1(d, t) / s2;
                    dscale[d] -= gz1(d, t) * c.z1(d, t) / s2;
                }
            }
            for (double& v : centered_col_mean) v /= static_cast<double>(D);
            for (std::size_t d = 0; d < D; ++d) {
                const double s2 = c.sigma2[d] + eps;
                const double spread =
                    c.sigma2[d] > 0.0 ? dscale[d] * s2 / (static_cast<double>(T) * c.sigma2[d])
                                      : 0.0;
                for (std::size_t t = 0; t < T; ++t) {
                    gx(d, t) += gz1(d, t) / s2 - centered_col_mean[t] + spread * c.z2(d, t);
                }
            }
        }
        grad_in.push_back(std::move(gx));
    }
    return grad_in;
}

BinBackward bin_backward(std::span<const Matrix> grad_out, const BinCache& cache,
                         const BinParams& p) {
    BinBackward result;
    result.grads = p.zeros_like();
    result.grad_in = bin_backward_acc(grad_out, cache, p, result.grads);
    return result;
}

// ---------------------------------------------------------------------------
// DAIN
// ---------------------------------------------------------------------------

DainParams DainParams::init(std::size_t features, double gate_bias) {
    DainParams p;
    p.wa = Matrix::identity(features);
    p.wb = Matrix::identity(features);
    p.wc = Matrix(features, features, 0.0);
    p.wd = Matrix(features, 1, gate_bias);
    return p;
}

std::size_t DainParams::param_count() const noexcept {
    return wa.size() + wb.size() + wc.size() + wd.size();
}

std::vector<ParamSlot> DainParams::slots(const std::string& prefix) {
    return {
        {prefix + "wa", &wa, ParamKind::Normalizer},
        {prefix + "wb", &wb, ParamKind::Normalizer},
        {prefix + "wc", &wc, ParamKind::Normalizer},
        {prefix + "wd", &wd, ParamKind::Normalizer},
    };
}

DainParams DainParams::zeros_like() const {
    DainParams g = *this;
    for (Matrix* m : {&g.wa, &g.wb, &g.wc, &g.wd}) m->fill(0.0);
    return g;
}

std::uint64_t DainParams::fingerprint() const {
    return bintabl::fingerprint({&wa, &wb, &wc, &wd}, {epsilon});
}

namespace {

// out = m * v for a square matrix and a vector.
std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
    std::vector<double> out(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * v[c];
        out[r] = s;
    }
    return out;
}

// out = mᵀ * v
std::vector<double> matvec_t(const Matrix& m, const std::vector<double>& v) {
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c) * v[r];
    return out;
}

// g += u vᵀ
void add_outer(Matrix& g, const std::vector<double>& u, const std::vector<double>& v) {
    for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) += u[r] * v[c];
}

}  // namespace

DainForward dain_forward(std::span<const Matrix> x, const DainParams& p) {
    const std::size_t D = p.features();
    DainForward result;
    result.output.reserve(x.size());
    result.cache.samples.reserve(x.size());
    result.cache.params_fingerprint = p.fingerprint();

    for (const Matrix& sample : x) {
        if (sample.rows() != D || sample.cols() == 0) {
            throw ShapeError("dain_forward: sample is " + sample.shape() + ", layer expects " +
                             std::to_string(D) + " rows");
        }
        const std::size_t T = sample.cols();
        DainSampleCache c;
        c.mean = row_mean(sample);
        const auto shift = matvec(p.wa, c.mean);
        c.shifted = Matrix(D, T);
        for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 0; t < T; ++t) c.shifted(d, t) = sample(d, t) - shift[d];

        c.rms.assign(D, 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            double s = 0.0;
            for (double v : c.shifted.row(d)) s += v * v;
            c.rms[d] = std::sqrt(s / static_cast<double>(T));
        }
        c.scale = matvec(p.wb, c.rms);
        c.z = Matrix(D, T);
        for (std::size_t d = 0; d < D; ++d) {
            const double den = c.scale[d] + p.epsilon;
            for (std::size_t t = 0; t < T; ++t) c.z(d, t) = c.shifted(d, t) / den;
        }
        c.z_mean = row_mean(c.z);
        auto pre_gate = matvec(p.wc, c.z_mean);
        c.gate.assign(D, 0.0);
        for (std::size_t d = 0; d < D; ++d) c.gate[d] = sigmoid(pre_gate[d] + p.wd[d]);

        Matrix out(D, T);
        for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 0; t < T; ++t) out(d, t) = c.z(d, t) * c.gate[d];
        result.output.push_back(std::move(out));
        result.cache.samples.push_back(std::move(c));
    }
    return result;
}

Batch dain_backward_acc(std::span<const Matrix> grad_out, const DainCache& cache,
                        const DainParams& p, DainParams& grads) {
    check_grad_batch(grad_out, cache.samples.size(), cache.params_fingerprint, p.fingerprint(),
                     "dain");
    const std::size_t D = p.features();
    Batch grad_in;
    grad_in.reserve(grad_out.size());

    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        const Matrix& g = grad_out[i];
        const DainSampleCache& c = cache.samples[i];
        check_sample(g, D, c.z.cols(), "dain_backward");
        const std::size_t T = g.cols();
        const double inv_t = 1.0 / static_cast<double>(T);

        // Gate.
        Matrix dz(D, T);
        std::vector<double> dpre(D, 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            double dgate = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                dgate += g(d, t) * c.z(d, t);
                dz(d, t) = g(d, t) * c.gate[d];
            }
            dpre[d] = dgate * c.gate[d] * (1.0 - c.gate[d]);
            grads.wd[d] += dpre[d];
        }
        add_outer(grads.wc, dpre, c.z_mean);
        const auto dz_mean = matvec_t(p.wc, dpre);
        for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 0; t < T; ++t) dz(d, t) += dz_mean[d] * inv_t;

        // Scale.
        Matrix dy(D, T);
        std::vector<double> dscale(D, 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            const double den = c.scale[d] + p.epsilon;
            for (std::size_t t = 0; t < T; ++t) {
                dy(d, t) = dz(d, t) / den;
                dscale[d] -= dz(d, t) * c.shifted(d, t) / (den * den);
            }
        }
        add_outer(grads.wb, dscale, c.rms);
        const auto drms = matvec_t(p.wb, dscale);
        for (std::size_t d = 0; d < D; ++d) {
            if (c.rms[d] <= 0.0) continue;
            const double k = drms[d] * inv_t / c.rms[d];
            for (std::size_t t = 0; t < T; ++t) dy(d, t) += k * c.shifted(d, t);
        }

        // Shift.
        std::vector<double> dshift(D, 0.0);
        for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 0; t < T; ++t) dshift[d] -= dy(d, t);
        add_outer(grads.wa, dshift, c.mean);
        const auto dmean = matvec_t(p.wa, dshift);
        for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 0; t < T; ++t) dy(d, t) += dmean[d] * inv_t;

        grad_in.push_back(std::move(dy));
    }
    return grad_in;
}

DainBackward dain_backward(std::span<const Matrix> grad_out, const DainCache& cache,
                           const DainParams& p) {
    DainBackward result;
    result.grads = p.zeros_like();
    result.grad_in = dain_backward_acc(grad_out, cache, p, result.grads);
    return result;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

BatchNormParams BatchNormParams::init(std::size_t features, std::size_t steps) {
    BatchNormParams p;
    p.gamma = Matrix(features, steps, 1.0);
    p.beta = Matrix(features, steps, 0.0);
    p.running_mean = Matrix(features, steps, 0.0);
    p.running_var = Matrix(features, steps, 1.0);
    return p;
}

std::vector<ParamSlot> BatchNormParams::slots(const std::string& prefix) {
    return {
        {prefix + "gamma", &gamma, ParamKind::Normalizer},
        {prefix + "beta", &beta, ParamKind::Normalizer},
    };
}

std::vector<ParamSlot> BatchNormParams::state_slots(const std::string& prefix) {
    return {
        {prefix + "running_mean", &running_mean, ParamKind::Normalizer},
        {prefix + "running_var", &running_var, ParamKind::Normalizer},
    };
}

BatchNormParams BatchNormParams::zeros_like() const {
    BatchNormParams g = *this;
    for (Matrix* m : {&g.gamma, &g.beta, &g.running_mean, &g.running_var}) m->fill(0.0);
    return g;
}

std::uint64_t BatchNormParams::fingerprint() const {
    // Running statistics are excluded: training-mode forward updates them
    // and the backward pass does not depend on the updated values.
    return bintabl::fingerprint({&gamma, &beta}, {epsilon});
}

BatchNormForward batchnorm_forward(std::span<const Matrix> x, BatchNormParams& p,
                                   bool training) {
    const std::size_t n = x.size();
    if (n == 0) throw ContractError("batchnorm_forward: empty batch");
    if (training && n < 2) {
        throw ContractError("batchnorm_forward: training mode needs at least 2 samples, got " +
                            std::to_string(n));
    }
    for (const Matrix& sample : x) require_same_shape(sample, p.gamma, "batchnorm_forward");

    const std::size_t entries = p.gamma.size();
    BatchNormForward result;
    result.cache.training = training;
    result.cache.params_fingerprint = p.fingerprint();
    result.cache.inv_std = Matrix(p.gamma.rows(), p.gamma.cols());

    Matrix mean(p.gamma.rows(), p.gamma.cols());
    if (training) {
        Matrix var(p.gamma.rows(), p.gamma.cols());
        for (const Matrix& sample : x) mean += sample;
        mean *= 1.0 / static_cast<double>(n);
        for (const Matrix& sample : x)
            for (std::size_t e = 0; e < entries; ++e) {
                const double dv = sample[e] - mean[e];
                var[e] += dv * dv;
            }
        var *= 1.0 / static_cast<double>(n);
        for (std::size_t e = 0; e < entries; ++e) {
            result.cache.inv_std[e] = 1.0 / std::sqrt(var[e] + p.epsilon);
            p.running_mean[e] = (1.0 - p.momentum) * p.running_mean[e] + p.momentum * mean[e];
            p.running_var[e] = (1.0 - p.momentum) * p.running_var[e] + p.momentum * var[e];
        }
    } else {
        mean = p.running_mean;
        for (std::size_t e = 0; e < entries; ++e)
            result.cache.inv_std[e] = 1.0 / std::sqrt(p.running_var[e] + p.epsilon);
    }

    result.output.reserve(n);
    result.cache.normalized.reserve(n);
    for (const Matrix& sample : x) {
        Matrix xhat(sample.rows(), sample.cols());
        Matrix out(sample.rows(), sample.cols());
        for (std::size_t e = 0; e < entries; ++e) {
            xhat[e] = (sample[e] - mean[e]) * result.cache.inv_std[e];
            out[e] = p.gamma[e] * xhat[e] + p.beta[e];
        }
        result.cache.normalized.push_back(std::move(xhat));
        result.output.push_back(std::move(out));
    }
    return result;
}

Batch batchnorm_backward_acc(std::span<const Matrix> grad_out, const BatchNormCache& cache,
                             const BatchNormParams& p, BatchNormParams& grads) {
    check_grad_batch(grad_out, cache.normalized.size(), cache.params_fingerprint,
                     p.fingerprint(), "batchnorm");
    const std::size_t n = grad_out.size();
    const std::size_t entries = p.gamma.size();
    for (std::size_t i = 0; i < n; ++i) {
        require_same_shape(grad_out[i], p.gamma, "batchnorm_backward");
        for (std::size_t e = 0; e < entries; ++e) {
            grads.gamma[e] += grad_out[i][e] * cache.normalized[i][e];
            grads.beta[e] += grad_out[i][e];
        }
    }

    Batch grad_in(n, Matrix(p.gamma.rows(), p.gamma.cols()));
    if (!cache.training) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t e = 0; e < entries; ++e)
                grad_in[i][e] = grad_out[i][e] * p.gamma[e] * cache.inv_std[e];
        return grad_in;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t e = 0; e < entries; ++e) {
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double gx = grad_out[i][e] * p.gamma[e];
            sum_g += gx;
            sum_gx += gx * cache.normalized[i][e];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double gx = grad_out[i][e] * p.gamma[e];
            grad_in[i][e] = cache.inv_std[e] *
                            (gx - sum_g * inv_n - cache.normalized[i][e] * sum_gx * inv_n);
        }
    }
    return grad_in;
}

BatchNormBackward batchnorm_backward(std::span<const Matrix> grad_out,
                                     const BatchNormCache& cache, const BatchNormParams& p) {
    BatchNormBackward result;
    result.grads = p.zeros_like();
    result.grad_in = batchnorm_backward_acc(grad_out, cache, p, result.grads);
    return result;
}

}  // namespace bintabl
