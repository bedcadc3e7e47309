#include "bintabl/layers.hpp"

#include <algorithm>

#include "bintabl/error.hpp"
#include "bintabl/rng.hpp"

namespace bintabl {

namespace {

void check_input(const Matrix& x, std::size_t rows, std::size_t cols, const char* layer) {
    if (x.rows() != rows || x.cols() != cols) {
        throw ShapeError(std::string(layer) + ": input is " + x.shape() + ", layer expects " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Bilinear
// ---------------------------------------------------------------------------

BilinearLayer BilinearLayer::init(Rng& rng, std::size_t in_rows, std::size_t in_cols,
                                  std::size_t out_rows, std::size_t out_cols,
                                  Activation activation) {
    BilinearLayer layer;
    layer.w1 = glorot_uniform(rng, out_rows, in_rows);
    layer.w2 = glorot_uniform(rng, in_cols, out_cols);
    layer.bias = Matrix(out_rows, out_cols, 0.0);
    layer.activation = activation;
    return layer;
}

std::vector<ParamSlot> BilinearLayer::slots(const std::string& prefix) {
    return {
        {prefix + "w1", &w1, ParamKind::Weight},
        {prefix + "w2", &w2, ParamKind::Weight},
        {prefix + "bias", &bias, ParamKind::Bias},
    };
}

BilinearLayer BilinearLayer::zeros_like() const {
    BilinearLayer g = *this;
    for (Matrix* m : {&g.w1, &g.w2, &g.bias}) m->fill(0.0);
    return g;
}

BilinearForward bilinear_forward(const Matrix& x, const BilinearLayer& layer) {
    check_input(x, layer.in_rows(), layer.in_cols(), "bilinear_forward");
    BilinearForward result;
    result.cache.input = x;
    result.cache.input_w2 = matmul(x, layer.w2);
    result.cache.pre = layer.bias;
    matmul_acc(layer.w1, result.cache.input_w2, result.cache.pre);
    result.output = result.cache.pre;
    if (layer.activation == Activation::Relu) {
        for (double& v : result.output.values()) v = std::max(v, 0.0);
    }
    return result;
}

Matrix bilinear_backward_acc(const Matrix& grad_out, const BilinearCache& cache,
                             const BilinearLayer& layer, BilinearLayer& grads,
                             bool need_input_grad) {
    require_same_shape(grad_out, cache.pre, "bilinear_backward");
    Matrix dpre = grad_out;
    if (layer.activation == Activation::Relu) {
        for (std::size_t i = 0; i < dpre.size(); ++i)
            if (cache.pre[i] <= 0.0) dpre[i] = 0.0;
    }
    grads.bias += dpre;
    matmul_nt_acc(dpre, cache.input_w2, grads.w1);
    const Matrix back = matmul_tn(layer.w1, dpre);  // D x T1
    matmul_tn_acc(cache.input, back, grads.w2);
    if (!need_input_grad) return {};
    return matmul_nt(back, layer.w2);
}

BilinearBackward bilinear_backward(const Matrix& grad_out, const BilinearCache& cache,
                                   const BilinearLayer& layer) {
    BilinearBackward result;
    result.grads = layer.zeros_like();
    result.grad_in = bilinear_backward_acc(grad_out, cache, layer, result.grads, true);
    return result;
}

// ---------------------------------------------------------------------------
// TABL
// ---------------------------------------------------------------------------

TablLayer TablLayer::init(Rng& rng, std::size_t in_rows, std::size_t in_cols,
                          std::size_t out_rows, std::size_t out_cols) {
    TablLayer layer;
    layer.w1 = glorot_uniform(rng, out_rows, in_rows);
    layer.w2 = glorot_uniform(rng, in_cols, out_cols);
    layer.attention = glorot_uniform(rng, in_cols, in_cols);
    layer.lambda = Matrix(1, 1, 0.5);
    layer.bias = Matrix(out_rows, out_cols, 0.0);
    layer.enforce_constraints();
    return layer;
}

std::vector<ParamSlot> TablLayer::slots(const std::string& prefix) {
    return {
        {prefix + "w1", &w1, ParamKind::Weight},
        {prefix + "w2", &w2, ParamKind::Weight},
        {prefix + "attention", &attention, ParamKind::Attention},
        {prefix + "lambda", &lambda, ParamKind::Mixing},
        {prefix + "bias", &bias, ParamKind::Bias},
    };
}

TablLayer TablLayer::zeros_like() const {
    TablLayer g = *this;
    for (Matrix* m : {&g.w1, &g.w2, &g.attention, &g.lambda, &g.bias}) m->fill(0.0);
    return g;
}

void TablLayer::enforce_constraints() {
    const double pinned = 1.0 / static_cast<double>(attention.rows());
    for (std::size_t t = 0; t < attention.rows(); ++t) attention(t, t) = pinned;
    lambda[0] = std::clamp(lambda[0], 0.0, 1.0);
}

TablForward tabl_forward(const Matrix& x, const TablLayer& layer) {
    check_input(x, layer.in_rows(), layer.in_cols(), "tabl_forward");
    const double lam = layer.lambda[0];
    TablForward result;
    TablCache& c = result.cache;
    c.input = x;
    c.xbar = matmul(layer.w1, x);
    c.attn = row_softmax(matmul(c.xbar, layer.attention));
    c.xmix = Matrix(c.xbar.rows(), c.xbar.cols());
    for (std::size_t i = 0; i < c.xmix.size(); ++i)
        c.xmix[i] = lam * c.xbar[i] * c.attn[i] + (1.0 - lam) * c.xbar[i];
    result.output = layer.bias;
    matmul_acc(c.xmix, layer.w2, result.output);
    return result;
}

Matrix tabl_backward_acc(const Matrix& grad_out, const TablCache& cache, const TablLayer& layer,
                         TablLayer& grads, bool need_input_grad) {
    require_same_shape(grad_out, layer.bias, "tabl_backward");
    const double lam = layer.lambda[0];

    grads.bias += grad_out;
    matmul_tn_acc(cache.xmix, grad_out, grads.w2);
    const Matrix dmix = matmul_nt(grad_out, layer.w2);  // D1 x T

    double dlam = 0.0;
    Matrix dxbar(dmix.rows(), dmix.cols());
    Matrix dattn(dmix.rows(), dmix.cols());
    for (std::size_t i = 0; i < dmix.size(); ++i) {
        dlam += dmix[i] * (cache.xbar[i] * cache.attn[i] - cache.xbar[i]);
        dxbar[i] = dmix[i] * (lam * cache.attn[i] + 1.0 - lam);
        dattn[i] = lam * dmix[i] * cache.xbar[i];
    }
    grads.lambda[0] += dlam;

    // Row-softmax Jacobian.
    Matrix dlogits(dattn.rows(), dattn.cols());
    for (std::size_t r = 0; r < dattn.rows(); ++r) {
        const auto a = cache.attn.row(r);
        const auto da = dattn.row(r);
        double inner = 0.0;
        for (std::size_t t = 0; t < a.size(); ++t) inner += da[t] * a[t];
        auto out = dlogits.row(r);
        for (std::size_t t = 0; t < a.size(); ++t) out[t] = a[t] * (da[t] - inner);
    }

    Matrix dattention = matmul_tn(cache.xbar, dlogits);
    for (std::size_t t = 0; t < dattention.rows(); ++t) dattention(t, t) = 0.0;
    grads.attention += dattention;
    matmul_nt_acc(dlogits, layer.attention, dxbar);

    matmul_nt_acc(dxbar, cache.input, grads.w1);
    if (!need_input_grad) return {};
    return matmul_tn(layer.w1, dxbar);
}

TablBackward tabl_backward(const Matrix& grad_out, const TablCache& cache,
                           const TablLayer& layer) {
    TablBackward result;
    result.grads = layer.zeros_like();
    result.grad_in = tabl_backward_acc(grad_out, cache, layer, result.grads, true);
    return result;
}

}  // namespace bintabl
