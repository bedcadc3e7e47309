#pragma once

#include <string>
#include <vector>

#include "bintabl/matrix.hpp"
#include "bintabl/params.hpp"

namespace bintabl {

class Rng;

enum class Activation { None, Relu };

/// Bilinear projection of a D x T input to D1 x T1:
///   y = act(w1 · x · w2 + bias),  w1: D1 x D,  w2: T x T1.
/// w1 mixes feature slices (rows), w2 mixes temporal slices (columns).
struct BilinearLayer {
    Matrix w1, w2, bias;
    Activation activation = Activation::Relu;

    /// Glorot-uniform weights, zero bias.
    static BilinearLayer init(Rng& rng, std::size_t in_rows, std::size_t in_cols,
                              std::size_t out_rows, std::size_t out_cols, Activation activation);

    std::size_t in_rows() const noexcept { return w1.cols(); }
    std::size_t in_cols() const noexcept { return w2.rows(); }
    std::size_t out_rows() const noexcept { return w1.rows(); }
    std::size_t out_cols() const noexcept { return w2.cols(); }
    std::size_t param_count() const noexcept { return w1.size() + w2.size() + bias.size(); }

    std::vector<ParamSlot> slots(const std::string& prefix);
    BilinearLayer zeros_like() const;
};

struct BilinearCache {
    Matrix input;
    Matrix input_w2;  // x · w2
    Matrix pre;       // pre-activation
};

struct BilinearForward {
    Matrix output;
    BilinearCache cache;
};

struct BilinearBackward {
    Matrix grad_in;
    BilinearLayer grads;
};

BilinearForward bilinear_forward(const Matrix& x, const BilinearLayer& layer);
BilinearBackward bilinear_backward(const Matrix& grad_out, const BilinearCache& cache,
                                   const BilinearLayer& layer);
/// Adds parameter gradients into `grads`. Returns the input gradient, or an
/// empty matrix when `need_input_grad` is false.
Matrix bilinear_backward_acc(const Matrix& grad_out, const BilinearCache& cache,
                             const BilinearLayer& layer, BilinearLayer& grads,
                             bool need_input_grad = true);

/// Temporal-attention-augmented bilinear layer.
///
///   xbar = w1 · x                      (D1 x T)
///   attn = row_softmax(xbar · w)       (each row sums to 1 over time)
///   xmix = lambda (xbar ⊙ attn) + (1 - lambda) xbar
///   y    = xmix · w2 + bias            (D1 x T1)
///
/// The diagonal of w (T x T) is held at 1/T and lambda is kept in [0, 1].
/// No activation: the layer feeds the softmax classification head.
struct TablLayer {
    Matrix w1, w2, attention, lambda, bias;

    /// Glorot-uniform w1, w2 and off-diagonal attention weights, diagonal
    /// 1/T, lambda = 0.5, zero bias.
    static TablLayer init(Rng& rng, std::size_t in_rows, std::size_t in_cols,
                          std::size_t out_rows, std::size_t out_cols);

    std::size_t in_rows() const noexcept { return w1.cols(); }
    std::size_t in_cols() const noexcept { return w2.rows(); }
    std::size_t out_rows() const noexcept { return w1.rows(); }
    std::size_t out_cols() const noexcept { return w2.cols(); }
    std::size_t param_count() const noexcept {
        return w1.size() + w2.size() + attention.size() + lambda.size() + bias.size();
    }

    std::vector<ParamSlot> slots(const std::string& prefix);
    TablLayer zeros_like() const;
    /// Re-pins diag(attention) to 1/T and clips lambda to [0, 1].
    void enforce_constraints();
};

struct TablCache {
    Matrix input;
    Matrix xbar;
    Matrix attn;
    Matrix xmix;
};

struct TablForward {
    Matrix output;
    TablCache cache;
};

struct TablBackward {
    Matrix grad_in;
    TablLayer grads;
};

TablForward tabl_forward(const Matrix& x, const TablLayer& layer);
/// The gradient of the pinned attention diagonal is reported as zero.
TablBackward tabl_backward(const Matrix& grad_out, const TablCache& cache,
                           const TablLayer& layer);
Matrix tabl_backward_acc(const Matrix& grad_out, const TablCache& cache, const TablLayer& layer,
                         TablLayer& grads, bool need_input_grad = true);

}  // namespace bintabl
