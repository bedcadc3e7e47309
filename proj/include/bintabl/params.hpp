#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "bintabl/matrix.hpp"

namespace bintabl {

/// What the optimizer may do to a parameter beyond the plain update.
enum class ParamKind {
    Weight,      // projection matrices; subject to weight decay / max-norm
    Bias,
    Normalizer,  // input-normalizer scale/shift/projection parameters
    Attention,   // TABL attention matrix (diagonal pinned)
    Mixing,      // scalar blend weights (BiN lambdas, TABL lambda)
};

/// Non-owning handle to one named parameter tensor.
struct ParamSlot {
    std::string name;
    Matrix* value = nullptr;
    ParamKind kind = ParamKind::Weight;
};

/// FNV-1a over the bit patterns of the given tensors and scalars. Caches
/// record the fingerprint of the parameters they were computed with so a
/// backward pass can reject a stale cache.
std::uint64_t fingerprint(std::initializer_list<const Matrix*> tensors,
                          std::initializer_list<double> scalars = {});

}  // namespace bintabl
