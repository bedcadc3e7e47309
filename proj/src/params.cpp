#include "bintabl/params.hpp"

#include <bit>

namespace bintabl {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void mix(std::uint64_t& h, std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
        h ^= (word >> (8 * i)) & 0xffU;
        h *= kFnvPrime;
    }
}

}  // namespace

std::uint64_t fingerprint(std::initializer_list<const Matrix*> tensors,
                          std::initializer_list<double> scalars) {
    std::uint64_t h = kFnvOffset;
    for (const Matrix* m : tensors) {
        mix(h, m->rows());
        mix(h, m->cols());
        for (double v : m->values()) mix(h, std::bit_cast<std::uint64_t>(v));
    }
    for (double v : scalars) mix(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

}  // namespace bintabl
