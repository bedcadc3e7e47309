#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bintabl/network.hpp"

namespace bintabl {

enum class GradTarget { Bin, Dain, BatchNorm, Bilinear, Tabl, Full };

std::string to_string(GradTarget target);
/// bin | dain | bn | bl | tabl | full
GradTarget parse_grad_target(const std::string& text);

struct GradCheckOptions {
    std::uint64_t seed = 1;
    double step = 1e-5;
    double tolerance = 1e-5;
    /// Lower bound on the relative-error denominator:
    /// |a - n| / max(|a|, |n|, floor). Keeps entries whose true gradient is
    /// ~0 from turning round-off into a large relative error.
    double floor = 1e-3;
    /// Layer input shape (ignored for Full, which uses 40 x 10).
    std::size_t rows = 4;
    std::size_t cols = 5;
    std::size_t samples = 3;
    /// Full-network settings.
    Arch arch = Arch::B;
    NormKind norm = NormKind::Bin;
    FeatureScale feature_scale = FeatureScale::FeatureStd;
    /// Check at most this many randomly chosen entries per group (0 = all).
    std::size_t max_entries = 0;
};

struct GradGroupResult {
    std::string name;
    std::size_t checked = 0;
    /// Entries skipped because a ReLU changed sign inside the finite
    /// difference stencil (the loss is not differentiable there).
    std::size_t skipped = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::string target;
    std::vector<GradGroupResult> groups;

    bool pass() const;
    double max_rel_error() const;
};

/// Builds a random instance of `target` from options.seed, takes the loss
/// L = <G, output> with a random G, and compares every analytic gradient
/// group (inputs included) against central differences.
GradCheckReport gradcheck(GradTarget target, const GradCheckOptions& options = {});

}  // namespace bintabl
