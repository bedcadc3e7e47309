#include "bintabl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <type_traits>
#include <variant>

#include "bintabl/error.hpp"
#include "bintabl/rng.hpp"

namespace bintabl {

std::string to_string(GradTarget target) {
    switch (target) {
        case GradTarget::Bin: return "bin";
        case GradTarget::Dain: return "dain";
        case GradTarget::BatchNorm: return "bn";
        case GradTarget::Bilinear: return "bl";
        case GradTarget::Tabl: return "tabl";
        case GradTarget::Full: return "full";
    }
    return "full";
}

GradTarget parse_grad_target(const std::string& text) {
    if (text == "bin") return GradTarget::Bin;
    if (text == "dain") return GradTarget::Dain;
    if (text == "bn") return GradTarget::BatchNorm;
    if (text == "bl") return GradTarget::Bilinear;
    if (text == "tabl") return GradTarget::Tabl;
    if (text == "full") return GradTarget::Full;
    throw ConfigError("unknown gradcheck layer '" + text + "' (expected bin, dain, bn, bl, tabl or full)");
}

bool GradCheckReport::pass() const {
    return std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.pass; });
}

double GradCheckReport::max_rel_error() const {
    double worst = 0.0;
    for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
    return worst;
}

namespace {

struct Eval {
    double loss = 0.0;
    std::uint64_t pattern = 0;  // ReLU sign pattern hash
};

using EvalFn = std::function<Eval()>;
using SkipFn = std::function<bool(std::size_t tensor, std::size_t entry)>;

struct Target {
    std::string name;
    std::vector<Matrix*> values;
    std::vector<const Matrix*> analytic;
    SkipFn skip;
};

void mix(std::uint64_t& h, std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
}

void hash_signs(std::uint64_t& h, const Matrix& pre) {
    for (double v : pre.values()) mix(h, v > 0.0 ? 1U : 0U);
}

double batch_dot(const Batch& g, const Batch& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += dot(g[i], y[i]);
    return s;
}

Matrix normal_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.values()) v = scale * rng.normal();
    return m;
}

/// Samples with distinct per-row offsets and spreads, so no row or column
/// is close to constant.
Batch random_batch(Rng& rng, std::size_t n, std::size_t r, std::size_t c) {
    Batch out;
    for (std::size_t i = 0; i < n; ++i) {
        Matrix m(r, c);
        for (std::size_t a = 0; a < r; ++a) {
            const double offset = rng.uniform(-2.0, 2.0);
            const double spread = rng.uniform(0.5, 2.0);
            for (std::size_t b = 0; b < c; ++b) m(a, b) = offset + spread * rng.normal();
        }
        out.push_back(std::move(m));
    }
    return out;
}

Batch random_grads(Rng& rng, const Batch& like) {
    Batch out;
    for (const auto& m : like) out.push_back(normal_matrix(rng, m.rows(), m.cols()));
    return out;
}

void randomize(BinParams& p, Rng& rng) {
    for (double& v : p.gamma2.values()) v = rng.uniform(0.5, 1.5);
    for (double& v : p.gamma1.values()) v = rng.uniform(0.5, 1.5);
    for (double& v : p.beta2.values()) v = rng.uniform(-0.5, 0.5);
    for (double& v : p.beta1.values()) v = rng.uniform(-0.5, 0.5);
    p.lambda1(0, 0) = rng.uniform(0.2, 1.0);
    p.lambda2(0, 0) = rng.uniform(0.2, 1.0);
}

void randomize(DainParams& p, Rng& rng) {
    const auto d = p.features();
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            p.wa(r, c) += 0.2 * rng.normal() / std::sqrt(static_cast<double>(d));
            // Non-negative entries keep wb * b strictly positive.
            p.wb(r, c) += rng.uniform(0.0, 0.2) / static_cast<double>(d);
            p.wc(r, c) = 0.5 * rng.normal() / std::sqrt(static_cast<double>(d));
        }
    for (double& v : p.wd.values()) v = rng.normal();
}

void randomize(BatchNormParams& p, Rng& rng) {
    for (double& v : p.gamma.values()) v = rng.uniform(0.5, 1.5);
    for (double& v : p.beta.values()) v = rng.uniform(-0.5, 0.5);
}

void randomize(BilinearLayer& l, Rng& rng) {
    for (double& v : l.bias.values()) v = 0.1 * rng.normal();
}

void randomize(TablLayer& l, Rng& rng) {
    for (double& v : l.bias.values()) v = 0.1 * rng.normal();
    l.lambda(0, 0) = rng.uniform(0.2, 0.8);
}

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t limit, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (limit == 0 || limit >= n) return idx;
    for (std::size_t i = 0; i < limit; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    return idx;
}

GradGroupResult check_target(const Target& t, const EvalFn& f, std::uint64_t base_pattern,
                             const GradCheckOptions& o, Rng& rng) {
    GradGroupResult res;
    res.name = t.name;
    const double h = o.step;
    for (std::size_t k = 0; k < t.values.size(); ++k) {
        Matrix& x = *t.values[k];
        const Matrix& a = *t.analytic[k];
        require_same_shape(x, a, "gradcheck");
        for (std::size_t e : pick_entries(x.size(), o.max_entries, rng)) {
            if (t.skip && t.skip(k, e)) continue;
            const double orig = x[e];
            x[e] = orig + h;
            const Eval up = f();
            x[e] = orig - h;
            const Eval down = f();
            x[e] = orig;
            if (up.pattern != base_pattern || down.pattern != base_pattern) {
                ++res.skipped;
                continue;
            }
            const double numeric = (up.loss - down.loss) / (2.0 * h);
            const double abs_err = std::abs(a[e] - numeric);
            const double denom = std::max({std::abs(a[e]), std::abs(numeric), o.floor});
            res.max_abs_error = std::max(res.max_abs_error, abs_err);
            res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
            ++res.checked;
        }
    }
    res.pass = res.max_rel_error < o.tolerance;
    return res;
}

GradCheckReport run_targets(std::string name, const std::vector<Target>& targets, const EvalFn& f,
                            const GradCheckOptions& o, Rng& rng) {
    GradCheckReport report;
    report.target = std::move(name);
    const std::uint64_t base = f().pattern;
    for (const auto& t : targets) report.groups.push_back(check_target(t, f, base, o, rng));
    return report;
}

std::vector<Target> param_targets(std::vector<ParamSlot> values, std::vector<ParamSlot> grads) {
    std::vector<Target> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        Target t{values[i].name, {values[i].value}, {grads[i].value}, {}};
        if (values[i].kind == ParamKind::Attention) {
            const std::size_t n = values[i].value->cols();
            t.skip = [n](std::size_t, std::size_t e) { return e / n == e % n; };
        }
        out.push_back(std::move(t));
    }
    return out;
}

Target input_target(Batch& x, const Batch& grad_in) {
    Target t{"input", {}, {}, {}};
    for (std::size_t i = 0; i < x.size(); ++i) {
        t.values.push_back(&x[i]);
        t.analytic.push_back(&grad_in[i]);
    }
    return t;
}

std::size_t half_up(std::size_t n) { return n / 2 + 1; }

GradCheckReport check_bin(const GradCheckOptions& o, Rng& rng) {
    Batch x = random_batch(rng, o.samples, o.rows, o.cols);
    BinParams p = BinParams::init(o.rows, o.cols);
    p.feature_scale = o.feature_scale;
    randomize(p, rng);
    const Batch g = random_grads(rng, x);
    auto bwd = bin_backward(g, bin_forward(x, p).cache, p);
    const EvalFn f = [&] { return Eval{batch_dot(g, bin_forward(x, p).output), 0}; };
    auto targets = param_targets(p.slots(""), bwd.grads.slots(""));
    targets.push_back(input_target(x, bwd.grad_in));
    return run_targets("bin", targets, f, o, rng);
}

GradCheckReport check_dain(const GradCheckOptions& o, Rng& rng) {
    Batch x = random_batch(rng, o.samples, o.rows, o.cols);
    DainParams p = DainParams::init(o.rows);
    randomize(p, rng);
    const Batch g = random_grads(rng, x);
    auto bwd = dain_backward(g, dain_forward(x, p).cache, p);
    const EvalFn f = [&] { return Eval{batch_dot(g, dain_forward(x, p).output), 0}; };
    auto targets = param_targets(p.slots(""), bwd.grads.slots(""));
    targets.push_back(input_target(x, bwd.grad_in));
    return run_targets("dain", targets, f, o, rng);
}

GradCheckReport check_batchnorm(const GradCheckOptions& o, Rng& rng) {
    if (o.samples < 2) throw ConfigError("batch-norm gradcheck needs at least 2 samples");
    Batch x = random_batch(rng, o.samples, o.rows, o.cols);
    BatchNormParams p = BatchNormParams::init(o.rows, o.cols);
    randomize(p, rng);
    const Batch g = random_grads(rng, x);
    auto bwd = batchnorm_backward(g, batchnorm_forward(x, p, true).cache, p);
    const EvalFn f = [&] { return Eval{batch_dot(g, batchnorm_forward(x, p, true).output), 0}; };
    auto targets = param_targets(p.slots(""), bwd.grads.slots(""));
    targets.push_back(input_target(x, bwd.grad_in));
    return run_targets("bn", targets, f, o, rng);
}

GradCheckReport check_bilinear(const GradCheckOptions& o, Rng& rng) {
    Batch x = random_batch(rng, o.samples, o.rows, o.cols);
    BilinearLayer layer =
        BilinearLayer::init(rng, o.rows, o.cols, half_up(o.rows), half_up(o.cols), Activation::Relu);
    randomize(layer, rng);
    Batch g;
    for (std::size_t i = 0; i < x.size(); ++i)
        g.push_back(normal_matrix(rng, layer.out_rows(), layer.out_cols()));

    BilinearLayer grads = layer.zeros_like();
    Batch grad_in;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto fwd = bilinear_forward(x[i], layer);
        grad_in.push_back(bilinear_backward_acc(g[i], fwd.cache, layer, grads));
    }
    const EvalFn f = [&] {
        Eval e{0.0, 14695981039346656037ULL};
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto fwd = bilinear_forward(x[i], layer);
            e.loss += dot(g[i], fwd.output);
            hash_signs(e.pattern, fwd.cache.pre);
        }
        return e;
    };
    auto targets = param_targets(layer.slots(""), grads.slots(""));
    targets.push_back(input_target(x, grad_in));
    return run_targets("bl", targets, f, o, rng);
}

GradCheckReport check_tabl(const GradCheckOptions& o, Rng& rng) {
    Batch x = random_batch(rng, o.samples, o.rows, o.cols);
    TablLayer layer = TablLayer::init(rng, o.rows, o.cols, half_up(o.rows), half_up(o.cols));
    randomize(layer, rng);
    Batch g;
    for (std::size_t i = 0; i < x.size(); ++i)
        g.push_back(normal_matrix(rng, layer.out_rows(), layer.out_cols()));

    TablLayer grads = layer.zeros_like();
    Batch grad_in;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto fwd = tabl_forward(x[i], layer);
        grad_in.push_back(tabl_backward_acc(g[i], fwd.cache, layer, grads));
    }
    const EvalFn f = [&] {
        Eval e;
        for (std::size_t i = 0; i < x.size(); ++i) e.loss += dot(g[i], tabl_forward(x[i], layer).output);
        return e;
    };
    auto targets = param_targets(layer.slots(""), grads.slots(""));
    targets.push_back(input_target(x, grad_in));
    return run_targets("tabl", targets, f, o, rng);
}

GradCheckReport check_full(const GradCheckOptions& o, Rng& rng) {
    if (o.norm == NormKind::BatchNorm && o.samples < 2)
        throw ConfigError("batch-norm gradcheck needs at least 2 samples");
    NetworkOptions net_opts;
    net_opts.norm = o.norm;
    net_opts.dropout = 0.0;
    net_opts.bin_feature_scale = o.feature_scale;
    Network net = build_network(o.arch, rng, net_opts);
    std::visit([&](auto& p) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(p)>, std::monostate>) randomize(p, rng);
    }, net.normalizer);
    for (auto& layer : net.layers) std::visit([&](auto& l) { randomize(l, rng); }, layer);

    Batch x = random_batch(rng, o.samples, net.input_rows, net.input_cols);
    const Matrix g = normal_matrix(rng, o.samples, kClasses);
    // Training mode so batch norm differentiates through batch statistics;
    // no dropout generator, so dropout stays off.
    const ForwardOptions fopts{true, nullptr};

    const auto fwd = network_forward(x, net, fopts);
    auto bwd = network_backward_full(g, fwd.cache, net);
    Network grad_net = net.zeros_like();
    auto grad_slots = grad_net.parameters();
    for (std::size_t i = 0; i < grad_slots.size(); ++i) *grad_slots[i].value = bwd.param_grads[i];

    const EvalFn f = [&] {
        const auto out = network_forward(x, net, fopts);
        Eval e{dot(g, out.logits), 14695981039346656037ULL};
        for (const auto& per_layer : out.cache.layers)
            for (const auto& c : per_layer)
                if (const auto* bl = std::get_if<BilinearCache>(&c)) hash_signs(e.pattern, bl->pre);
        return e;
    };
    auto targets = param_targets(net.parameters(), grad_slots);
    targets.push_back(input_target(x, bwd.grad_in));
    return run_targets("full-" + to_string(o.arch) + "-" + to_string(o.norm), targets, f, o, rng);
}

}  // namespace

GradCheckReport gradcheck(GradTarget target, const GradCheckOptions& options) {
    if (!(options.step > 0.0) || !(options.tolerance > 0.0) || options.floor < 0.0)
        throw ConfigError("gradcheck step and tolerance must be positive");
    if (options.rows == 0 || options.cols == 0 || options.samples == 0)
        throw ConfigError("gradcheck shapes must be positive");
    Rng rng(options.seed);
    switch (target) {
        case GradTarget::Bin: return check_bin(options, rng);
        case GradTarget::Dain: return check_dain(options, rng);
        case GradTarget::BatchNorm: return check_batchnorm(options, rng);
        case GradTarget::Bilinear: return check_bilinear(options, rng);
        case GradTarget::Tabl: return check_tabl(options, rng);
        case GradTarget::Full: return check_full(options, rng);
    }
    throw ConfigError("unknown gradcheck target");
}

}  // namespace bintabl
