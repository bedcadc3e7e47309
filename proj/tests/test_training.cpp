#include <doctest.h>

#include <cmath>

#include "bintabl/error.hpp"
#include "bintabl/training.hpp"
#include "oracles.hpp"

using namespace bintabl;

namespace {

/// Separable toy set: class k tilts feature row 0 with slope (k - 1).
SeriesBatch toy_data(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    SeriesBatch out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 3);
        Matrix x = oracle::random_matrix(rng, kInputFeatures, kInputSteps, 0.3);
        for (std::size_t t = 0; t < kInputSteps; ++t)
            x(0, t) += (label - 1) * (static_cast<double>(t) - 4.5) * 0.5;
        out.samples.push_back(std::move(x));
        out.labels.push_back(label);
    }
    return out;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.dropout = 0.1;
    cfg.runs = 1;
    cfg.threads = 1;
    return cfg;
}

Network builder(Rng& rng, NormKind norm = NormKind::None, double dropout = 0.1) {
    NetworkOptions o;
    o.norm = norm;
    o.dropout = dropout;
    return build_b_tabl(rng, o);
}

}  // namespace

TEST_CASE("weighted cross entropy: hand-computed example") {
    const Matrix probs = Matrix::from_rows({{0.5, 0.25, 0.25}, {0.1, 0.8, 0.1}});
    const std::vector<int> labels{0, 1};
    const auto r = weighted_cross_entropy(probs, labels, {2.0, 1.0, 1.0});
    CHECK(r.loss == doctest::Approx((2.0 * std::log(2.0) + std::log(1.25)) / 2.0).epsilon(1e-10));
    // w[y] (p - onehot) / N
    const Matrix want = Matrix::from_rows({{-0.5, 0.25, 0.25}, {0.05, -0.1, 0.05}});
    CHECK(oracle::max_abs_diff(r.grad_logits, want) < 1e-15);
}

TEST_CASE("weighted cross entropy: gradient matches finite differences in the logits") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix logits = oracle::random_matrix(rng, 6, 3, 2.0);
        std::vector<int> labels;
        for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(rng.below(3)));
        const ClassWeights w{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
        const auto r = weighted_cross_entropy(row_softmax(logits), labels, w);
        const auto loss = [&] { return weighted_cross_entropy(row_softmax(logits), labels, w).loss; };
        CHECK(oracle::max_rel_error(r.grad_logits, oracle::numeric_grad(loss, logits)) < 1e-6);
    }
}

TEST_CASE("weighted cross entropy: bad inputs") {
    const Matrix probs(2, 3, 1.0 / 3.0);
    const std::vector<int> bad{0, 3};
    CHECK_THROWS_AS(weighted_cross_entropy(probs, bad, {1, 1, 1}), DataError);
    const std::vector<int> short_labels{0};
    CHECK_THROWS_AS(weighted_cross_entropy(probs, short_labels, {1, 1, 1}), ShapeError);
}

TEST_CASE("class weights are inverse frequency with mean one") {
    const std::vector<int> labels{0, 1, 1, 2};
    const auto w = class_weights(labels);
    CHECK(w[0] == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(w[2] == doctest::Approx(1.2).epsilon(1e-14));
    const std::vector<int> missing{0, 0, 1};
    CHECK_THROWS_AS(class_weights(missing), DataError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Matrix w = Matrix::from_rows({{1, -2}, {3, 4}});
    const Matrix before = w;
    std::vector<ParamSlot> slots{{"w", &w, ParamKind::Weight}};
    std::vector<Matrix> grads{Matrix(2, 2)};
    AdamState state;
    for (int i = 0; i < 5; ++i) adam_update(slots, grads, state, 1e-3);
    CHECK(w == before);
    CHECK(state.step == 5);
}

TEST_CASE("adam: first step moves each entry by about lr against the gradient sign") {
    Matrix w = Matrix::from_rows({{1, -2, 0.5}});
    const Matrix before = w;
    std::vector<ParamSlot> slots{{"w", &w, ParamKind::Weight}};
    std::vector<Matrix> grads{Matrix::from_rows({{0.3, -7.0, 1e-3}})};
    AdamState state;
    adam_update(slots, grads, state, 1e-3);
    for (std::size_t i = 0; i < 3; ++i) {
        const double sign = grads[0][i] > 0 ? 1.0 : -1.0;
        CHECK(w[i] - before[i] == doctest::Approx(-1e-3 * sign).epsilon(1e-4));
    }
}

TEST_CASE("adam: non-positive rate and mismatched gradients are rejected") {
    Matrix w(2, 2);
    std::vector<ParamSlot> slots{{"w", &w, ParamKind::Weight}};
    std::vector<Matrix> grads{Matrix(2, 2)};
    AdamState state;
    CHECK_THROWS_AS(adam_update(slots, grads, state, 0.0), ConfigError);
    CHECK_THROWS_AS(adam_update(slots, grads, state, -1e-3), ConfigError);
    std::vector<Matrix> none;
    CHECK_THROWS_AS(adam_update(slots, none, state, 1e-3), ContractError);
}

TEST_CASE("learning-rate schedule") {
    TrainConfig cfg;
    CHECK(lr_at(cfg, 1) == 1e-3);
    CHECK(lr_at(cfg, 10) == 1e-3);
    CHECK(lr_at(cfg, 11) == 1e-4);
    CHECK(lr_at(cfg, 70) == 1e-4);
    CHECK(lr_at(cfg, 71) == 1e-5);
    CHECK(lr_at(cfg, 80) == 1e-5);
    CHECK_NOTHROW(cfg.validate());

    TrainConfig bad = cfg;
    bad.schedule.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.schedule = {{1, 1e-3}, {11, 1e-4}, {5, 1e-5}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.schedule = {{1, 0.0}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.dropout = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(parse_weight_reg(to_string(WeightReg::Decay)) == WeightReg::Decay);
    CHECK_THROWS_AS(parse_weight_reg("l1"), ConfigError);
}

TEST_CASE("max-norm caps weight rows and ignores other kinds") {
    Matrix w = Matrix::from_rows({{30, 40}, {0.3, 0.4}});
    Matrix b = Matrix::from_rows({{30, 40}});
    std::vector<ParamSlot> slots{{"w", &w, ParamKind::Weight}, {"b", &b, ParamKind::Bias}};
    apply_max_norm(slots, 10.0);
    CHECK(w(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(w(0, 1) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(w(1, 0) == 0.3);
    CHECK(b(0, 1) == 40.0);
}

TEST_CASE("optimizer steps keep every constraint under adversarial gradients") {
    Rng rng(5);
    NetworkOptions o;
    o.norm = NormKind::Bin;
    Network net = build_c_tabl(rng, o);
    TrainConfig cfg;
    AdamState state;
    for (int step = 0; step < 200; ++step) {
        std::vector<Matrix> grads;
        for (const auto& s : net.parameters()) {
            Matrix g(s.value->rows(), s.value->cols());
            for (double& v : g.values()) v = 1e3 * rng.normal();
            // Push mixing weights out of range.
            if (s.kind == ParamKind::Mixing) g.fill(step % 2 ? 1e6 : -1e6);
            grads.push_back(std::move(g));
        }
        optimizer_step(net, std::move(grads), state, 0.5, cfg);
    }
    const auto& bin = std::get<BinParams>(net.normalizer);
    CHECK(bin.lambda1[0] >= 0.0);
    CHECK(bin.lambda2[0] >= 0.0);
    const auto& tabl = std::get<TablLayer>(net.layers.back());
    CHECK(tabl.lambda[0] >= 0.0);
    CHECK(tabl.lambda[0] <= 1.0);
    for (std::size_t t = 0; t < tabl.attention.rows(); ++t) CHECK(tabl.attention(t, t) == 1.0 / 5.0);
    for (const auto& s : net.parameters()) {
        if (s.kind != ParamKind::Weight) continue;
        for (std::size_t r = 0; r < s.value->rows(); ++r) {
            double sq = 0.0;
            for (double v : s.value->row(r)) sq += v * v;
            CHECK(std::sqrt(sq) <= 10.0 * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("training is bit-identical for a fixed seed") {
    const SeriesBatch data = toy_data(1, 90);
    const TrainConfig cfg = small_config();
    const auto run = [&] {
        Rng rng(42);
        Network net = builder(rng, NormKind::Bin);
        const auto log = train(net, data, cfg, rng);
        return std::make_pair(net.parameters().front().value->values()[0], log.back().loss);
    };
    Rng r1(42), r2(42);
    Network a = builder(r1, NormKind::Bin), b = builder(r2, NormKind::Bin);
    const auto la = train(a, data, cfg, r1);
    const auto lb = train(b, data, cfg, r2);
    for (std::size_t e = 0; e < la.size(); ++e) CHECK(la[e].loss == lb[e].loss);
    auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k].value == *pb[k].value);
    CHECK(run() == run());
}

TEST_CASE("training loss falls on a separable problem") {
    const SeriesBatch data = toy_data(2, 150);
    TrainConfig cfg = small_config();
    cfg.epochs = 10;
    cfg.dropout = 0.0;
    Rng rng(8);
    Network net = builder(rng, NormKind::None, 0.0);
    std::vector<double> losses;
    train(net, data, cfg, rng, [&](const EpochRecord& r) { losses.push_back(r.loss); });
    REQUIRE(losses.size() == 10);
    int rises = 0;
    for (std::size_t e = 1; e < losses.size(); ++e) rises += losses[e] >= losses[e - 1];
    CHECK(rises <= 1);
    CHECK(losses.back() < 0.5 * losses.front());
    const auto c = evaluate(net, toy_data(3, 60));
    // Well above the one-in-three chance level.
    CHECK(compute_metrics(c).accuracy > 60.0);
}

TEST_CASE("epoch records") {
    EpochRecord r;
    r.epoch = 3;
    r.lr = 1e-4;
    r.loss = 0.5;
    r.accuracy = 75.0;
    r.wall_seconds = 1.25;
    CHECK(r.to_record() == "epoch=3 lr=1e-04 loss=0.5 accuracy=75 wall_s=1.25");
}

TEST_CASE("protocol: one run reports itself as the median") {
    const SeriesBatch train_data = toy_data(4, 60), test_data = toy_data(5, 30);
    TrainConfig cfg = small_config();
    cfg.runs = 1;
    const auto res = run_protocol([](Rng& rng) { return builder(rng); }, train_data, test_data, cfg, "x");
    REQUIRE(res.report.runs.size() == 1);
    CHECK(res.report.median == res.report.runs[0].metrics);
    CHECK(res.report.runs[0].seed == derive_seed(cfg.seed, 0));
    CHECK(res.median_run == 0);
    CHECK(res.report.label == "x");
}

TEST_CASE("protocol: deterministic across thread counts") {
    const SeriesBatch train_data = toy_data(6, 60), test_data = toy_data(7, 30);
    TrainConfig cfg = small_config();
    cfg.runs = 3;
    cfg.seed = 17;
    const NetworkBuilder b = [](Rng& rng) { return builder(rng, NormKind::Bin); };
    const auto one = run_protocol(b, train_data, test_data, cfg);
    cfg.threads = 3;
    const auto three = run_protocol(b, train_data, test_data, cfg);
    CHECK(one.report == three.report);
    CHECK(to_records(one.report) == to_records(three.report));
    for (std::size_t i = 0; i < 3; ++i) CHECK(one.report.runs[i].seed == derive_seed(17, i));
}

TEST_CASE("median of run metrics") {
    CHECK(median({3, 1, 2, 5, 4}) == 3.0);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    std::vector<RunResult> runs(5);
    const double f1[] = {3, 1, 2, 5, 4};
    const double acc[] = {10, 50, 40, 20, 30};
    for (int i = 0; i < 5; ++i) {
        runs[i].metrics.f1 = f1[i];
        runs[i].metrics.accuracy = acc[i];
    }
    const Metrics m = median_metrics(runs);
    CHECK(m.f1 == 3.0);
    CHECK(m.accuracy == 30.0);
}
