#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bintabl {

/// confusion[true_class][predicted_class]
using Confusion = std::array<std::array<std::int64_t, 3>, 3>;

Confusion confusion_from(std::span<const int> truth, std::span<const int> predicted);
std::int64_t total(const Confusion& c);

/// Per-class scores as fractions in [0, 1]. A zero denominator yields 0.
struct ClassScores {
    std::array<double, 3> precision{};
    std::array<double, 3> recall{};
    std::array<double, 3> f1{};
};
ClassScores class_scores(const Confusion& c);

enum class Averaging {
    Macro,     // unweighted mean over classes
    Weighted,  // mean weighted by true-class support
};

/// Summary metrics in percent.
struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics compute_metrics(const Confusion& c, Averaging averaging = Averaging::Macro);

struct RunResult {
    std::uint64_t seed = 0;
    Confusion confusion{};
    Metrics metrics;

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

/// Per-run results plus the per-metric median across runs.
struct EvalReport {
    std::string label;
    std::vector<RunResult> runs;
    Metrics median;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Middle value; mean of the two middle values for an even count.
double median(std::vector<double> values);
/// Each metric's median taken independently.
Metrics median_metrics(std::span<const RunResult> runs);
EvalReport make_report(std::string label, std::vector<RunResult> runs);

/// Line-delimited key=value records with shortest round-trip numbers:
///   report label=<label> runs=<n>
///   run index=<i> seed=<s> accuracy=.. precision=.. recall=.. f1=.. confusion=c00,...,c22
///   median accuracy=.. precision=.. recall=.. f1=..
std::string to_records(const EvalReport& report);
EvalReport parse_records(std::string_view text);
/// Human-readable table.
std::string to_table(const EvalReport& report);

}  // namespace bintabl
