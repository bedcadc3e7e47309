#include "bintabl/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "bintabl/error.hpp"
#include "bintabl/format.hpp"

namespace bintabl {

Confusion confusion_from(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) {
        throw ContractError("confusion_from: " + std::to_string(truth.size()) + " labels vs " +
                            std::to_string(predicted.size()) + " predictions");
    }
    Confusion c{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] > 2 || predicted[i] < 0 || predicted[i] > 2)
            throw DataError("class id out of range in confusion_from");
        ++c[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    return c;
}

std::int64_t total(const Confusion& c) {
    std::int64_t n = 0;
    for (const auto& row : c)
        for (auto v : row) n += v;
    return n;
}

namespace {

double ratio(std::int64_t num, std::int64_t den) {
    return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

}  // namespace

ClassScores class_scores(const Confusion& c) {
    ClassScores s;
    for (std::size_t k = 0; k < 3; ++k) {
        std::int64_t predicted = 0;
        std::int64_t actual = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            predicted += c[j][k];
            actual += c[k][j];
        }
        s.precision[k] = ratio(c[k][k], predicted);
        s.recall[k] = ratio(c[k][k], actual);
        const double pr = s.precision[k] + s.recall[k];
        s.f1[k] = pr > 0.0 ? 2.0 * s.precision[k] * s.recall[k] / pr : 0.0;
    }
    return s;
}

Metrics compute_metrics(const Confusion& c, Averaging averaging) {
    const ClassScores s = class_scores(c);
    const std::int64_t n = total(c);
    Metrics m;
    m.accuracy = ratio(c[0][0] + c[1][1] + c[2][2], n) * 100.0;

    std::array<double, 3> weight{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    if (averaging == Averaging::Weighted) {
        for (std::size_t k = 0; k < 3; ++k)
            weight[k] = ratio(c[k][0] + c[k][1] + c[k][2], n);
    }
    const auto average = [&](const std::array<double, 3>& v) {
        if (averaging == Averaging::Macro) return (v[0] + v[1] + v[2]) / 3.0 * 100.0;
        return (weight[0] * v[0] + weight[1] * v[1] + weight[2] * v[2]) * 100.0;
    };
    m.precision = average(s.precision);
    m.recall = average(s.recall);
    m.f1 = average(s.f1);
    return m;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

Metrics median_metrics(std::span<const RunResult> runs) {
    const auto pick = [&](double Metrics::*field) {
        std::vector<double> v;
        v.reserve(runs.size());
        for (const auto& r : runs) v.push_back(r.metrics.*field);
        return median(std::move(v));
    };
    return {pick(&Metrics::accuracy), pick(&Metrics::precision), pick(&Metrics::recall),
            pick(&Metrics::f1)};
}

EvalReport make_report(std::string label, std::vector<RunResult> runs) {
    EvalReport report;
    report.label = std::move(label);
    report.runs = std::move(runs);
    report.median = median_metrics(report.runs);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::string metric_fields(const Metrics& m) {
    return "accuracy=" + format_double(m.accuracy) + " precision=" + format_double(m.precision) +
           " recall=" + format_double(m.recall) + " f1=" + format_double(m.f1);
}

using Fields = std::map<std::string, std::string, std::less<>>;

Fields split_fields(std::istringstream& line) {
    Fields fields;
    std::string token;
    while (line >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw DataError("report: malformed field '" + token + "'");
        fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return fields;
}

const std::string& field(const Fields& f, const char* key) {
    const auto it = f.find(key);
    if (it == f.end()) throw DataError(std::string("report: missing field '") + key + "'");
    return it->second;
}

double real_field(const Fields& f, const char* key) {
    double v = 0.0;
    if (!parse_double(field(f, key), v))
        throw DataError(std::string("report: bad number in '") + key + "'");
    return v;
}

template <class Int>
Int int_value(const std::string& text, const char* key) {
    Int v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw DataError(std::string("report: bad integer in '") + key + "'");
    return v;
}

Metrics parse_metrics(const Fields& f) {
    return {real_field(f, "accuracy"), real_field(f, "precision"), real_field(f, "recall"),
            real_field(f, "f1")};
}

}  // namespace

std::string to_records(const EvalReport& report) {
    std::string out = "report label=" + report.label +
                      " runs=" + std::to_string(report.runs.size()) + "\n";
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
        const auto& r = report.runs[i];
        out += "run index=" + std::to_string(i) + " seed=" + std::to_string(r.seed) + " " +
               metric_fields(r.metrics) + " confusion=";
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) {
                if (a || b) out += ',';
                out += std::to_string(r.confusion[a][b]);
            }
        out += "\n";
    }
    out += "median " + metric_fields(report.median) + "\n";
    return out;
}

EvalReport parse_records(std::string_view text) {
    EvalReport report;
    std::istringstream in{std::string(text)};
    std::string line;
    bool seen_header = false;
    bool seen_median = false;
    std::size_t declared_runs = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        const Fields f = split_fields(ls);
        if (kind == "report") {
            report.label = field(f, "label");
            declared_runs = int_value<std::size_t>(field(f, "runs"), "runs");
            seen_header = true;
        } else if (kind == "run") {
            RunResult r;
            r.seed = int_value<std::uint64_t>(field(f, "seed"), "seed");
            r.metrics = parse_metrics(f);
            std::istringstream cs(field(f, "confusion"));
            std::string cell;
            std::size_t k = 0;
            while (std::getline(cs, cell, ',')) {
                if (k >= 9) throw DataError("report: confusion has more than 9 cells");
                r.confusion[k / 3][k % 3] = int_value<std::int64_t>(cell, "confusion");
                ++k;
            }
            if (k != 9) throw DataError("report: confusion needs 9 cells");
            report.runs.push_back(r);
        } else if (kind == "median") {
            report.median = parse_metrics(f);
            seen_median = true;
        } else {
            throw DataError("report: unknown record '" + kind + "'");
        }
    }
    if (!seen_header || !seen_median || declared_runs != report.runs.size())
        throw DataError("report: incomplete record set");
    return report;
}

std::string to_table(const EvalReport& report) {
    std::string out = report.label + "\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s %10s %11s %9s %7s\n", "run", "Accuracy%", "Precision%",
                  "Recall%", "F1%");
    out += buf;
    const auto row = [&](const std::string& name, const Metrics& m) {
        std::snprintf(buf, sizeof buf, "%-8s %10.2f %11.2f %9.2f %7.2f\n", name.c_str(),
                      m.accuracy, m.precision, m.recall, m.f1);
        out += buf;
    };
    for (std::size_t i = 0; i < report.runs.size(); ++i)
        row(std::to_string(i), report.runs[i].metrics);
    row("median", report.median);
    return out;
}

}  // namespace bintabl
