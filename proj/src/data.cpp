#include "bintabl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "bintabl/error.hpp"
#include "bintabl/format.hpp"
#include "bintabl/rng.hpp"

namespace bintabl {

double mid_price(const LobFrame& frame) { return 0.5 * (frame[0] + frame[2]); }

std::size_t FileLayout::required_rows() const {
    std::size_t rows = feature_first_row + kLobFeatureCount;
    for (std::size_t r : label_rows) rows = std::max(rows, r + 1);
    return rows;
}

// ---------------------------------------------------------------------------
// Text matrices
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> read_text_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::size_t pos = 0;
        const auto is_sep = [](char c) {
            return c == ' ' || c == '\t' || c == ',' || c == '\r';
        };
        while (pos < line.size()) {
            while (pos < line.size() && is_sep(line[pos])) ++pos;
            if (pos >= line.size()) break;
            std::size_t end = pos;
            while (end < line.size() && !is_sep(line[end])) ++end;
            const std::string_view cell(line.data() + pos, end - pos);
            double value = 0.0;
            if (!parse_double(cell, value) || !std::isfinite(value)) {
                throw ParseError(rows.size(), row.size(), std::string(cell));
            }
            row.push_back(value);
            pos = end;
        }
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError("format error in '" + path.string() + "': row " +
                            std::to_string(rows.size()) + " has " + std::to_string(row.size()) +
                            " columns, expected " + std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_text_matrix(const std::filesystem::path& path,
                       const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ' ';
            out << format_double(row[c]);
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<std::size_t> read_day_index(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open day index '" + path.string() + "'");
    std::vector<std::size_t> lengths;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        std::size_t value = 0;
        const char* begin = line.data() + first;
        const char* end = line.data() + last + 1;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{} || ptr != end) {
            throw DataError("day index '" + path.string() + "' line " + std::to_string(lineno) +
                            ": expected an event count, got '" + std::string(begin, end) + "'");
        }
        lengths.push_back(value);
    }
    return lengths;
}

void write_day_index(const std::filesystem::path& path, std::span<const std::size_t> lengths) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    for (std::size_t n : lengths) out << n << '\n';
}

// ---------------------------------------------------------------------------
// FI-2010 layout
// ---------------------------------------------------------------------------

namespace {

int decode_label(double raw, LabelEncoding encoding, std::size_t row, std::size_t col) {
    const auto bad = [&] {
        return DataError("label at (" + std::to_string(row) + "," + std::to_string(col) +
                         ") has invalid value " + format_double(raw));
    };
    if (raw != std::floor(raw)) throw bad();
    const int v = static_cast<int>(raw);
    if (encoding == LabelEncoding::ZeroBased) {
        if (v < 0 || v > 2) throw bad();
        return v;
    }
    switch (v) {
        case 1: return static_cast<int>(Movement::Up);
        case 2: return static_cast<int>(Movement::Stationary);
        case 3: return static_cast<int>(Movement::Down);
        default: throw bad();
    }
}

double encode_label(int label, LabelEncoding encoding) {
    if (encoding == LabelEncoding::ZeroBased) return label;
    switch (static_cast<Movement>(label)) {
        case Movement::Up: return 1.0;
        case Movement::Stationary: return 2.0;
        case Movement::Down: return 3.0;
    }
    return 2.0;
}

}  // namespace

LobDataset load_fi2010(const std::filesystem::path& path, std::span<const std::size_t> day_lengths,
                       const FileLayout& layout) {
    if (layout.label_rows.size() != layout.horizons.size()) {
        throw ConfigError("layout names " + std::to_string(layout.label_rows.size()) +
                          " label rows but " + std::to_string(layout.horizons.size()) +
                          " horizons");
    }
    const auto rows = read_text_matrix(path);
    if (rows.size() < layout.required_rows()) {
        throw DataError("format error: '" + path.string() + "' has " +
                        std::to_string(rows.size()) + " rows, layout needs " +
                        std::to_string(layout.required_rows()));
    }
    const std::size_t events = rows.front().size();

    std::vector<std::size_t> lengths(day_lengths.begin(), day_lengths.end());
    if (lengths.empty()) lengths.push_back(events);
    std::size_t total = 0;
    for (std::size_t n : lengths) total += n;
    if (total != events) {
        throw DataError("day index covers " + std::to_string(total) + " events, file has " +
                        std::to_string(events));
    }

    LobDataset data;
    std::size_t start = 0;
    for (std::size_t n : lengths) {
        LobDay day;
        day.frames.resize(n);
        for (std::size_t e = 0; e < n; ++e)
            for (std::size_t f = 0; f < kLobFeatureCount; ++f)
                day.frames[e][f] = rows[layout.feature_first_row + f][start + e];
        for (std::size_t j = 0; j < layout.label_rows.size(); ++j) {
            const std::size_t r = layout.label_rows[j];
            auto& track = day.labels[layout.horizons[j]];
            track.resize(n);
            for (std::size_t e = 0; e < n; ++e)
                track[e] = decode_label(rows[r][start + e], layout.encoding, r, start + e);
        }
        data.days.push_back(std::move(day));
        start += n;
    }
    return data;
}

void write_fi2010(const std::filesystem::path& path, const LobDataset& data,
                  const FileLayout& layout) {
    std::size_t events = 0;
    for (const auto& day : data.days) events += day.frames.size();
    std::vector<std::vector<double>> rows(layout.required_rows(), std::vector<double>(events, 0.0));
    std::size_t start = 0;
    for (const auto& day : data.days) {
        for (std::size_t e = 0; e < day.frames.size(); ++e)
            for (std::size_t f = 0; f < kLobFeatureCount; ++f)
                rows[layout.feature_first_row + f][start + e] = day.frames[e][f];
        for (std::size_t j = 0; j < layout.label_rows.size(); ++j) {
            const auto it = day.labels.find(layout.horizons[j]);
            if (it == day.labels.end() || it->second.size() != day.frames.size()) {
                throw DataError("no complete label track for horizon " +
                                std::to_string(layout.horizons[j]));
            }
            for (std::size_t e = 0; e < day.frames.size(); ++e)
                rows[layout.label_rows[j]][start + e] = encode_label(it->second[e], layout.encoding);
        }
        start += day.frames.size();
    }
    write_text_matrix(path, rows);
}

// ---------------------------------------------------------------------------
// Windows and labels
// ---------------------------------------------------------------------------

SeriesBatch make_windows(std::span<const LobDay> days, std::size_t window, int horizon) {
    if (window == 0) throw ConfigError("window length must be positive");
    SeriesBatch batch;
    batch.horizon = horizon;
    std::size_t events = 0;
    for (const auto& day : days) {
        events += day.frames.size();
        if (day.frames.empty()) continue;
        const auto it = day.labels.find(horizon);
        if (it == day.labels.end()) {
            throw ConfigError("horizon " + std::to_string(horizon) +
                              " has no label track in the data");
        }
        const auto& track = it->second;
        if (day.frames.size() < window) continue;
        for (std::size_t end = window - 1; end < day.frames.size(); ++end) {
            Matrix sample(kLobFeatureCount, window);
            for (std::size_t j = 0; j < window; ++j) {
                const LobFrame& frame = day.frames[end + 1 - window + j];
                for (std::size_t f = 0; f < kLobFeatureCount; ++f) sample(f, j) = frame[f];
            }
            batch.samples.push_back(std::move(sample));
            batch.labels.push_back(track[end]);
        }
    }
    if (batch.samples.empty()) {
        throw DataError("insufficient events: " + std::to_string(events) +
                        " events yield no window of length " + std::to_string(window));
    }
    return batch;
}

DataSplit split_days(const LobDataset& data, std::size_t train_days, std::size_t window,
                     int horizon) {
    if (data.days.size() <= train_days) {
        throw DataError("need more than " + std::to_string(train_days) +
                        " days to split, data has " + std::to_string(data.days.size()));
    }
    const std::span<const LobDay> all(data.days);
    return {make_windows(all.first(train_days), window, horizon),
            make_windows(all.subspan(train_days), window, horizon)};
}

std::array<std::size_t, 3> class_counts(std::span<const int> labels) {
    std::array<std::size_t, 3> counts{};
    for (int y : labels) {
        if (y < 0 || y > 2) throw DataError("label out of range: " + std::to_string(y));
        ++counts[static_cast<std::size_t>(y)];
    }
    return counts;
}

ClassWeights class_weights_from_counts(const std::array<std::size_t, 3>& counts) {
    ClassWeights w{};
    double total = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        if (counts[k] == 0) {
            throw DataError("class " + std::to_string(k) + " has no samples; cannot weight it");
        }
        w[k] = 1.0 / static_cast<double>(counts[k]);
        total += w[k];
    }
    for (double& v : w) v *= 3.0 / total;
    return w;
}

ClassWeights class_weights(std::span<const int> labels) {
    return class_weights_from_counts(class_counts(labels));
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
    int max_h = 0;
    for (int h : horizons) {
        if (h <= 0) throw ConfigError("synthetic horizons must be positive");
        max_h = std::max(max_h, h);
    }
    if (days == 0 || regimes == 0) throw ConfigError("synthetic config needs days and regimes");
    if (regimes > days) throw ConfigError("synthetic config has more regimes than days");
    if (events_per_day < 10 + static_cast<std::size_t>(max_h)) {
        throw ConfigError("synthetic events_per_day must be at least window + max horizon (" +
                          std::to_string(10 + max_h) + ")");
    }
    if (offset_scale < 0.0 || volatility_scale < 0.0 || tick <= 0.0 || noise < 0.0 ||
        threshold < 0.0 || base_price <= 0.0) {
        throw ConfigError("synthetic config has a negative scale or non-positive price/tick");
    }
    if (!(drift_persistence >= 0.0 && drift_persistence < 1.0)) {
        throw ConfigError("drift_persistence must lie in [0, 1)");
    }
}

namespace {

struct SynthField {
    const char* key;
    std::function<void(SynthConfig&, const std::string&)> set;
    std::function<std::string(const SynthConfig&)> get;
};

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    if (value == "inf") return INFINITY;
    if (!parse_double(value, v)) throw ConfigError("synthetic config: bad number for " + key);
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("synthetic config: bad integer for " + key);
    }
    return v;
}

template <class T>
SynthField real_field(const char* key, T SynthConfig::*member) {
    return {key,
            [key, member](SynthConfig& c, const std::string& v) { c.*member = to_double(key, v); },
            [member](const SynthConfig& c) { return format_double(c.*member); }};
}

template <class T>
SynthField int_field(const char* key, T SynthConfig::*member) {
    return {key,
            [key, member](SynthConfig& c, const std::string& v) {
                c.*member = static_cast<T>(to_u64(key, v));
            },
            [member](const SynthConfig& c) { return std::to_string(c.*member); }};
}

const std::vector<SynthField>& synth_fields() {
    static const std::vector<SynthField> fields = {
        int_field("seed", &SynthConfig::seed),
        int_field("days", &SynthConfig::days),
        int_field("events_per_day", &SynthConfig::events_per_day),
        int_field("regimes", &SynthConfig::regimes),
        real_field("offset_scale", &SynthConfig::offset_scale),
        real_field("volatility_scale", &SynthConfig::volatility_scale),
        real_field("base_price", &SynthConfig::base_price),
        real_field("tick", &SynthConfig::tick),
        real_field("noise", &SynthConfig::noise),
        real_field("drift_persistence", &SynthConfig::drift_persistence),
        real_field("drift_scale", &SynthConfig::drift_scale),
        real_field("reversion", &SynthConfig::reversion),
        real_field("volume_mean", &SynthConfig::volume_mean),
        real_field("volume_sigma", &SynthConfig::volume_sigma),
        real_field("volume_tilt", &SynthConfig::volume_tilt),
        real_field("regime_volume_shift", &SynthConfig::regime_volume_shift),
        real_field("threshold", &SynthConfig::threshold),
        {"horizons",
         [](SynthConfig& c, const std::string& v) {
             c.horizons.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ','))
                 c.horizons.push_back(static_cast<int>(to_u64("horizons", item)));
         },
         [](const SynthConfig& c) {
             std::string s;
             for (std::size_t i = 0; i < c.horizons.size(); ++i) {
                 if (i) s += ',';
                 s += std::to_string(c.horizons[i]);
             }
             return s;
         }},
    };
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

SynthConfig load_synth_config(const std::string& source) {
    SynthConfig cfg;
    if (source.empty() || source == "default") return cfg;
    std::ifstream in(source);
    if (!in) throw ConfigError("cannot open synthetic config '" + source + "'");
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("synthetic config: expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& fields = synth_fields();
        const auto it = std::find_if(fields.begin(), fields.end(),
                                     [&](const SynthField& f) { return key == f.key; });
        if (it == fields.end()) throw ConfigError("synthetic config: unknown key '" + key + "'");
        it->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

std::string to_string(const SynthConfig& cfg) {
    std::string out;
    for (const auto& f : synth_fields()) out += std::string(f.key) + "=" + f.get(cfg) + "\n";
    return out;
}

std::vector<std::size_t> synthetic_day_regimes(const SynthConfig& cfg) {
    std::vector<std::size_t> regimes(cfg.days);
    for (std::size_t d = 0; d < cfg.days; ++d) regimes[d] = d * cfg.regimes / cfg.days;
    return regimes;
}

LobDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int max_h = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
    const auto day_regime = synthetic_day_regimes(cfg);
    const double drift_std =
        cfg.drift_scale / std::sqrt(1.0 - cfg.drift_persistence * cfg.drift_persistence);

    double drift = 0.0;      // ticks per event
    double deviation = 0.0;  // price units away from the regime level

    LobDataset data;
    for (std::size_t d = 0; d < cfg.days; ++d) {
        const double r = static_cast<double>(day_regime[d]);
        const double level = cfg.base_price + r * cfg.offset_scale;
        const double vol = 1.0 + r * cfg.volatility_scale;
        const double step = cfg.tick * vol;
        const double log_volume = cfg.volume_mean + r * cfg.regime_volume_shift;

        // Simulate past the end of the day so every kept event has a full
        // label horizon inside the same regime.
        const std::size_t n = cfg.events_per_day + static_cast<std::size_t>(max_h);
        std::vector<double> mids(n);
        std::vector<double> drifts(n);
        for (std::size_t e = 0; e < n; ++e) {
            drift = cfg.drift_persistence * drift + cfg.drift_scale * rng.normal();
            deviation += step * (drift + cfg.noise * rng.normal()) - cfg.reversion * deviation;
            mids[e] = level + deviation;
            drifts[e] = drift;
        }

        LobDay day;
        day.frames.resize(cfg.events_per_day);
        for (std::size_t e = 0; e < cfg.events_per_day; ++e) {
            LobFrame& f = day.frames[e];
            const double tilt = cfg.volume_tilt * drifts[e] / drift_std;
            for (std::size_t l = 0; l < kLobLevels; ++l) {
                const double gap = step * static_cast<double>(l + 1);
                const double fade = 1.0 / static_cast<double>(l + 1);
                f[4 * l] = mids[e] + gap;
                f[4 * l + 1] =
                    std::exp(log_volume - tilt * fade + cfg.volume_sigma * rng.normal());
                f[4 * l + 2] = mids[e] - gap;
                f[4 * l + 3] =
                    std::exp(log_volume + tilt * fade + cfg.volume_sigma * rng.normal());
            }
        }
        for (int h : cfg.horizons) {
            auto& track = day.labels[h];
            track.resize(cfg.events_per_day);
            for (std::size_t e = 0; e < cfg.events_per_day; ++e) {
                double future = 0.0;
                for (int k = 1; k <= h; ++k) future += mids[e + static_cast<std::size_t>(k)];
                future /= static_cast<double>(h);
                const double change = (future - mids[e]) / mids[e];
                track[e] = change > cfg.threshold    ? static_cast<int>(Movement::Up)
                           : change < -cfg.threshold ? static_cast<int>(Movement::Down)
                                                     : static_cast<int>(Movement::Stationary);
            }
        }
        data.days.push_back(std::move(day));
    }
    return data;
}

}  // namespace bintabl
