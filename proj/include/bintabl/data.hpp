#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bintabl/matrix.hpp"

namespace bintabl {

inline constexpr std::size_t kLobLevels = 10;
inline constexpr std::size_t kLobFeatureCount = 4 * kLobLevels;

/// One order-book event: for each level l (0 = best),
///   [4l]   ask price   [4l+1] ask volume
///   [4l+2] bid price   [4l+3] bid volume
using LobFrame = std::array<double, kLobFeatureCount>;

/// Class ids for mid-price movement.
enum class Movement : int { Down = 0, Stationary = 1, Up = 2 };

double mid_price(const LobFrame& frame);

/// Events of one trading day plus the provided label track per horizon.
/// labels.at(h)[e] is the class of event e at horizon h.
struct LobDay {
    std::vector<LobFrame> frames;
    std::map<int, std::vector<int>> labels;
};

struct LobDataset {
    std::vector<LobDay> days;
};

/// How class ids are stored in label rows.
enum class LabelEncoding {
    /// FI-2010 convention: 1 = up, 2 = stationary, 3 = down.
    Fi2010,
    /// Already 0 = down, 1 = stationary, 2 = up.
    ZeroBased,
};

/// Row layout of a text matrix file (rows are variables, columns events).
/// Defaults follow the public FI-2010 files: 144 feature rows of which the
/// first 40 are the raw order book, then 5 label rows for horizons
/// 10, 20, 30, 50 and 100.
struct FileLayout {
    std::size_t feature_first_row = 0;
    std::vector<std::size_t> label_rows{144, 145, 146, 147, 148};
    std::vector<int> horizons{10, 20, 30, 50, 100};
    LabelEncoding encoding = LabelEncoding::Fi2010;

    std::size_t required_rows() const;
};

/// Parses a whitespace- or comma-delimited numeric matrix (locale
/// independent). Throws ParseError naming (row, col) of a bad cell.
std::vector<std::vector<double>> read_text_matrix(const std::filesystem::path& path);
void write_text_matrix(const std::filesystem::path& path,
                       const std::vector<std::vector<double>>& rows);

/// One event count per line.
std::vector<std::size_t> read_day_index(const std::filesystem::path& path);
void write_day_index(const std::filesystem::path& path, std::span<const std::size_t> lengths);

/// Loads frames and label tracks and cuts them into days. An empty
/// `day_lengths` treats the whole file as one day.
LobDataset load_fi2010(const std::filesystem::path& path, std::span<const std::size_t> day_lengths,
                       const FileLayout& layout = {});
/// Inverse of load_fi2010 for the rows named by `layout`; every other row
/// is written as zeros.
void write_fi2010(const std::filesystem::path& path, const LobDataset& data,
                  const FileLayout& layout);

/// Windowed samples: each is kLobFeatureCount x window (rows = features,
/// columns = consecutive events, oldest first).
struct SeriesBatch {
    std::vector<Matrix> samples;
    std::vector<int> labels;
    int horizon = 10;

    std::size_t size() const noexcept { return samples.size(); }
};

/// Sliding windows of `window` events with stride 1 inside each day. The
/// window ending at event e takes the horizon-H label of event e. Windows
/// never cross a day boundary. Throws ConfigError for an unknown horizon
/// and DataError("insufficient events") when no day yields a window.
SeriesBatch make_windows(std::span<const LobDay> days, std::size_t window, int horizon);

/// Train on the first `train_days` days, test on the rest.
struct DataSplit {
    SeriesBatch train;
    SeriesBatch test;
};
DataSplit split_days(const LobDataset& data, std::size_t train_days, std::size_t window,
                     int horizon);

std::array<std::size_t, 3> class_counts(std::span<const int> labels);

/// Per-class loss weights proportional to 1 / count, normalized to mean 1.
using ClassWeights = std::array<double, 3>;
ClassWeights class_weights(std::span<const int> labels);
ClassWeights class_weights_from_counts(const std::array<std::size_t, 3>& counts);

// ---------------------------------------------------------------------------
// Synthetic non-stationary order book
// ---------------------------------------------------------------------------

/// Piecewise-regime order book generator.
///
/// The mid-price follows a weakly mean-reverting walk around a per-regime
/// level `base_price + regime * offset_scale`, driven by a persistent AR(1)
/// drift that also tilts bid/ask volumes, so recent price and volume
/// movement carries information about the future. Regime r multiplies price
/// moves by (1 + r * volatility_scale). Regimes occupy consecutive,
/// equal-length blocks of days.
struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t days = 10;
    std::size_t events_per_day = 1500;
    std::size_t regimes = 10;
    double offset_scale = 25.0;
    double volatility_scale = 0.15;
    double base_price = 100.0;
    double tick = 0.01;
    double noise = 0.5;           // walk noise, in ticks
    double drift_persistence = 0.97;
    double drift_scale = 0.3;     // drift innovation, in ticks
    double reversion = 0.002;     // pull toward the regime level per event
    double volume_mean = 5.0;     // log-volume location
    double volume_sigma = 0.35;
    double volume_tilt = 0.15;    // sensitivity of log-volume to the drift
    double regime_volume_shift = 0.25;  // log-volume offset per regime
    double threshold = 0.0002;    // dead zone on relative mid-price change
    std::vector<int> horizons{10, 20, 50};

    void validate() const;
};

/// Reads "default" or a file of key=value lines naming SynthConfig fields.
SynthConfig load_synth_config(const std::string& source);
/// Rendered as key=value lines, parseable by load_synth_config.
std::string to_string(const SynthConfig& cfg);

LobDataset generate_synthetic(const SynthConfig& cfg);

/// Regime index of each day under `cfg`.
std::vector<std::size_t> synthetic_day_regimes(const SynthConfig& cfg);

}  // namespace bintabl
