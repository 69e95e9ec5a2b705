#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vsense::ingest {

enum class Underground { even, cobble };

std::string_view to_string(Underground u);
Underground parse_underground(std::string_view s);

/// Complete label record of an identification ride. Partial labels are rejected on load.
struct Labels {
    std::string rider_id;
    Underground underground = Underground::even;
    double speed_kmh = 0.0;

    friend bool operator==(const Labels&, const Labels&) = default;
};

struct Channel {
    std::string name;
    std::vector<double> samples;

    friend bool operator==(const Channel&, const Channel&) = default;
};

/// One measurement ride.
struct TimeSeriesFile {
    std::string file_id;
    double sample_rate_hz = 0.0;
    std::vector<Channel> acc_channels;
    std::vector<Channel> strain_channels;
    std::optional<Labels> labels;
    /// Rider of the ride when known without a full label record (usage rides).
    /// For labeled files this mirrors labels->rider_id.
    std::string rider_id;
    /// Optional "train"/"test" hint for labeled files (measurement location).
    std::string partition;

    std::size_t length() const noexcept;
    std::size_t channel_count() const noexcept { return acc_channels.size() + strain_channels.size(); }

    friend bool operator==(const TimeSeriesFile&, const TimeSeriesFile&) = default;
};

/// Checks the TimeSeriesFile invariants; throws MalformedFile / MissingMetadata / NonFiniteSample.
void validate(const TimeSeriesFile& f);

enum class ChannelRole { acc, strain };

/// Parsed `<name>.meta.json` sidecar.
struct Metadata {
    double sample_rate_hz = 0.0;
    std::vector<std::pair<std::string, ChannelRole>> channels;  // declaration order
    std::optional<Labels> labels;
    std::string rider_id;
    std::string partition;
};

Metadata parse_metadata(const nlohmann::ordered_json& j, std::string_view file_id = {});
Metadata read_metadata(const std::filesystem::path& meta_path);
nlohmann::ordered_json metadata_json(const TimeSeriesFile& f);

/// Sidecar path for a data file: `dir/name.csv` -> `dir/name.meta.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

/// Parses CSV text (header row of channel names, one sample per row).
TimeSeriesFile parse_csv(std::string_view text, const Metadata& meta, std::string file_id);

/// Loads a data file with its sidecar descriptor. Channel order follows the
/// metadata declaration order, not the CSV column order.
TimeSeriesFile load_file(const std::filesystem::path& data_path, const Metadata& meta);
TimeSeriesFile load_file(const std::filesystem::path& data_path);

/// Loads every `*.csv` with a sidecar in `dir`, sorted by file id.
std::vector<TimeSeriesFile> load_directory(const std::filesystem::path& dir);

/// Writes `<dir>/<file_id>.csv` and its sidecar. Samples use 7 significant digits.
void write_file(const TimeSeriesFile& f, const std::filesystem::path& dir);
std::string format_csv(const TimeSeriesFile& f);

using ChannelMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One non-overlapping window of l_seq samples per channel; rows are channels.
struct Segment {
    std::string file_id;
    std::size_t index = 0;
    ChannelMatrix acc_data;
    ChannelMatrix strain_data;
    std::optional<Labels> labels;

    std::size_t length() const noexcept { return static_cast<std::size_t>(acc_data.cols()); }
    std::span<const double> acc(std::size_t ch) const {
        return {acc_data.row(static_cast<Eigen::Index>(ch)).data(), length()};
    }
    std::span<const double> strain(std::size_t ch) const {
        return {strain_data.row(static_cast<Eigen::Index>(ch)).data(), length()};
    }
};

/// Number of full windows; the trailing partial window is dropped.
std::size_t segment_count(std::size_t length, std::size_t l_seq);

/// Cuts the file into floor(len / l_seq) windows; segment i covers [i*l_seq, (i+1)*l_seq).
/// `strain_keep`, when given, selects and orders the strain channels copied into segments.
std::vector<Segment> segment_file(const TimeSeriesFile& f, std::size_t l_seq,
                                  const std::vector<std::string>* strain_keep = nullptr);

/// Strain channels whose mean |strain| over the reference ride reaches `threshold`,
/// in channel order.
std::vector<std::string> screen_strain_channels(const TimeSeriesFile& reference, double threshold);

struct SplitCandidate {
    std::string file_id;
    std::string rider_id;
    std::size_t n_segments = 0;
};

struct SplitPlan {
    std::set<std::string> train_file_ids;
    std::set<std::string> test_file_ids;
    double target_train_fraction = 0.0;

    bool in_train(const std::string& id) const { return train_file_ids.contains(id); }
    bool in_test(const std::string& id) const { return test_file_ids.contains(id); }

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

nlohmann::ordered_json to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::ordered_json& j);

/// File-level train/test split. Within each group (one group per rider when
/// stratifying, else one group) the training subset minimizes the deviation of
/// its segment share from `target_fraction`. Ties between equally good subsets
/// are resolved by a seeded shuffle, so the plan is a pure function of the inputs.
SplitPlan split_files(std::span<const SplitCandidate> files, double target_fraction, bool stratify_by_rider,
                      std::uint64_t rng_seed);

SplitPlan split_files(std::span<const TimeSeriesFile> files, std::size_t l_seq, double target_fraction,
                      bool stratify_by_rider, std::uint64_t rng_seed);

}  // namespace vsense::ingest
