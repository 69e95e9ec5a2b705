#pragma once

#include "vsense/ingest.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Synthetic fleet data with known labels. Accelerations are band-limited
// Gaussian noise whose band depends on the underground and is stretched by
// speed; strain channels are linear band-passed mixtures of the accelerations.
namespace vsense::synth {

struct RiderSpec {
    std::string id;
    double weight_factor = 1.0;  ///< scales every acceleration amplitude
};

struct UndergroundSpec {
    std::string name;  ///< "even" or "cobble"
    double band_lo_hz = 0.0;
    double band_hi_hz = 0.0;
    double rms = 1.0;  ///< acceleration RMS at the reference speed, m/s^2
};

struct StrainSpec {
    std::string name;
    double offset = 0.0;        ///< static strain, um/m
    double noise_floor = 0.0;   ///< white noise RMS, um/m
    double band_lo_hz = 0.0;    ///< structural response band
    double band_hi_hz = 0.0;
    std::vector<double> gains;  ///< um/m per m/s^2, one per acceleration channel
};

struct SynthConfig {
    double sample_rate_hz = 1200.0;
    std::vector<std::string> acc_channels{"acc_fork", "acc_frame", "acc_seatpost", "acc_crank", "acc_rear"};
    std::vector<double> acc_gains{1.0, 0.8, 0.6, 0.7, 0.9};
    /// Static offsets (gravity projection). Suspension sag and riding posture shift
    /// them linearly with rider weight factor and speed ratio.
    std::vector<double> acc_offsets{9.81, 4.2, 8.9, 1.5, 9.3};
    std::vector<double> offset_weight_gain{1.5, -1.0, 2.0, 0.8, 1.2};
    std::vector<double> offset_speed_gain{0.4, 0.6, -0.3, 0.5, -0.2};
    double channel_correlation = 0.6;  ///< share of the road input common to all channels
    double floor_fraction = 0.05;      ///< broadband floor relative to the underground band

    std::vector<RiderSpec> riders{{"r1", 0.9}, {"r2", 1.0}, {"r3", 1.15}};
    std::vector<UndergroundSpec> undergrounds{{"cobble", 15.0, 60.0, 6.0}, {"even", 90.0, 240.0, 2.0}};
    std::vector<double> speeds_kmh{10.0, 15.0, 20.0};
    double reference_speed_kmh = 15.0;
    double speed_amplitude_exponent = 1.2;
    double speed_frequency_exponent = 0.5;

    std::vector<StrainSpec> strain{
        {"strain_downtube", 300.0, 2.0, 5.0, 120.0, {25.0, 15.0, 0.0, 0.0, 0.0}},
        {"strain_chainstay", -250.0, 2.0, 30.0, 300.0, {0.0, 0.0, 10.0, 8.0, 6.0}},
        {"strain_dropout", 40.0, 3.0, 5.0, 300.0, {0.5, 0.0, 0.0, 0.0, 0.5}},
    };

    double file_seconds = 30.0;
    int files_per_class = 2;  ///< replicas per (rider, underground, speed); the first half is "train"

    int usage_rides_per_rider = 6;
    double usage_seconds = 180.0;
    double block_min_seconds = 10.0;
    double block_max_seconds = 40.0;

    std::uint64_t seed = 42;

    void validate() const;
};

nlohmann::ordered_json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults. Throws InvalidConfig on bad values.
SynthConfig synth_config_from_json(const nlohmann::ordered_json& j);

/// Labeled identification rides followed by unlabeled usage rides, sorted by file id.
/// Deterministic given the seed; each file draws from its own seeded stream.
std::vector<ingest::TimeSeriesFile> generate_dataset(const SynthConfig& cfg);

void write_dataset(const std::vector<ingest::TimeSeriesFile>& files, const std::filesystem::path& dir);

}  // namespace vsense::synth
