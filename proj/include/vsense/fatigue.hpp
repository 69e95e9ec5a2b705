#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vsense::fatigue {

struct Cycle {
    double amplitude = 0.0;  ///< half range, strain units
    double mean = 0.0;
    double count = 1.0;
    bool residue_closed = false;  ///< closed while processing the doubled residue

    friend bool operator==(const Cycle&, const Cycle&) = default;
};

struct CycleList {
    std::vector<Cycle> cycles;
    std::vector<double> residue;  ///< turning points left after the first pass
};

/// Alternating local extrema, first and last samples included. Runs of equal
/// samples are collapsed. A constant series yields a single point.
std::vector<double> turning_points(std::span<const double> series);

/// Four-point rainflow count. Ranges with |s2-s3| <= |s1-s2| and |s2-s3| <= |s3-s4|
/// close a cycle. The residue is then doubled and counted again, so every
/// turning point ends up in exactly one full cycle.
CycleList rainflow_count(std::span<const double> turning);

/// N = K * amplitude^-k, single slope over all amplitudes.
struct WoehlerCurve {
    double k = 5.0;
    double K = 1e7;

    void validate() const;
    double cycles_to_failure(double amplitude) const;
};

/// Elementary Palmgren-Miner sum; zero-amplitude cycles contribute nothing.
double damage_sum(const CycleList& cycles, const WoehlerCurve& curve);
double damage_sum(std::span<const Cycle> cycles, const WoehlerCurve& curve);

/// Turning points, rainflow and Miner sum of one strain window.
double segment_damage(std::span<const double> strain, const WoehlerCurve& curve);

struct DamageRecord {
    std::string file_id;
    std::size_t segment = 0;
    std::string channel;
    double D = 0.0;

    /// log10(D); NaN when D == 0.
    double lgD() const;
};

std::string damage_records_csv(std::span<const DamageRecord> records);

/// Binned counts over amplitude (rows) and mean (columns), diagnostic only.
struct RainflowMatrix {
    std::size_t bins = 64;
    double amplitude_min = 0.0, amplitude_max = 0.0;
    double mean_min = 0.0, mean_max = 0.0;
    std::vector<double> counts;  ///< row-major bins x bins

    double at(std::size_t amplitude_bin, std::size_t mean_bin) const { return counts[amplitude_bin * bins + mean_bin]; }
};

RainflowMatrix rainflow_matrix(const CycleList& cycles, std::size_t bins = 64);

}  // namespace vsense::fatigue
