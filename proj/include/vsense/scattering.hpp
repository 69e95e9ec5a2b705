#pragma once

#include "vsense/ingest.hpp"

#include <json.hpp>

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

// Two-layer 1-D wavelet scattering with Morlet filter banks.
//
// Frequencies are in cycles per sample. Signals are reflect-padded to twice
// their length and all convolutions are circular on the padded grid, computed
// in the frequency domain. Every output path is averaged by the low-pass phi
// and sampled at stride T, starting at the first sample of the unpadded window.
namespace vsense::scattering {

struct ScatteringConfig {
    int J = 5;              ///< largest wavelet scale is 2^J samples
    int Q1 = 6;             ///< wavelets per octave, first layer
    int Q2 = 1;             ///< wavelets per octave, second layer
    std::size_t T = 0;      ///< averaging support in samples; 0 means 2^J
    std::size_t l_seq = 4096;

    std::size_t averaging() const noexcept { return T != 0 ? T : std::size_t{1} << J; }
    std::size_t padded_length() const noexcept { return 2 * l_seq; }
    std::size_t pad_left() const noexcept { return l_seq / 2; }
    /// Number of averaged time positions per path.
    std::size_t positions() const noexcept { return (l_seq + averaging() - 1) / averaging(); }

    /// Throws InvalidScale when 2^J > l_seq, InvalidConfig for other violations.
    void validate() const;

    friend bool operator==(const ScatteringConfig&, const ScatteringConfig&) = default;
};

/// Analytic Morlet band-pass. In the frequency domain
///   psi(w) = gain * exp(-(w^2 + c^2) / (2 s^2)) * (exp(w c / s^2) - 1),   0 <= w <= 1/2,
/// and zero at negative frequencies. This is a Gaussian at c minus the Gaussian
/// at 0 scaled to cancel it at w = 0, so the filter has exactly zero mean.
/// The Gaussian centre c is chosen so that the peak of psi sits at `xi`.
struct Wavelet {
    double xi = 0.0;         ///< peak frequency (lattice point)
    double sigma = 0.0;      ///< Gaussian bandwidth
    double gauss_center = 0.0;
    double gain = 1.0;
    std::vector<double> response;  ///< sampled at k / N for k = 0..N/2
    /// response[k] is zero outside [support_begin, support_end); values below
    /// 1e-17 of the peak are flushed so products can skip them exactly.
    std::size_t support_begin = 0;
    std::size_t support_end = 0;

    double operator()(double frequency) const;
};

struct LowPass {
    double sigma = 0.0;
    std::vector<double> response;  ///< k = 0..N/2, symmetric
    std::size_t support = 0;       ///< response[k] == 0 for k > support (flushed below 1e-17)

    /// exp(-w^2 / (2 sigma^2)) with w wrapped to (-1/2, 1/2].
    double operator()(double frequency) const;
};

struct Path {
    int order = 0;
    int lambda1 = -1;  ///< layer-1 filter index, -1 for order 0
    int lambda2 = -1;  ///< layer-2 filter index, -1 for orders 0 and 1
};

/// Immutable after construction; safe to share across threads.
class FilterBank {
public:
    explicit FilterBank(const ScatteringConfig& cfg);

    const ScatteringConfig& config() const noexcept { return cfg_; }
    const std::vector<Wavelet>& layer1() const noexcept { return layer1_; }
    const std::vector<Wavelet>& layer2() const noexcept { return layer2_; }
    const LowPass& lowpass() const noexcept { return lowpass_; }

    /// Output paths in flattening order: S0, then S1 by lambda1, then S2 by (lambda1, lambda2).
    const std::vector<Path>& paths() const noexcept { return paths_; }
    /// Second-layer filter indices kept below each first-layer filter.
    const std::vector<std::vector<int>>& children() const noexcept { return children_; }

    std::size_t coefficients_per_channel() const noexcept { return paths_.size() * cfg_.positions(); }

    /// Peak frequencies of layer-1 filters (the dilation lattice).
    std::vector<double> center_frequencies() const;

    /// phi(k) * exp(2 pi i k a / N) over the full grid, a = pad_left. Used to
    /// sample the averaged output on the stride-T grid via one short inverse FFT.
    const std::vector<std::complex<double>>& shifted_lowpass() const noexcept { return shifted_lowpass_; }

private:
    ScatteringConfig cfg_;
    std::vector<Wavelet> layer1_;
    std::vector<Wavelet> layer2_;
    LowPass lowpass_;
    std::vector<Path> paths_;
    std::vector<std::vector<int>> children_;
    std::vector<std::complex<double>> shifted_lowpass_;
};

FilterBank build_filterbank(const ScatteringConfig& cfg);

/// Largest peak frequency of a bank with Q wavelets per octave.
double max_center_frequency(int Q);
/// Gaussian bandwidth giving ~ -3 dB crossings between neighbours at Q per octave.
double bandwidth_for(double xi, int Q);

/// Averaged coefficients of one channel. Each block is path-major with
/// `positions` time samples per path.
struct ScatteringVector {
    std::size_t positions = 0;
    std::vector<double> s0;
    std::vector<double> s1;
    std::vector<double> s2;

    std::vector<double> flatten() const;
};

/// Reflect padding (edge sample not repeated) to the bank's padded length.
std::vector<double> reflect_pad(std::span<const double> x, std::size_t pad_left, std::size_t total);

ScatteringVector scatter(std::span<const double> x, const FilterBank& bank);

/// Unsubsampled, unaveraged-position outputs over the whole padded grid:
/// x*phi, |x*psi1|*phi and ||x*psi1|*psi2|*phi, one row per path.
std::vector<std::vector<double>> scatter_full(std::span<const double> x, const FilterBank& bank);

/// Per-channel vectors flattened in channel order, sections S0|S1|S2 per channel.
std::vector<double> assemble_scattering_vector(const ingest::Segment& segment, const FilterBank& bank);

/// Standardization group of each position: channel * 3 + order.
std::vector<int> group_map(const FilterBank& bank, std::size_t n_channels);

/// Layout table: per path parameters and, optionally, one entry per position
/// (channel, order, lambda1, lambda2, time).
nlohmann::ordered_json layout_json(const FilterBank& bank, const std::vector<std::string>& channels,
                                   bool with_entries);

}  // namespace vsense::scattering
