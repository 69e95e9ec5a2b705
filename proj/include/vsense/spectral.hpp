#pragma once

#include "vsense/ingest.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Baseline features: Hamming-windowed one-sided magnitude spectra.
namespace vsense::spectral {

/// Symmetric Hamming window, w[n] = 0.54 - 0.46 cos(2 pi n / (L - 1)).
std::vector<double> hamming_window(std::size_t length);

/// |DFT| of the windowed input, bins 0..L/2 inclusive (DC and Nyquist kept).
/// L must be a power of two; non-finite samples raise NonFiniteSample.
std::vector<double> fft_features(std::span<const double> samples);

/// Per-channel spectra concatenated in channel order: n_ch * (L/2 + 1) values.
std::vector<double> assemble_fft_vector(const ingest::Segment& segment);

/// Feature count per channel for a window length.
constexpr std::size_t bins_per_channel(std::size_t l_seq) { return l_seq / 2 + 1; }

/// Standardization group of each position: one group per channel.
std::vector<int> group_map(std::size_t n_channels, std::size_t l_seq);

}  // namespace vsense::spectral
