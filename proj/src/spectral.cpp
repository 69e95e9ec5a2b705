#include "vsense/spectral.hpp"

#include "vsense/error.hpp"
#include "vsense/fft.hpp"

#include <cmath>
#include <numbers>

namespace vsense::spectral {

std::vector<double> hamming_window(std::size_t length) {
    std::vector<double> w(length, 1.0);
    if (length < 2) return w;
    const double denom = static_cast<double>(length - 1);
    for (std::size_t n = 0; n < length; ++n)
        w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    return w;
}

std::vector<double> fft_features(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2 || (n & (n - 1)) != 0) throw InvalidConfig("FFT features need a power-of-two window length");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(samples[i])) throw NonFiniteSample("", "", i);

    thread_local std::vector<double> window;
    if (window.size() != n) window = hamming_window(n);

    std::vector<double> windowed(n);
    for (std::size_t i = 0; i < n; ++i) windowed[i] = samples[i] * window[i];
    std::vector<dsp::Complex> spectrum(n / 2 + 1);
    dsp::rfft(windowed, spectrum);

    std::vector<double> mag(spectrum.size());
    for (std::size_t k = 0; k < spectrum.size(); ++k) mag[k] = std::abs(spectrum[k]);
    return mag;
}

std::vector<double> assemble_fft_vector(const ingest::Segment& segment) {
    const std::size_t n_ch = static_cast<std::size_t>(segment.acc_data.rows());
    const std::size_t bins = bins_per_channel(segment.length());
    std::vector<double> out;
    out.reserve(n_ch * bins);
    for (std::size_t c = 0; c < n_ch; ++c) {
        std::vector<double> spec;
        try {
            spec = fft_features(segment.acc(c));
        } catch (const NonFiniteSample& e) {
            throw NonFiniteSample(segment.file_id, "acc#" + std::to_string(c),
                                  segment.index * segment.length() + e.index());
        }
        out.insert(out.end(), spec.begin(), spec.end());
    }
    return out;
}

std::vector<int> group_map(std::size_t n_channels, std::size_t l_seq) {
    const std::size_t bins = bins_per_channel(l_seq);
    std::vector<int> groups(n_channels * bins);
    for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = static_cast<int>(i / bins);
    return groups;
}

}  // namespace vsense::spectral
