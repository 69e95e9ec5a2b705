#include "vsense/scattering.hpp"

#include "vsense/error.hpp"
#include "vsense/fft.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>

namespace vsense::scattering {

using dsp::Complex;

namespace {

// Low-pass bandwidth at T = 1; the averaging filter narrows as 1/T.
constexpr double kLowpassSigma0 = 0.1;

double morlet_shape(double w, double c, double s) {
    if (w <= 0.0) return 0.0;
    const double s2 = s * s;
    const double a = w * c / s2;
    // expm1 keeps precision near w = 0; the difference form cannot overflow.
    if (a < 1.0) return std::exp(-(w * w + c * c) / (2.0 * s2)) * std::expm1(a);
    return std::exp(-(w - c) * (w - c) / (2.0 * s2)) - std::exp(-(w * w + c * c) / (2.0 * s2));
}

// Gaussian centre c such that d/dw morlet_shape(w, c, s) vanishes at w = xi.
// The correction term pulls the peak above c, so c <= xi.
double solve_gauss_center(double xi, double s) {
    const double s2 = s * s;
    auto slope_at_xi = [&](double c) {
        return (c - xi) * std::exp(-(xi - c) * (xi - c) / (2.0 * s2)) +
               xi * std::exp(-(c * c + xi * xi) / (2.0 * s2));
    };
    if (!(slope_at_xi(xi) > 0.0)) return xi;  // correction below double precision
    double lo = xi - s;
    while (slope_at_xi(lo) > 0.0) lo -= s;
    double hi = xi;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (slope_at_xi(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

double wrap_signed(double w) {
    w -= std::floor(w);
    return w > 0.5 ? w - 1.0 : w;
}

std::vector<Wavelet> make_layer(int J, int Q) {
    std::vector<Wavelet> layer;
    const double xi_max = max_center_frequency(Q);
    for (int k = 0; k < J * Q; ++k) {
        Wavelet w;
        w.xi = xi_max * std::exp2(-static_cast<double>(k) / Q);
        w.sigma = bandwidth_for(w.xi, Q);
        w.gauss_center = solve_gauss_center(w.xi, w.sigma);
        layer.push_back(std::move(w));
    }
    return layer;
}

// Common gain so that |phi|^2 + gain^2 * sum |psi|^2 <= 1 at every frequency.
double littlewood_paley_gain(const std::vector<Wavelet>& layer, const LowPass& phi, std::size_t N) {
    const std::size_t dense = std::max<std::size_t>(std::size_t{1} << 16, 8 * N);
    std::vector<double> grid;
    grid.reserve(dense + N / 2 + 2);
    for (std::size_t i = 0; i <= dense; ++i) grid.push_back(0.5 * static_cast<double>(i) / static_cast<double>(dense));
    for (std::size_t k = 0; k <= N / 2; ++k) grid.push_back(static_cast<double>(k) / static_cast<double>(N));

    std::vector<double> psi_energy(grid.size(), 0.0);
    double peak = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        for (const auto& w : layer) {
            const double v = morlet_shape(grid[g], w.gauss_center, w.sigma);
            psi_energy[g] += v * v;
        }
        peak = std::max(peak, psi_energy[g]);
    }
    if (peak <= 0.0) return 1.0;
    double gain2 = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (psi_energy[g] <= 1e-12 * peak) continue;
        const double p = phi(grid[g]);
        gain2 = std::min(gain2, (1.0 - p * p) / psi_energy[g]);
    }
    return std::sqrt(gain2) * (1.0 - 1e-12);
}

constexpr double kFlush = 1e-17;

void sample_layer(std::vector<Wavelet>& layer, double gain, std::size_t N) {
    for (auto& w : layer) {
        w.gain = gain;
        w.response.resize(N / 2 + 1);
        double peak = 0.0;
        for (std::size_t k = 0; k <= N / 2; ++k) {
            w.response[k] = w(static_cast<double>(k) / static_cast<double>(N));
            peak = std::max(peak, w.response[k]);
        }
        w.support_begin = N / 2 + 1;
        w.support_end = 0;
        for (std::size_t k = 0; k <= N / 2; ++k) {
            if (w.response[k] < kFlush * peak) {
                w.response[k] = 0.0;
                continue;
            }
            w.support_begin = std::min(w.support_begin, k);
            w.support_end = k + 1;
        }
        if (w.support_end == 0) w.support_begin = 0;
    }
}

}  // namespace

double max_center_frequency(int Q) {
    return std::max(1.0 / (1.0 + std::exp2(3.0 / Q)), 0.35);
}

double bandwidth_for(double xi, int Q) {
    // Neighbouring Gaussians cross at 1/sqrt(2) of their peak.
    const double factor = std::exp2(-1.0 / Q);
    return xi * (1.0 - factor) / (1.0 + factor) / std::sqrt(std::numbers::ln2);
}

double Wavelet::operator()(double frequency) const {
    if (frequency < 0.0 || frequency > 0.5) return 0.0;
    return gain * morlet_shape(frequency, gauss_center, sigma);
}

double LowPass::operator()(double frequency) const {
    const double w = wrap_signed(frequency);
    return std::exp(-w * w / (2.0 * sigma * sigma));
}

void ScatteringConfig::validate() const {
    if (J < 1) throw InvalidConfig("scattering J must be >= 1");
    if (Q1 < 1 || Q2 < 1) throw InvalidConfig("scattering Q1 and Q2 must be >= 1");
    if (l_seq < 2) throw InvalidConfig("l_seq must be >= 2");
    if (J >= 63 || (std::size_t{1} << J) > l_seq)
        throw InvalidScale("2^J = 2^" + std::to_string(J) + " exceeds l_seq = " + std::to_string(l_seq));
    if (averaging() > l_seq) throw InvalidConfig("averaging support T exceeds l_seq");
}

FilterBank::FilterBank(const ScatteringConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t N = cfg_.padded_length();

    lowpass_.sigma = kLowpassSigma0 / static_cast<double>(cfg_.averaging());
    lowpass_.response.resize(N / 2 + 1);
    for (std::size_t k = 0; k <= N / 2; ++k) {
        const double v = lowpass_(static_cast<double>(k) / static_cast<double>(N));
        lowpass_.response[k] = v < kFlush ? 0.0 : v;
        if (lowpass_.response[k] > 0.0) lowpass_.support = k;
    }

    layer1_ = make_layer(cfg_.J, cfg_.Q1);
    layer2_ = make_layer(cfg_.J, cfg_.Q2);
    sample_layer(layer1_, littlewood_paley_gain(layer1_, lowpass_, N), N);
    sample_layer(layer2_, littlewood_paley_gain(layer2_, lowpass_, N), N);

    // Second-order paths only where the layer-2 peak lies below the layer-1 peak.
    children_.assign(layer1_.size(), {});
    paths_.push_back({0, -1, -1});
    for (std::size_t i = 0; i < layer1_.size(); ++i) paths_.push_back({1, static_cast<int>(i), -1});
    for (std::size_t i = 0; i < layer1_.size(); ++i) {
        for (std::size_t j = 0; j < layer2_.size(); ++j) {
            if (layer2_[j].xi < layer1_[i].xi) {
                children_[i].push_back(static_cast<int>(j));
                paths_.push_back({2, static_cast<int>(i), static_cast<int>(j)});
            }
        }
    }

    shifted_lowpass_.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>((k * cfg_.pad_left()) % N) /
                             static_cast<double>(N);
        const std::size_t kk = k <= N / 2 ? k : N - k;
        shifted_lowpass_[k] = lowpass_.response[kk] * Complex(std::cos(phase), std::sin(phase));
    }
}

std::vector<double> FilterBank::center_frequencies() const {
    std::vector<double> out;
    out.reserve(layer1_.size());
    for (const auto& w : layer1_) out.push_back(w.xi);
    return out;
}

FilterBank build_filterbank(const ScatteringConfig& cfg) {
    return FilterBank(cfg);
}

std::vector<double> ScatteringVector::flatten() const {
    std::vector<double> out;
    out.reserve(s0.size() + s1.size() + s2.size());
    out.insert(out.end(), s0.begin(), s0.end());
    out.insert(out.end(), s1.begin(), s1.end());
    out.insert(out.end(), s2.begin(), s2.end());
    return out;
}

std::vector<double> reflect_pad(std::span<const double> x, std::size_t pad_left, std::size_t total) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> out(total);
    if (n == 1) {
        std::fill(out.begin(), out.end(), x[0]);
        return out;
    }
    const std::ptrdiff_t period = 2 * (n - 1);
    for (std::size_t i = 0; i < total; ++i) {
        std::ptrdiff_t t = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad_left);
        t %= period;
        if (t < 0) t += period;
        if (t >= n) t = period - t;
        out[i] = x[static_cast<std::size_t>(t)];
    }
    return out;
}

namespace {

struct Workspace {
    std::vector<double> padded;
    std::vector<Complex> spectrum;      // half spectrum of the padded input
    std::vector<Complex> band;          // full-length product, upper half stays zero
    std::vector<Complex> analytic;      // inverse transform of `band`
    std::vector<double> modulus;
    std::vector<Complex> mod_spectrum;  // half spectrum of a modulus signal
    std::vector<Complex> mod_spectrum2;
    std::vector<Complex> folded;
    std::vector<Complex> folded_time;
    std::vector<Complex> full;
    std::vector<Complex> full_time;

    void prepare(std::size_t N, std::size_t stride) {
        if (padded.size() == N && folded.size() == (N % stride == 0 ? N / stride : 0)) return;
        padded.assign(N, 0.0);
        spectrum.assign(N / 2 + 1, {});
        band.assign(N, {});
        analytic.assign(N, {});
        modulus.assign(N, 0.0);
        mod_spectrum.assign(N / 2 + 1, {});
        mod_spectrum2.assign(N / 2 + 1, {});
        folded.assign(N % stride == 0 ? N / stride : 0, {});
        folded_time.assign(folded.size(), {});
        full.assign(N, {});
        full_time.assign(N, {});
    }
};

Complex full_bin(const std::vector<Complex>& half, std::size_t k, std::size_t N) {
    return k <= N / 2 ? half[k] : std::conj(half[N - k]);
}

// Samples (signal * phi) at pad_left + m*T for m = 0..positions-1, given the
// half spectrum of a real signal.
void average_and_sample(const std::vector<Complex>& half, const FilterBank& bank, Workspace& ws, double* out) {
    const auto& cfg = bank.config();
    const std::size_t N = cfg.padded_length();
    const std::size_t T = cfg.averaging();
    const std::size_t P = cfg.positions();
    const auto& lp = bank.shifted_lowpass();

    const std::size_t K = bank.lowpass().support;
    if (N % T == 0) {
        // Aliasing the shifted spectrum onto N/T bins samples the time signal at stride T.
        const std::size_t M = N / T;
        std::fill(ws.folded.begin(), ws.folded.end(), Complex{});
        for (std::size_t k = 0; k <= K && k <= N / 2; ++k) ws.folded[k % M] += half[k] * lp[k];
        for (std::size_t k = std::max(N - K, N / 2 + 1); k < N; ++k) ws.folded[k % M] += std::conj(half[N - k]) * lp[k];
        dsp::ifft(ws.folded, ws.folded_time);
        const double scale = 1.0 / static_cast<double>(T);
        for (std::size_t m = 0; m < P; ++m) out[m] = ws.folded_time[m].real() * scale;
    } else {
        for (std::size_t k = 0; k < N; ++k) ws.full[k] = full_bin(half, k, N) * lp[k];
        dsp::ifft(ws.full, ws.full_time);
        for (std::size_t m = 0; m < P; ++m) out[m] = ws.full_time[m * T].real();
    }
}

// |inverse FFT of (half spectrum * analytic filter)| into ws.modulus.
void band_modulus(const std::vector<Complex>& half, const Wavelet& filter, Workspace& ws) {
    const std::size_t N = ws.band.size();
    for (std::size_t k = filter.support_begin; k < filter.support_end; ++k) ws.band[k] = half[k] * filter.response[k];
    dsp::ifft(ws.band, ws.analytic);
    std::fill(ws.band.begin() + static_cast<std::ptrdiff_t>(filter.support_begin),
              ws.band.begin() + static_cast<std::ptrdiff_t>(filter.support_end), Complex{});
    for (std::size_t n = 0; n < N; ++n) ws.modulus[n] = std::sqrt(std::norm(ws.analytic[n]));
}

void check_input(std::span<const double> x, const FilterBank& bank) {
    if (x.size() != bank.config().l_seq)
        throw ShapeError("scatter: input length " + std::to_string(x.size()) + " != l_seq " +
                         std::to_string(bank.config().l_seq));
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw NonFiniteSample("", "", i);
}

}  // namespace

ScatteringVector scatter(std::span<const double> x, const FilterBank& bank) {
    check_input(x, bank);
    const auto& cfg = bank.config();
    const std::size_t N = cfg.padded_length();
    const std::size_t P = cfg.positions();

    thread_local Workspace ws;
    ws.prepare(N, cfg.averaging());

    ScatteringVector sv;
    sv.positions = P;
    sv.s0.resize(P);
    sv.s1.resize(bank.layer1().size() * P);
    std::size_t n2 = 0;
    for (const auto& c : bank.children()) n2 += c.size();
    sv.s2.resize(n2 * P);

    ws.padded = reflect_pad(x, cfg.pad_left(), N);
    dsp::rfft(ws.padded, ws.spectrum);
    average_and_sample(ws.spectrum, bank, ws, sv.s0.data());

    std::size_t path2 = 0;
    for (std::size_t i = 0; i < bank.layer1().size(); ++i) {
        band_modulus(ws.spectrum, bank.layer1()[i], ws);
        dsp::rfft(ws.modulus, ws.mod_spectrum);
        average_and_sample(ws.mod_spectrum, bank, ws, sv.s1.data() + i * P);

        for (int j : bank.children()[i]) {
            band_modulus(ws.mod_spectrum, bank.layer2()[static_cast<std::size_t>(j)], ws);
            dsp::rfft(ws.modulus, ws.mod_spectrum2);
            average_and_sample(ws.mod_spectrum2, bank, ws, sv.s2.data() + path2 * P);
            ++path2;
        }
    }

    // Averages of non-negative signals; clamp FFT round-off.
    for (auto& v : sv.s1) v = std::max(v, 0.0);
    for (auto& v : sv.s2) v = std::max(v, 0.0);
    return sv;
}

std::vector<std::vector<double>> scatter_full(std::span<const double> x, const FilterBank& bank) {
    check_input(x, bank);
    const auto& cfg = bank.config();
    const std::size_t N = cfg.padded_length();
    Workspace ws;
    ws.prepare(N, cfg.averaging());

    const auto& phi = bank.lowpass().response;
    auto averaged = [&](const std::vector<Complex>& half) {
        for (std::size_t k = 0; k < N; ++k) ws.full[k] = full_bin(half, k, N) * phi[k <= N / 2 ? k : N - k];
        dsp::ifft(ws.full, ws.full_time);
        std::vector<double> row(N);
        for (std::size_t n = 0; n < N; ++n) row[n] = ws.full_time[n].real();
        return row;
    };

    std::vector<std::vector<double>> rows;
    ws.padded = reflect_pad(x, cfg.pad_left(), N);
    dsp::rfft(ws.padded, ws.spectrum);
    rows.push_back(averaged(ws.spectrum));
    std::vector<std::vector<double>> second;
    for (std::size_t i = 0; i < bank.layer1().size(); ++i) {
        band_modulus(ws.spectrum, bank.layer1()[i], ws);
        dsp::rfft(ws.modulus, ws.mod_spectrum);
        rows.push_back(averaged(ws.mod_spectrum));
        for (int j : bank.children()[i]) {
            band_modulus(ws.mod_spectrum, bank.layer2()[static_cast<std::size_t>(j)], ws);
            dsp::rfft(ws.modulus, ws.mod_spectrum2);
            second.push_back(averaged(ws.mod_spectrum2));
        }
    }
    for (auto& r : second) rows.push_back(std::move(r));
    return rows;
}

std::vector<double> assemble_scattering_vector(const ingest::Segment& segment, const FilterBank& bank) {
    const std::size_t n_ch = static_cast<std::size_t>(segment.acc_data.rows());
    std::vector<double> out;
    out.reserve(n_ch * bank.coefficients_per_channel());
    for (std::size_t c = 0; c < n_ch; ++c) {
        ScatteringVector sv;
        try {
            sv = scatter(segment.acc(c), bank);
        } catch (const NonFiniteSample& e) {
            throw NonFiniteSample(segment.file_id, "acc#" + std::to_string(c),
                                  segment.index * segment.length() + e.index());
        }
        out.insert(out.end(), sv.s0.begin(), sv.s0.end());
        out.insert(out.end(), sv.s1.begin(), sv.s1.end());
        out.insert(out.end(), sv.s2.begin(), sv.s2.end());
    }
    return out;
}

std::vector<int> group_map(const FilterBank& bank, std::size_t n_channels) {
    const std::size_t P = bank.config().positions();
    std::vector<int> groups;
    groups.reserve(n_channels * bank.coefficients_per_channel());
    for (std::size_t c = 0; c < n_channels; ++c)
        for (const auto& path : bank.paths())
            for (std::size_t m = 0; m < P; ++m) groups.push_back(static_cast<int>(c) * 3 + path.order);
    return groups;
}

nlohmann::ordered_json layout_json(const FilterBank& bank, const std::vector<std::string>& channels,
                                   bool with_entries) {
    const auto& cfg = bank.config();
    nlohmann::ordered_json j;
    j["transform"] = "scattering";
    j["J"] = cfg.J;
    j["Q1"] = cfg.Q1;
    j["Q2"] = cfg.Q2;
    j["T"] = cfg.averaging();
    j["l_seq"] = cfg.l_seq;
    j["positions_per_path"] = cfg.positions();
    j["channels"] = channels;
    j["coefficients_per_channel"] = bank.coefficients_per_channel();
    j["total_length"] = bank.coefficients_per_channel() * channels.size();
    nlohmann::ordered_json paths = nlohmann::ordered_json::array();
    for (const auto& p : bank.paths()) {
        nlohmann::ordered_json e;
        e["order"] = p.order;
        e["lambda1"] = p.lambda1;
        e["lambda2"] = p.lambda2;
        e["xi1"] = p.lambda1 >= 0 ? bank.layer1()[static_cast<std::size_t>(p.lambda1)].xi : 0.0;
        e["xi2"] = p.lambda2 >= 0 ? bank.layer2()[static_cast<std::size_t>(p.lambda2)].xi : 0.0;
        paths.push_back(std::move(e));
    }
    j["paths"] = std::move(paths);
    if (with_entries) {
        nlohmann::ordered_json entries = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < channels.size(); ++c)
            for (const auto& p : bank.paths())
                for (std::size_t m = 0; m < cfg.positions(); ++m)
                    entries.push_back({c, p.order, p.lambda1, p.lambda2, m});
        j["entries_columns"] = {"channel", "order", "lambda1", "lambda2", "time"};
        j["entries"] = std::move(entries);
    }
    return j;
}

}  // namespace vsense::scattering
