#include "vsense/synth.hpp"

#include "vsense/error.hpp"
#include "vsense/fft.hpp"
#include "vsense/hash.hpp"
#include "vsense/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <cstdio>
#include <random>

namespace vsense::synth {

using dsp::Complex;

namespace {

// 1 inside [lo, hi], raised-cosine skirts of relative width `taper` outside.
double band_shape(double f, double lo, double hi, double taper) {
    if (f >= lo && f <= hi) return 1.0;
    const double w_lo = taper * lo, w_hi = taper * hi;
    if (f < lo && f > lo - w_lo) return 0.5 * (1.0 + std::cos(std::numbers::pi * (lo - f) / w_lo));
    if (f > hi && f < hi + w_hi) return 0.5 * (1.0 + std::cos(std::numbers::pi * (f - hi) / w_hi));
    return 0.0;
}

struct Condition {
    const RiderSpec* rider;
    const UndergroundSpec* underground;
    double speed_kmh;
};

double speed_ratio(const SynthConfig& cfg, double v) { return v / cfg.reference_speed_kmh; }

// Appends n samples of every channel for one stationary driving condition.
void append_block(const SynthConfig& cfg, const Condition& cond, std::size_t n, std::mt19937_64& rng,
                  std::vector<std::vector<double>>& acc, std::vector<std::vector<double>>& strain) {
    const std::size_t n_acc = cfg.acc_channels.size();
    const double fs = cfg.sample_rate_hz;
    const double sf = std::pow(speed_ratio(cfg, cond.speed_kmh), cfg.speed_frequency_exponent);
    const double amp = cond.underground->rms * std::pow(speed_ratio(cfg, cond.speed_kmh), cfg.speed_amplitude_exponent) *
                       cond.rider->weight_factor;
    const double lo = cond.underground->band_lo_hz * sf;
    const double hi = cond.underground->band_hi_hz * sf;
    const double floor_lo = 12.0, floor_hi = 0.45 * fs;

    std::vector<double> shape(n);
    double power = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(std::min(k, n - k)) * fs / static_cast<double>(n);
        shape[k] = band_shape(f, lo, hi, 0.15) + cfg.floor_fraction * band_shape(f, floor_lo, floor_hi, 0.1);
        power += shape[k] * shape[k];
    }
    power /= static_cast<double>(n);
    const double norm = power > 0.0 ? 1.0 / std::sqrt(power) : 0.0;

    std::normal_distribution<double> gauss(0.0, 1.0);
    const double rho = std::clamp(cfg.channel_correlation, 0.0, 1.0);
    std::vector<double> common(n);
    for (auto& v : common) v = gauss(rng);

    std::vector<Complex> time(n), spec(n), out(n);
    std::vector<std::vector<Complex>> acc_spec(n_acc);
    for (std::size_t c = 0; c < n_acc; ++c) {
        for (std::size_t i = 0; i < n; ++i) time[i] = std::sqrt(rho) * common[i] + std::sqrt(1.0 - rho) * gauss(rng);
        dsp::fft(time, spec);
        const double g = amp * cfg.acc_gains[c] * norm;
        for (std::size_t k = 0; k < n; ++k) spec[k] *= g * shape[k];
        dsp::ifft(spec, out);
        const double offset = cfg.acc_offsets[c] + cfg.offset_weight_gain[c] * (cond.rider->weight_factor - 1.0) +
                              cfg.offset_speed_gain[c] * (speed_ratio(cfg, cond.speed_kmh) - 1.0);
        for (std::size_t i = 0; i < n; ++i) acc[c].push_back(offset + out[i].real());
        acc_spec[c] = spec;
    }

    for (std::size_t s = 0; s < cfg.strain.size(); ++s) {
        const auto& st = cfg.strain[s];
        for (std::size_t k = 0; k < n; ++k) {
            const double f = static_cast<double>(std::min(k, n - k)) * fs / static_cast<double>(n);
            const double b = band_shape(f, st.band_lo_hz, st.band_hi_hz, 0.2);
            Complex acc_mix{};
            for (std::size_t c = 0; c < n_acc; ++c) acc_mix += st.gains[c] * acc_spec[c][k];
            spec[k] = b * acc_mix;
        }
        dsp::ifft(spec, out);
        for (std::size_t i = 0; i < n; ++i) strain[s].push_back(st.offset + out[i].real() + st.noise_floor * gauss(rng));
    }
}

struct FilePlan {
    std::string file_id;
    const RiderSpec* rider = nullptr;
    std::optional<Condition> fixed;  // labeled rides
    std::string partition;
};

ingest::TimeSeriesFile make_file(const SynthConfig& cfg, const FilePlan& plan) {
    std::mt19937_64 rng(cfg.seed ^ fnv1a64(plan.file_id));
    std::vector<std::vector<double>> acc(cfg.acc_channels.size()), strain(cfg.strain.size());

    const auto samples_per_second = static_cast<std::size_t>(std::llround(cfg.sample_rate_hz));
    if (plan.fixed) {
        const auto n = static_cast<std::size_t>(std::llround(cfg.file_seconds * cfg.sample_rate_hz));
        append_block(cfg, *plan.fixed, n, rng, acc, strain);
    } else {
        // Usage ride: random conditions in blocks of whole seconds.
        auto remaining = static_cast<long long>(std::llround(cfg.usage_seconds));
        std::uniform_int_distribution<long long> block_len(std::llround(cfg.block_min_seconds),
                                                           std::llround(cfg.block_max_seconds));
        std::uniform_int_distribution<std::size_t> pick_ug(0, cfg.undergrounds.size() - 1);
        const auto [vmin, vmax] = std::minmax_element(cfg.speeds_kmh.begin(), cfg.speeds_kmh.end());
        std::uniform_real_distribution<double> pick_speed(*vmin, *vmax);
        while (remaining > 0) {
            const long long secs = std::min(remaining, block_len(rng));
            const auto& ug = cfg.undergrounds[pick_ug(rng)];
            const double v = pick_speed(rng);
            append_block(cfg, {plan.rider, &ug, v}, static_cast<std::size_t>(secs) * samples_per_second, rng, acc,
                         strain);
            remaining -= secs;
        }
    }

    ingest::TimeSeriesFile f;
    f.file_id = plan.file_id;
    f.sample_rate_hz = cfg.sample_rate_hz;
    f.rider_id = plan.rider->id;
    f.partition = plan.partition;
    for (std::size_t c = 0; c < acc.size(); ++c) f.acc_channels.push_back({cfg.acc_channels[c], std::move(acc[c])});
    for (std::size_t s = 0; s < strain.size(); ++s) f.strain_channels.push_back({cfg.strain[s].name, std::move(strain[s])});
    if (plan.fixed)
        f.labels = ingest::Labels{plan.rider->id, ingest::parse_underground(plan.fixed->underground->name),
                                  plan.fixed->speed_kmh};
    return f;
}

std::string speed_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

void SynthConfig::validate() const {
    if (riders.empty() || undergrounds.empty() || speeds_kmh.empty())
        throw InvalidConfig("synth: riders, undergrounds and speeds must be non-empty");
    if (!(sample_rate_hz > 0.0)) throw InvalidConfig("synth: sample_rate_hz must be positive");
    if (acc_channels.empty()) throw InvalidConfig("synth: at least one acceleration channel is required");
    if (acc_gains.size() != acc_channels.size() || acc_offsets.size() != acc_channels.size() ||
        offset_weight_gain.size() != acc_channels.size() || offset_speed_gain.size() != acc_channels.size())
        throw InvalidConfig("synth: acceleration gains and offsets need one entry per channel");
    if (!(reference_speed_kmh > 0.0)) throw InvalidConfig("synth: reference speed must be positive");
    if (!(file_seconds > 0.0) || files_per_class < 1) throw InvalidConfig("synth: bad labeled file settings");
    if (usage_rides_per_rider < 0 || (usage_rides_per_rider > 0 && !(usage_seconds > 0.0)))
        throw InvalidConfig("synth: bad usage ride settings");
    if (!(block_min_seconds >= 1.0) || block_max_seconds < block_min_seconds)
        throw InvalidConfig("synth: block length range must satisfy 1 <= min <= max");
    for (double v : speeds_kmh)
        if (!(v > 0.0)) throw InvalidConfig("synth: speeds must be positive");
    const double max_sf =
        std::pow(*std::max_element(speeds_kmh.begin(), speeds_kmh.end()) / reference_speed_kmh, speed_frequency_exponent);
    for (const auto& u : undergrounds) {
        try {
            ingest::parse_underground(u.name);
        } catch (const Error&) {
            throw InvalidConfig("synth: unknown underground '" + u.name + "'");
        }
        if (!(u.band_lo_hz > 0.0 && u.band_hi_hz > u.band_lo_hz && u.band_hi_hz * max_sf * 1.15 < sample_rate_hz / 2))
            throw InvalidConfig("synth: band of '" + u.name + "' must lie inside (0, Nyquist)");
    }
    for (std::size_t a = 0; a < undergrounds.size(); ++a)
        for (std::size_t b = a + 1; b < undergrounds.size(); ++b)
            if (undergrounds[a].name == undergrounds[b].name)
                throw InvalidConfig("synth: duplicate underground '" + undergrounds[a].name + "'");
    bool coupled = false;
    for (const auto& s : strain) {
        if (s.gains.size() != acc_channels.size())
            throw InvalidConfig("synth: strain channel '" + s.name + "' needs one gain per acceleration channel");
        if (!(s.band_lo_hz > 0.0 && s.band_hi_hz > s.band_lo_hz)) throw InvalidConfig("synth: bad strain band");
        for (double g : s.gains) coupled = coupled || g != 0.0;
    }
    if (!coupled) spdlog::warn("synth: no strain channel is coupled to the accelerations");
}

std::vector<ingest::TimeSeriesFile> generate_dataset(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<FilePlan> plans;
    const int train_replicas = (cfg.files_per_class + 1) / 2;
    for (const auto& r : cfg.riders)
        for (const auto& u : cfg.undergrounds)
            for (double v : cfg.speeds_kmh)
                for (int rep = 0; rep < cfg.files_per_class; ++rep) {
                    FilePlan p;
                    p.file_id = "lab_" + r.id + "_" + u.name + "_" + speed_tag(v) + "_" + std::to_string(rep);
                    p.rider = &r;
                    p.fixed = Condition{&r, &u, v};
                    p.partition = rep < train_replicas ? "train" : "test";
                    plans.push_back(std::move(p));
                }
    for (const auto& r : cfg.riders)
        for (int i = 0; i < cfg.usage_rides_per_rider; ++i) {
            char idx[16];
            std::snprintf(idx, sizeof idx, "%02d", i);
            FilePlan p;
            p.file_id = "use_" + r.id + "_" + idx;
            p.rider = &r;
            plans.push_back(std::move(p));
        }
    std::sort(plans.begin(), plans.end(), [](const FilePlan& a, const FilePlan& b) { return a.file_id < b.file_id; });

    std::vector<ingest::TimeSeriesFile> files(plans.size());
    parallel_for(plans.size(), [&](std::size_t i) { files[i] = make_file(cfg, plans[i]); });
    return files;
}

void write_dataset(const std::vector<ingest::TimeSeriesFile>& files, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& f : files) ingest::write_file(f, dir);
}

nlohmann::ordered_json to_json(const SynthConfig& cfg) {
    nlohmann::ordered_json j;
    j["sample_rate_hz"] = cfg.sample_rate_hz;
    j["acc_channels"] = cfg.acc_channels;
    j["acc_gains"] = cfg.acc_gains;
    j["acc_offsets"] = cfg.acc_offsets;
    j["offset_weight_gain"] = cfg.offset_weight_gain;
    j["offset_speed_gain"] = cfg.offset_speed_gain;
    j["channel_correlation"] = cfg.channel_correlation;
    j["floor_fraction"] = cfg.floor_fraction;
    auto riders = nlohmann::ordered_json::array();
    for (const auto& r : cfg.riders) riders.push_back({{"id", r.id}, {"weight_factor", r.weight_factor}});
    j["riders"] = std::move(riders);
    auto ugs = nlohmann::ordered_json::array();
    for (const auto& u : cfg.undergrounds)
        ugs.push_back({{"name", u.name}, {"band_lo_hz", u.band_lo_hz}, {"band_hi_hz", u.band_hi_hz}, {"rms", u.rms}});
    j["undergrounds"] = std::move(ugs);
    j["speeds_kmh"] = cfg.speeds_kmh;
    j["reference_speed_kmh"] = cfg.reference_speed_kmh;
    j["speed_amplitude_exponent"] = cfg.speed_amplitude_exponent;
    j["speed_frequency_exponent"] = cfg.speed_frequency_exponent;
    auto strain = nlohmann::ordered_json::array();
    for (const auto& s : cfg.strain)
        strain.push_back({{"name", s.name},
                          {"offset", s.offset},
                          {"noise_floor", s.noise_floor},
                          {"band_lo_hz", s.band_lo_hz},
                          {"band_hi_hz", s.band_hi_hz},
                          {"gains", s.gains}});
    j["strain"] = std::move(strain);
    j["file_seconds"] = cfg.file_seconds;
    j["files_per_class"] = cfg.files_per_class;
    j["usage_rides_per_rider"] = cfg.usage_rides_per_rider;
    j["usage_seconds"] = cfg.usage_seconds;
    j["block_min_seconds"] = cfg.block_min_seconds;
    j["block_max_seconds"] = cfg.block_max_seconds;
    j["seed"] = cfg.seed;
    return j;
}

SynthConfig synth_config_from_json(const nlohmann::ordered_json& j) {
    SynthConfig cfg;
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
        };
        get("sample_rate_hz", cfg.sample_rate_hz);
        get("acc_channels", cfg.acc_channels);
        get("acc_gains", cfg.acc_gains);
        get("acc_offsets", cfg.acc_offsets);
        get("offset_weight_gain", cfg.offset_weight_gain);
        get("offset_speed_gain", cfg.offset_speed_gain);
        get("channel_correlation", cfg.channel_correlation);
        get("floor_fraction", cfg.floor_fraction);
        if (j.contains("riders")) {
            cfg.riders.clear();
            for (const auto& r : j.at("riders"))
                cfg.riders.push_back({r.at("id").get<std::string>(), r.value("weight_factor", 1.0)});
        }
        if (j.contains("undergrounds")) {
            cfg.undergrounds.clear();
            for (const auto& u : j.at("undergrounds"))
                cfg.undergrounds.push_back({u.at("name").get<std::string>(), u.at("band_lo_hz").get<double>(),
                                            u.at("band_hi_hz").get<double>(), u.value("rms", 1.0)});
        }
        get("speeds_kmh", cfg.speeds_kmh);
        get("reference_speed_kmh", cfg.reference_speed_kmh);
        get("speed_amplitude_exponent", cfg.speed_amplitude_exponent);
        get("speed_frequency_exponent", cfg.speed_frequency_exponent);
        if (j.contains("strain")) {
            cfg.strain.clear();
            for (const auto& s : j.at("strain"))
                cfg.strain.push_back({s.at("name").get<std::string>(), s.value("offset", 0.0), s.value("noise_floor", 0.0),
                                      s.at("band_lo_hz").get<double>(), s.at("band_hi_hz").get<double>(),
                                      s.at("gains").get<std::vector<double>>()});
        }
        get("file_seconds", cfg.file_seconds);
        get("files_per_class", cfg.files_per_class);
        get("usage_rides_per_rider", cfg.usage_rides_per_rider);
        get("usage_seconds", cfg.usage_seconds);
        get("block_min_seconds", cfg.block_min_seconds);
        get("block_max_seconds", cfg.block_max_seconds);
        get("seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("synth config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace vsense::synth
