#include "vsense/error.hpp"
#include "vsense/fatigue.hpp"
#include "vsense/ingest.hpp"
#include "vsense/spectral.hpp"
#include "vsense/synth.hpp"

#include <doctest.h>

#include <filesystem>
#include <map>
#include <numeric>
#include <set>

using namespace vsense;
using synth::SynthConfig;

namespace {

SynthConfig small_config() {
    SynthConfig c;
    c.file_seconds = 4.0;
    c.files_per_class = 2;
    c.usage_rides_per_rider = 1;
    c.usage_seconds = 20.0;
    c.block_min_seconds = 5.0;
    c.block_max_seconds = 10.0;
    return c;
}

// Power-weighted mean frequency bin of the windowed magnitude spectrum.
double centroid(std::span<const double> x) {
    // The static offset would leak into the lowest bins, so remove the mean first.
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> centred(x.begin(), x.end());
    for (auto& v : centred) v -= mean;
    const auto mag = spectral::fft_features(centred);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 1; k < mag.size(); ++k) {
        num += static_cast<double>(k) * mag[k] * mag[k];
        den += mag[k] * mag[k];
    }
    return num / den;
}

bool close(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 5e-7 * std::abs(b[i]) + 1e-300) return false;
    return true;
}

}  // namespace

TEST_CASE("synth config validation") {
    SynthConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    SUBCASE("empty riders") { c.riders.clear(); }
    SUBCASE("empty undergrounds") { c.undergrounds.clear(); }
    SUBCASE("empty speeds") { c.speeds_kmh.clear(); }
    SUBCASE("gain count") { c.acc_gains.pop_back(); }
    SUBCASE("unknown underground") { c.undergrounds[0].name = "gravel"; }
    SUBCASE("band above Nyquist") { c.undergrounds[1].band_hi_hz = 700.0; }
    SUBCASE("strain gain count") { c.strain[0].gains.push_back(1.0); }
    CHECK_THROWS_AS(synth::generate_dataset(c), InvalidConfig);
}

TEST_CASE("synth file counts, labels and determinism") {
    const SynthConfig c = small_config();
    const auto files = synth::generate_dataset(c);
    const std::size_t labeled = c.riders.size() * c.undergrounds.size() * c.speeds_kmh.size() *
                                static_cast<std::size_t>(c.files_per_class);
    REQUIRE(files.size() == labeled + c.riders.size() * static_cast<std::size_t>(c.usage_rides_per_rider));

    std::size_t n_labeled = 0, n_train = 0;
    std::set<std::string> riders;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto& f = files[i];
        CHECK_NOTHROW(ingest::validate(f));
        if (i) CHECK(files[i - 1].file_id < f.file_id);
        CHECK(f.acc_channels.size() == 5);
        CHECK(f.strain_channels.size() == 3);
        if (f.labels) {
            ++n_labeled;
            n_train += f.partition == "train";
            CHECK(f.length() == 4800);
            CHECK(f.labels->rider_id == f.rider_id);
        } else {
            CHECK(f.length() == 24000);
        }
        riders.insert(f.rider_id);
    }
    CHECK(n_labeled == labeled);
    CHECK(n_train == labeled / 2);
    CHECK(riders.size() == 3);

    const auto again = synth::generate_dataset(c);
    for (std::size_t i = 0; i < files.size(); ++i) {
        CHECK(again[i].file_id == files[i].file_id);
        CHECK(again[i].acc_channels[2].samples == files[i].acc_channels[2].samples);
        CHECK(again[i].strain_channels[1].samples == files[i].strain_channels[1].samples);
    }

    SynthConfig other = c;
    other.seed = c.seed + 1;
    const auto changed = synth::generate_dataset(other);
    REQUIRE(changed.size() == files.size());
    CHECK(changed[0].file_id == files[0].file_id);
    CHECK(changed[0].length() == files[0].length());
    CHECK(changed[0].acc_channels[0].samples != files[0].acc_channels[0].samples);
}

TEST_CASE("cobble and even rides differ in spectral centroid") {
    SynthConfig c = small_config();
    c.usage_rides_per_rider = 0;
    c.file_seconds = 4096.0 / 1200.0 + 0.1;
    const auto files = synth::generate_dataset(c);
    std::map<std::string, std::vector<double>> by_class;
    for (const auto& f : files) {
        const auto seg = ingest::segment_file(f, 4096).at(0);
        by_class[std::string(ingest::to_string(f.labels->underground))].push_back(centroid(seg.acc(0)));
    }
    const double cobble_max = *std::max_element(by_class["cobble"].begin(), by_class["cobble"].end());
    const double even_min = *std::min_element(by_class["even"].begin(), by_class["even"].end());
    CHECK(cobble_max < even_min);
}

TEST_CASE("strain damage grows with speed") {
    SynthConfig c = small_config();
    c.usage_rides_per_rider = 0;
    c.file_seconds = 10.0;
    c.files_per_class = 1;
    const auto files = synth::generate_dataset(c);
    const fatigue::WoehlerCurve curve{5.0, 1e7};
    // Mean damage per (underground, speed) over riders.
    std::map<std::pair<std::string, double>, double> damage;
    for (const auto& f : files)
        for (const auto& ch : f.strain_channels)
            if (ch.name == "strain_chainstay")
                damage[{std::string(ingest::to_string(f.labels->underground)), f.labels->speed_kmh}] +=
                    fatigue::segment_damage(ch.samples, curve);
    for (const auto& u : c.undergrounds) {
        CAPTURE(u.name);
        CHECK(damage[{u.name, 10.0}] < damage[{u.name, 15.0}]);
        CHECK(damage[{u.name, 15.0}] < damage[{u.name, 20.0}]);
    }
}

TEST_CASE("synth config JSON and disk round trip") {
    SynthConfig c = small_config();
    c.riders = {{"solo", 1.1}};
    c.speeds_kmh = {12.5};
    c.seed = 9;
    const auto j = synth::to_json(c);
    CHECK(synth::to_json(synth::synth_config_from_json(j)) == j);
    CHECK_THROWS_AS(synth::synth_config_from_json({{"riders", nlohmann::ordered_json::array()}}), InvalidConfig);

    const auto files = synth::generate_dataset(c);
    const auto dir = std::filesystem::temp_directory_path() / "vsense_synth_roundtrip";
    std::filesystem::remove_all(dir);
    synth::write_dataset(files, dir);
    const auto back = ingest::load_directory(dir);
    REQUIRE(back.size() == files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        CHECK(back[i].file_id == files[i].file_id);
        CHECK(back[i].rider_id == files[i].rider_id);
        CHECK(back[i].partition == files[i].partition);
        CHECK(back[i].labels.has_value() == files[i].labels.has_value());
        // Samples are stored with seven significant digits.
        CHECK(close(back[i].acc_channels[4].samples, files[i].acc_channels[4].samples));
        CHECK(close(back[i].strain_channels[0].samples, files[i].strain_channels[0].samples));
    }
    std::filesystem::remove_all(dir);
}
