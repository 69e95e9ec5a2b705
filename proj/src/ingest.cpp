#include "vsense/ingest.hpp"

#include "vsense/error.hpp"
#include "vsense/hash.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace vsense::ingest {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view to_string(Underground u) {
    return u == Underground::even ? "even" : "cobble";
}

Underground parse_underground(std::string_view s) {
    if (s == "even") return Underground::even;
    if (s == "cobble") return Underground::cobble;
    throw MalformedFile("unknown underground '" + std::string(s) + "' (expected even|cobble)");
}

std::size_t TimeSeriesFile::length() const noexcept {
    if (!acc_channels.empty()) return acc_channels.front().samples.size();
    if (!strain_channels.empty()) return strain_channels.front().samples.size();
    return 0;
}

void validate(const TimeSeriesFile& f) {
    if (!(f.sample_rate_hz > 0.0) || !std::isfinite(f.sample_rate_hz))
        throw MalformedFile("file '" + f.file_id + "': sample_rate_hz must be positive");
    if (f.acc_channels.empty()) throw MalformedFile("file '" + f.file_id + "': no acceleration channels");
    const std::size_t n = f.length();
    auto check = [&](const Channel& c) {
        if (c.samples.size() != n)
            throw MalformedFile("file '" + f.file_id + "': channel '" + c.name + "' has " +
                                std::to_string(c.samples.size()) + " samples, expected " + std::to_string(n));
        for (std::size_t i = 0; i < c.samples.size(); ++i)
            if (!std::isfinite(c.samples[i])) throw NonFiniteSample(f.file_id, c.name, i);
    };
    for (const auto& c : f.acc_channels) check(c);
    for (const auto& c : f.strain_channels) check(c);
    if (f.labels && f.labels->rider_id.empty())
        throw MissingMetadata("file '" + f.file_id + "': label record without rider");
}

// ---------------------------------------------------------------------------
// Sidecar metadata

Metadata parse_metadata(const ordered_json& j, std::string_view file_id) {
    const std::string where = file_id.empty() ? std::string("sidecar") : "sidecar of '" + std::string(file_id) + "'";
    if (!j.is_object()) throw MalformedFile(where + ": not a JSON object");

    Metadata meta;
    if (!j.contains("sample_rate_hz")) throw MissingMetadata(where + ": missing 'sample_rate_hz'");
    if (!j["sample_rate_hz"].is_number()) throw MalformedFile(where + ": 'sample_rate_hz' is not a number");
    meta.sample_rate_hz = j["sample_rate_hz"].get<double>();
    if (!(meta.sample_rate_hz > 0.0)) throw MalformedFile(where + ": 'sample_rate_hz' must be positive");

    if (!j.contains("channels")) throw MissingMetadata(where + ": missing 'channels'");
    const auto& ch = j["channels"];
    if (!ch.is_object() || ch.empty()) throw MalformedFile(where + ": 'channels' must be a non-empty object");
    for (const auto& [name, role] : ch.items()) {
        const auto r = role.is_string() ? role.get<std::string>() : std::string();
        if (r == "acc")
            meta.channels.emplace_back(name, ChannelRole::acc);
        else if (r == "strain")
            meta.channels.emplace_back(name, ChannelRole::strain);
        else
            throw MalformedFile(where + ": channel '" + name + "' has unknown role (expected acc|strain)");
    }

    if (j.contains("labels") && !j["labels"].is_null()) {
        const auto& lab = j["labels"];
        if (!lab.is_object()) throw MalformedFile(where + ": 'labels' must be an object");
        for (const char* key : {"rider", "underground", "speed_kmh"})
            if (!lab.contains(key)) throw MissingMetadata(where + ": partial labels, missing '" + key + "'");
        Labels l;
        l.rider_id = lab["rider"].is_string() ? lab["rider"].get<std::string>() : lab["rider"].dump();
        if (!lab["underground"].is_string()) throw MalformedFile(where + ": 'underground' must be a string");
        l.underground = parse_underground(lab["underground"].get<std::string>());
        if (!lab["speed_kmh"].is_number()) throw MalformedFile(where + ": 'speed_kmh' must be a number");
        l.speed_kmh = lab["speed_kmh"].get<double>();
        meta.rider_id = l.rider_id;
        meta.labels = std::move(l);
    }
    if (j.contains("rider") && j["rider"].is_string()) {
        const auto rider = j["rider"].get<std::string>();
        if (meta.labels && rider != meta.labels->rider_id)
            throw MalformedFile(where + ": 'rider' disagrees with labels.rider");
        meta.rider_id = rider;
    }
    if (j.contains("partition") && j["partition"].is_string()) meta.partition = j["partition"].get<std::string>();
    return meta;
}

Metadata read_metadata(const fs::path& meta_path) {
    std::ifstream in(meta_path);
    if (!in) throw MissingMetadata("cannot open sidecar " + meta_path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedFile("sidecar " + meta_path.string() + ": " + e.what());
    }
    return parse_metadata(j, meta_path.stem().stem().string());
}

ordered_json metadata_json(const TimeSeriesFile& f) {
    ordered_json j;
    j["sample_rate_hz"] = f.sample_rate_hz;
    ordered_json ch = ordered_json::object();
    for (const auto& c : f.acc_channels) ch[c.name] = "acc";
    for (const auto& c : f.strain_channels) ch[c.name] = "strain";
    j["channels"] = std::move(ch);
    if (!f.rider_id.empty()) j["rider"] = f.rider_id;
    if (!f.partition.empty()) j["partition"] = f.partition;
    if (f.labels) {
        j["labels"] = {{"rider", f.labels->rider_id},
                       {"underground", std::string(to_string(f.labels->underground))},
                       {"speed_kmh", f.labels->speed_kmh}};
    }
    return j;
}

fs::path sidecar_path(const fs::path& data_path) {
    auto p = data_path;
    p.replace_extension(".meta.json");
    return p;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename Fn>
void for_each_field(std::string_view line, Fn&& fn) {
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        fn(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
}

}  // namespace

TimeSeriesFile parse_csv(std::string_view text, const Metadata& meta, std::string file_id) {
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) {
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            line = trim(text.substr(pos, end - pos));
            pos = end + 1;
            if (!line.empty()) return true;
        }
        return false;
    };

    std::string_view line;
    if (!next_line(line)) throw MalformedFile("file '" + file_id + "': empty file, no header row");

    std::vector<std::string> header;
    for_each_field(line, [&](std::string_view f) { header.emplace_back(f); });

    // Map every declared channel to its CSV column; reject undeclared columns.
    std::map<std::string, std::size_t> column_of;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!column_of.emplace(header[i], i).second)
            throw MalformedFile("file '" + file_id + "': duplicate column '" + header[i] + "'");
    }
    if (header.size() != meta.channels.size())
        throw MalformedFile("file '" + file_id + "': " + std::to_string(header.size()) + " columns but " +
                            std::to_string(meta.channels.size()) + " declared channels");
    std::vector<std::size_t> declared_column;
    for (const auto& [name, role] : meta.channels) {
        auto it = column_of.find(name);
        if (it == column_of.end())
            throw MalformedFile("file '" + file_id + "': declared channel '" + name + "' missing from header");
        declared_column.push_back(it->second);
    }

    std::vector<std::vector<double>> columns(header.size());
    std::size_t row = 0;
    while (next_line(line)) {
        std::size_t col = 0;
        for_each_field(line, [&](std::string_view field) {
            if (col >= columns.size()) {
                ++col;
                return;
            }
            double v = 0.0;
            const auto* first = field.data();
            if (!field.empty() && field.front() == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), v);
            if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
                throw MalformedFile("file '" + file_id + "': unparsable value '" + std::string(field) +
                                    "' at data row " + std::to_string(row));
            if (!std::isfinite(v)) throw NonFiniteSample(file_id, header[col], row);
            columns[col].push_back(v);
            ++col;
        });
        if (col != columns.size())
            throw MalformedFile("file '" + file_id + "': data row " + std::to_string(row) + " has " +
                                std::to_string(col) + " fields, expected " + std::to_string(columns.size()));
        ++row;
    }
    if (row == 0) throw MalformedFile("file '" + file_id + "': empty data section");

    TimeSeriesFile f;
    f.file_id = std::move(file_id);
    f.sample_rate_hz = meta.sample_rate_hz;
    f.labels = meta.labels;
    f.rider_id = meta.rider_id;
    f.partition = meta.partition;
    for (std::size_t i = 0; i < meta.channels.size(); ++i) {
        const auto& [name, role] = meta.channels[i];
        Channel c{name, std::move(columns[declared_column[i]])};
        (role == ChannelRole::acc ? f.acc_channels : f.strain_channels).push_back(std::move(c));
    }
    validate(f);
    return f;
}

TimeSeriesFile load_file(const fs::path& data_path, const Metadata& meta) {
    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw MalformedFile("cannot open data file " + data_path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), meta, data_path.stem().string());
}

TimeSeriesFile load_file(const fs::path& data_path) {
    return load_file(data_path, read_metadata(sidecar_path(data_path)));
}

std::vector<TimeSeriesFile> load_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw MalformedFile("not a directory: " + dir.string());
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<TimeSeriesFile> files;
    files.reserve(paths.size());
    for (const auto& p : paths) {
        try {
            files.push_back(load_file(p));
        } catch (const MissingMetadata& e) {
            throw MissingMetadata(p.string() + ": " + e.what());
        } catch (const MalformedFile& e) {
            throw MalformedFile(p.string() + ": " + e.what());
        }
    }
    return files;
}

std::string format_csv(const TimeSeriesFile& f) {
    std::vector<const Channel*> cols;
    for (const auto& c : f.acc_channels) cols.push_back(&c);
    for (const auto& c : f.strain_channels) cols.push_back(&c);

    std::string out;
    out.reserve(f.length() * cols.size() * 12 + 64);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += cols[i]->name;
    }
    out += '\n';
    char buf[32];
    for (std::size_t r = 0; r < f.length(); ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out += ',';
            const auto res = std::to_chars(buf, buf + sizeof buf, cols[i]->samples[r], std::chars_format::general, 7);
            out.append(buf, res.ptr);
        }
        out += '\n';
    }
    return out;
}

void write_file(const TimeSeriesFile& f, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / (f.file_id + ".csv"), std::ios::binary);
        out << format_csv(f);
        if (!out) throw MalformedFile("failed to write " + (dir / (f.file_id + ".csv")).string());
    }
    std::ofstream meta(dir / (f.file_id + ".meta.json"), std::ios::binary);
    meta << metadata_json(f).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Segmentation and screening

std::size_t segment_count(std::size_t length, std::size_t l_seq) {
    return l_seq == 0 ? 0 : length / l_seq;
}

std::vector<Segment> segment_file(const TimeSeriesFile& f, std::size_t l_seq,
                                  const std::vector<std::string>* strain_keep) {
    if (l_seq < 2) throw InvalidConfig("l_seq must be at least 2");

    std::vector<const Channel*> strain;
    if (strain_keep) {
        for (const auto& name : *strain_keep) {
            auto it = std::find_if(f.strain_channels.begin(), f.strain_channels.end(),
                                   [&](const Channel& c) { return c.name == name; });
            if (it == f.strain_channels.end())
                throw MalformedFile("file '" + f.file_id + "': strain channel '" + name + "' not present");
            strain.push_back(&*it);
        }
    } else {
        for (const auto& c : f.strain_channels) strain.push_back(&c);
    }

    const auto n_seg = segment_count(f.length(), l_seq);
    const auto n_acc = static_cast<Eigen::Index>(f.acc_channels.size());
    const auto n_str = static_cast<Eigen::Index>(strain.size());
    const auto len = static_cast<Eigen::Index>(l_seq);

    std::vector<Segment> out;
    out.reserve(n_seg);
    for (std::size_t s = 0; s < n_seg; ++s) {
        Segment seg;
        seg.file_id = f.file_id;
        seg.index = s;
        seg.labels = f.labels;
        seg.acc_data.resize(n_acc, len);
        seg.strain_data.resize(n_str, len);
        const auto offset = static_cast<std::ptrdiff_t>(s * l_seq);
        for (Eigen::Index c = 0; c < n_acc; ++c)
            std::copy_n(f.acc_channels[static_cast<std::size_t>(c)].samples.begin() + offset, l_seq,
                        seg.acc_data.row(c).data());
        for (Eigen::Index c = 0; c < n_str; ++c)
            std::copy_n(strain[static_cast<std::size_t>(c)]->samples.begin() + offset, l_seq,
                        seg.strain_data.row(c).data());
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<std::string> screen_strain_channels(const TimeSeriesFile& reference, double threshold) {
    std::vector<std::string> kept;
    for (const auto& c : reference.strain_channels) {
        if (c.samples.empty()) continue;
        double sum = 0.0;
        for (double v : c.samples) sum += std::abs(v);
        const double mean_abs = sum / static_cast<double>(c.samples.size());
        if (mean_abs >= threshold) kept.push_back(c.name);
    }
    if (kept.empty())
        spdlog::warn("strain screening on '{}' with threshold {} retained no channels", reference.file_id,
                     threshold);
    else
        spdlog::info("strain screening on '{}' retained {} of {} channels", reference.file_id, kept.size(),
                     reference.strain_channels.size());
    return kept;
}

// ---------------------------------------------------------------------------
// Train/test split

ordered_json to_json(const SplitPlan& plan) {
    ordered_json j;
    j["target_train_fraction"] = plan.target_train_fraction;
    j["train"] = std::vector<std::string>(plan.train_file_ids.begin(), plan.train_file_ids.end());
    j["test"] = std::vector<std::string>(plan.test_file_ids.begin(), plan.test_file_ids.end());
    return j;
}

SplitPlan split_plan_from_json(const ordered_json& j) {
    SplitPlan plan;
    plan.target_train_fraction = j.at("target_train_fraction").get<double>();
    for (const auto& id : j.at("train")) plan.train_file_ids.insert(id.get<std::string>());
    for (const auto& id : j.at("test")) plan.test_file_ids.insert(id.get<std::string>());
    return plan;
}

namespace {

/// Subset of `counts` whose sum is closest to `target`; ties prefer the smaller sum.
/// With `proper`, the empty and the full subset are excluded.
std::vector<bool> closest_subset(const std::vector<std::size_t>& counts, double target, bool proper) {
    const std::size_t n = counts.size();
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    // reach[i][s]: some subset of the first i items sums to s.
    std::vector<std::vector<char>> reach(n + 1, std::vector<char>(total + 1, 0));
    reach[0][0] = 1;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s <= total; ++s) {
            if (!reach[i][s]) continue;
            reach[i + 1][s] = 1;
            reach[i + 1][s + counts[i]] = 1;
        }
    }
    const std::size_t lo = proper ? 1 : 0;
    const std::size_t hi = proper ? total - 1 : total;
    std::size_t best = lo;
    double best_dev = std::numeric_limits<double>::infinity();
    for (std::size_t s = lo; s <= hi && s <= total; ++s) {
        if (!reach[n][s]) continue;
        const double dev = std::abs(static_cast<double>(s) - target);
        if (dev < best_dev) {
            best_dev = dev;
            best = s;
        }
    }
    std::vector<bool> take(n, false);
    std::size_t s = best;
    for (std::size_t i = n; i-- > 0;) {
        if (reach[i][s]) continue;  // reachable without item i
        take[i] = true;
        s -= counts[i];
    }
    return take;
}

}  // namespace

SplitPlan split_files(std::span<const SplitCandidate> files, double target_fraction, bool stratify_by_rider,
                      std::uint64_t rng_seed) {
    if (files.size() < 2) throw InsufficientFiles("a train/test split needs at least 2 files");
    if (!(target_fraction > 0.0 && target_fraction < 1.0))
        throw InvalidConfig("split fraction must lie in (0, 1)");

    SplitPlan plan;
    plan.target_train_fraction = target_fraction;

    std::map<std::string, std::vector<const SplitCandidate*>> groups;
    for (const auto& f : files) groups[stratify_by_rider ? f.rider_id : std::string()].push_back(&f);

    for (auto& [key, members] : groups) {
        std::sort(members.begin(), members.end(),
                  [](const auto* a, const auto* b) { return a->file_id < b->file_id; });
        std::mt19937_64 rng(rng_seed ^ fnv1a64(key));
        std::shuffle(members.begin(), members.end(), rng);

        std::vector<const SplitCandidate*> positive;
        for (const auto* m : members) {
            if (m->n_segments > 0)
                positive.push_back(m);
            else
                plan.train_file_ids.insert(m->file_id);
        }
        if (positive.empty()) continue;
        std::vector<std::size_t> counts;
        for (const auto* m : positive) counts.push_back(m->n_segments);
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        // Without stratification both sides must be populated; per rider a group may go one way.
        const bool proper = !stratify_by_rider && positive.size() >= 2;
        const auto take = closest_subset(counts, target_fraction * total, proper);
        for (std::size_t i = 0; i < positive.size(); ++i)
            (take[i] ? plan.train_file_ids : plan.test_file_ids).insert(positive[i]->file_id);
    }

    // Per-rider optima can leave a side empty overall; move the file whose move
    // costs the least deviation from the target.
    if (plan.train_file_ids.empty() || plan.test_file_ids.empty()) {
        const bool need_test = plan.test_file_ids.empty();
        const auto& from = need_test ? plan.train_file_ids : plan.test_file_ids;
        std::map<std::string, double> group_total;
        for (const auto& f : files) group_total[stratify_by_rider ? f.rider_id : std::string()] += f.n_segments;
        const SplitCandidate* pick = nullptr;
        double pick_cost = std::numeric_limits<double>::infinity();
        for (const auto& f : files) {
            if (!from.contains(f.file_id)) continue;
            const double g = group_total[stratify_by_rider ? f.rider_id : std::string()];
            const double cost = g > 0 ? static_cast<double>(f.n_segments) / g : 0.0;
            if (cost < pick_cost || (cost == pick_cost && pick && f.file_id < pick->file_id)) {
                pick = &f;
                pick_cost = cost;
            }
        }
        if (need_test) {
            plan.train_file_ids.erase(pick->file_id);
            plan.test_file_ids.insert(pick->file_id);
        } else {
            plan.test_file_ids.erase(pick->file_id);
            plan.train_file_ids.insert(pick->file_id);
        }
    }
    return plan;
}

SplitPlan split_files(std::span<const TimeSeriesFile> files, std::size_t l_seq, double target_fraction,
                      bool stratify_by_rider, std::uint64_t rng_seed) {
    std::vector<SplitCandidate> c;
    c.reserve(files.size());
    for (const auto& f : files) c.push_back({f.file_id, f.rider_id, segment_count(f.length(), l_seq)});
    return split_files(c, target_fraction, stratify_by_rider, rng_seed);
}

}  // namespace vsense::ingest
