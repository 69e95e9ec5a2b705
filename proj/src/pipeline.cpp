#include "vsense/pipeline.hpp"

#include "vsense/error.hpp"
#include "vsense/hash.hpp"
#include "vsense/parallel.hpp"
#include "vsense/spectral.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace vsense::pipeline {

using nlohmann::ordered_json;
using ingest::Segment;
using ingest::TimeSeriesFile;

std::string_view to_string(Transform t) {
    return t == Transform::scattering ? "scattering" : "fft";
}

Transform parse_transform(std::string_view s) {
    if (s == "scattering") return Transform::scattering;
    if (s == "fft") return Transform::fft;
    throw InvalidConfig("unknown transform '" + std::string(s) + "' (expected scattering or fft)");
}

Subset parse_subset(std::string_view s) {
    if (s == "test") return Subset::test;
    if (s == "train") return Subset::train;
    if (s == "labeled") return Subset::labeled;
    if (s == "all") return Subset::all;
    throw InvalidConfig("unknown subset '" + std::string(s) + "' (expected test, train, labeled or all)");
}

// ---------------------------------------------------------------------------
// Configuration

scattering::ScatteringConfig RunConfig::scattering_config() const {
    return {J, Q, Q2, T, l_seq};
}

fatigue::WoehlerCurve RunConfig::woehler() const {
    return {wohler_k, wohler_K};
}

void RunConfig::validate() const {
    if (l_seq < 2) throw InvalidConfig("l_seq must be at least 2");
    if (transform == Transform::fft && (l_seq & (l_seq - 1)) != 0)
        throw InvalidConfig("fft features need a power-of-two l_seq, got " + std::to_string(l_seq));
    if (transform == Transform::scattering) scattering_config().validate();
    if (!(theta > 0.0 && theta < 1.0)) throw InvalidConfig("theta must lie in (0, 1)");
    if (!(strain_threshold >= 0.0)) throw InvalidConfig("strain threshold must be non-negative");
    woehler().validate();
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw InvalidConfig("split fraction must lie in (0, 1)");
    if (knn_k < 1) throw InvalidK("knn k must be at least 1");
}

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["transform"] = to_string(c.transform);
    j["J"] = c.J;
    j["Q"] = c.Q;
    j["Q2"] = c.Q2;
    j["T"] = c.T;
    j["l_seq"] = c.l_seq;
    j["theta"] = c.theta;
    j["strain_threshold"] = c.strain_threshold;
    j["wohler_k"] = c.wohler_k;
    j["wohler_K"] = c.wohler_K;
    j["split_fraction"] = c.split_fraction;
    j["stratify_by_rider"] = c.stratify_by_rider;
    j["knn_k"] = c.knn_k;
    j["seed"] = c.seed;
    j["reference_file"] = c.reference_file;
    return j;
}

RunConfig run_config_from_json(const ordered_json& j, RunConfig c) {
    if (!j.is_object()) throw InvalidConfig("run configuration must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "transform") c.transform = parse_transform(v.get<std::string>());
            else if (key == "J") c.J = v.get<int>();
            else if (key == "Q") c.Q = v.get<int>();
            else if (key == "Q2") c.Q2 = v.get<int>();
            else if (key == "T") c.T = v.get<std::size_t>();
            else if (key == "l_seq") c.l_seq = v.get<std::size_t>();
            else if (key == "theta") c.theta = v.get<double>();
            else if (key == "strain_threshold") c.strain_threshold = v.get<double>();
            else if (key == "wohler_k") c.wohler_k = v.get<double>();
            else if (key == "wohler_K") c.wohler_K = v.get<double>();
            else if (key == "split_fraction") c.split_fraction = v.get<double>();
            else if (key == "stratify_by_rider") c.stratify_by_rider = v.get<bool>();
            else if (key == "knn_k") c.knn_k = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "reference_file") c.reference_file = v.get<std::string>();
            else if (key == "workers") c.workers = v.get<std::size_t>();
            else throw InvalidConfig("unknown configuration key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("bad configuration value: ") + e.what());
    }
    return c;
}

std::string config_hash(const RunConfig& cfg) {
    return hex64(fnv1a64(to_json(cfg).dump()));
}

// ---------------------------------------------------------------------------
// Features

FeatureExtractor::FeatureExtractor(const RunConfig& cfg, std::vector<std::string> acc_channels)
    : cfg_(cfg), channels_(std::move(acc_channels)) {
    cfg_.validate();
    if (channels_.empty()) throw MalformedFile("no acceleration channels");
    if (cfg_.transform == Transform::scattering) bank_.emplace(cfg_.scattering_config());
}

std::size_t FeatureExtractor::length() const noexcept {
    return bank_ ? bank_->coefficients_per_channel() * channels_.size()
                 : spectral::bins_per_channel(cfg_.l_seq) * channels_.size();
}

std::vector<double> FeatureExtractor::extract(const Segment& segment) const {
    if (static_cast<std::size_t>(segment.acc_data.rows()) != channels_.size())
        throw ShapeError("segment of '" + segment.file_id + "' has " + std::to_string(segment.acc_data.rows()) +
                         " acceleration channels, expected " + std::to_string(channels_.size()));
    return bank_ ? scattering::assemble_scattering_vector(segment, *bank_) : spectral::assemble_fft_vector(segment);
}

std::vector<int> FeatureExtractor::group_map() const {
    return bank_ ? scattering::group_map(*bank_, channels_.size()) : spectral::group_map(channels_.size(), cfg_.l_seq);
}

ordered_json FeatureExtractor::layout(bool with_entries) const {
    if (bank_) return scattering::layout_json(*bank_, channels_, with_entries);
    ordered_json j;
    j["transform"] = "fft";
    j["window"] = "hamming-symmetric";
    j["l_seq"] = cfg_.l_seq;
    j["channels"] = channels_;
    j["bins_per_channel"] = spectral::bins_per_channel(cfg_.l_seq);
    j["total_length"] = length();
    if (with_entries) {
        auto entries = ordered_json::array();
        for (std::size_t c = 0; c < channels_.size(); ++c)
            for (std::size_t k = 0; k < spectral::bins_per_channel(cfg_.l_seq); ++k)
                entries.push_back({c, k, static_cast<double>(k) / static_cast<double>(cfg_.l_seq)});
        j["entries_columns"] = {"channel", "bin", "frequency"};
        j["entries"] = std::move(entries);
    }
    return j;
}

std::string FeatureExtractor::fingerprint() const {
    return hex64(fnv1a64(layout(false).dump()));
}

// ---------------------------------------------------------------------------
// Bundle serialization

ordered_json to_json(const Bundle& b) {
    ordered_json j;
    j["format"] = "vsense-bundle/1";
    j["config"] = to_json(b.config);
    j["config_hash"] = b.config_hash;
    j["acc_channels"] = b.acc_channels;
    j["layout_fingerprint"] = b.layout_fingerprint;
    j["split"] = ingest::to_json(b.split);
    j["labeled_train"] = b.labeled_train_ids;
    j["reference_file"] = b.reference_file;
    j["strain_channels"] = b.strain_channels;
    j["training_summary"] = b.training_summary;
    j["standardizer"] = reduce::to_json(b.standardizer);
    j["pca"] = reduce::to_json(b.pca);
    auto regs = ordered_json::array();
    for (const auto& r : b.regressors) regs.push_back(models::to_json(r));
    j["regressors"] = std::move(regs);
    ordered_json cls = ordered_json::object();
    for (const auto& [task, m] : b.classifiers) cls[task] = models::to_json(m);
    j["classifiers"] = std::move(cls);
    return j;
}

Bundle bundle_from_json(const ordered_json& j) {
    try {
        if (j.value("format", "") != "vsense-bundle/1") throw IncompatibleArtifact("not a model bundle");
        Bundle b;
        b.config = run_config_from_json(j.at("config"));
        b.config_hash = j.at("config_hash").get<std::string>();
        if (b.config_hash != config_hash(b.config))
            throw IncompatibleArtifact("bundle config hash does not match its configuration");
        b.acc_channels = j.at("acc_channels").get<std::vector<std::string>>();
        b.layout_fingerprint = j.at("layout_fingerprint").get<std::string>();
        b.split = ingest::split_plan_from_json(j.at("split"));
        b.labeled_train_ids = j.at("labeled_train").get<std::vector<std::string>>();
        b.reference_file = j.at("reference_file").get<std::string>();
        b.strain_channels = j.at("strain_channels").get<std::vector<std::string>>();
        b.training_summary = j.at("training_summary");
        b.standardizer = reduce::standardizer_from_json(j.at("standardizer"));
        b.pca = reduce::pca_from_json(j.at("pca"));
        for (const auto& r : j.at("regressors")) b.regressors.push_back(models::quadratic_from_json(r));
        for (const auto& [task, m] : j.at("classifiers").items()) b.classifiers.emplace(task, models::knn_from_json(m));
        if (b.pca.layout_fingerprint != b.layout_fingerprint)
            throw IncompatibleArtifact("PCA model was fitted on a different feature layout");
        if (b.standardizer.features() != static_cast<std::size_t>(b.pca.features()))
            throw IncompatibleArtifact("standardizer and PCA disagree on the feature count");
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw IncompatibleArtifact(std::string("bad bundle: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

std::vector<std::string> acc_names(const TimeSeriesFile& f) {
    std::vector<std::string> out;
    for (const auto& c : f.acc_channels) out.push_back(c.name);
    return out;
}

std::vector<std::string> common_acc_channels(const std::vector<const TimeSeriesFile*>& files) {
    if (files.empty()) throw InsufficientFiles("no input files");
    auto names = acc_names(*files.front());
    for (const auto* f : files)
        if (acc_names(*f) != names)
            throw MalformedFile("file '" + f->file_id + "' has a different acceleration channel set than '" +
                                files.front()->file_id + "'");
    return names;
}

std::vector<const TimeSeriesFile*> sorted_ptrs(const std::vector<TimeSeriesFile>& files) {
    std::vector<const TimeSeriesFile*> out;
    for (const auto& f : files) out.push_back(&f);
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->file_id < b->file_id; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i]->file_id == out[i - 1]->file_id) throw MalformedFile("duplicate file id '" + out[i]->file_id + "'");
    return out;
}

std::vector<Segment> segments_of(const std::vector<const TimeSeriesFile*>& files, std::size_t l_seq,
                                 const std::vector<std::string>& strain) {
    std::vector<Segment> out;
    for (const auto* f : files) {
        auto segs = ingest::segment_file(*f, l_seq, &strain);
        std::move(segs.begin(), segs.end(), std::back_inserter(out));
    }
    return out;
}

// Damage of every (segment, strain channel), row-major.
std::vector<double> damages(const std::vector<Segment>& segs, std::size_t n_channels, const fatigue::WoehlerCurve& w,
                            std::size_t workers) {
    std::vector<double> out(segs.size() * n_channels);
    parallel_for(
        segs.size(),
        [&](std::size_t i) {
            for (std::size_t c = 0; c < n_channels; ++c) out[i * n_channels + c] = fatigue::segment_damage(segs[i].strain(c), w);
        },
        workers);
    return out;
}

std::string task_label(const std::string& task, const ingest::Labels& l) {
    if (task == "underground") return std::string(ingest::to_string(l.underground));
    if (task == "speed") return models::speed_label(l.speed_kmh);
    return l.rider_id;
}

const std::vector<std::string> kTasks{"underground", "speed", "rider"};

ordered_json nullable(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

void check_compatible(const Bundle& b, const FeatureExtractor& fx, const std::vector<std::string>& acc) {
    if (acc != b.acc_channels)
        throw IncompatibleArtifact("acceleration channels differ from the ones the bundle was fitted on");
    if (fx.fingerprint() != b.layout_fingerprint)
        throw IncompatibleArtifact("feature layout fingerprint " + fx.fingerprint() + " does not match bundle " +
                                   b.layout_fingerprint);
}

}  // namespace

reduce::Matrix scores(const Bundle& bundle, const FeatureExtractor& fx, const std::vector<Segment>& segments,
                      std::size_t workers) {
    reduce::Matrix h(static_cast<Eigen::Index>(segments.size()), bundle.pca.axes());
    parallel_for(
        segments.size(),
        [&](std::size_t i) {
            const auto f = fx.extract(segments[i]);
            const reduce::Vector row = Eigen::Map<const reduce::Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
            h.row(static_cast<Eigen::Index>(i)) = reduce::transform(bundle.pca, bundle.standardizer.transform(row)).transpose();
        },
        workers);
    return h;
}

// ---------------------------------------------------------------------------
// Fit

Bundle fit(const RunConfig& cfg, const std::vector<TimeSeriesFile>& files) {
    cfg.validate();
    const auto all = sorted_ptrs(files);
    std::vector<const TimeSeriesFile*> usage, labeled;
    for (const auto* f : all) (f->labels ? labeled : usage).push_back(f);
    if (usage.size() < 2)
        throw InsufficientFiles("fitting needs at least 2 unlabeled rides, got " + std::to_string(usage.size()));

    Bundle b;
    b.config = cfg;
    b.config_hash = config_hash(cfg);
    b.acc_channels = common_acc_channels(all);

    std::vector<ingest::SplitCandidate> cands;
    for (const auto* f : usage) cands.push_back({f->file_id, f->rider_id, ingest::segment_count(f->length(), cfg.l_seq)});
    b.split = ingest::split_files(cands, cfg.split_fraction, cfg.stratify_by_rider, cfg.seed);

    b.reference_file = cfg.reference_file.empty() ? *b.split.train_file_ids.begin() : cfg.reference_file;
    auto ref = std::find_if(all.begin(), all.end(), [&](auto* f) { return f->file_id == b.reference_file; });
    if (ref == all.end()) throw InvalidConfig("reference file '" + b.reference_file + "' is not in the data set");
    if ((*ref)->strain_channels.empty())
        spdlog::warn("reference file '{}' has no strain channels; no damage models will be fitted", b.reference_file);
    b.strain_channels = ingest::screen_strain_channels(**ref, cfg.strain_threshold);

    std::vector<const TimeSeriesFile*> train;
    for (const auto* f : usage)
        if (b.split.in_train(f->file_id)) train.push_back(f);
    const auto segs = segments_of(train, cfg.l_seq, b.strain_channels);
    if (segs.size() < 2)
        throw InsufficientData("training split yields " + std::to_string(segs.size()) + " segments of length " +
                               std::to_string(cfg.l_seq));

    const FeatureExtractor fx(cfg, b.acc_channels);
    b.layout_fingerprint = fx.fingerprint();
    spdlog::info("fit: {} training segments from {} rides, {} features per segment ({})", segs.size(), train.size(),
                 fx.length(), to_string(cfg.transform));

    reduce::Matrix x(static_cast<Eigen::Index>(segs.size()), static_cast<Eigen::Index>(fx.length()));
    parallel_for(
        segs.size(),
        [&](std::size_t i) {
            const auto f = fx.extract(segs[i]);
            x.row(static_cast<Eigen::Index>(i)) =
                Eigen::Map<const reduce::Vector>(f.data(), static_cast<Eigen::Index>(f.size())).transpose();
        },
        cfg.workers);

    b.standardizer = reduce::fit_standardizer(x, fx.group_map());
    x = b.standardizer.transform(x);
    b.pca = reduce::fit_pca(x, cfg.theta);
    b.pca.layout_fingerprint = b.layout_fingerprint;
    const reduce::Matrix h = reduce::transform(b.pca, x);
    x.resize(0, 0);
    spdlog::info("fit: retained {} principal axes, {:.2f}% of the variance", b.pca.axes(),
                 100.0 * b.pca.retained_share());

    const std::size_t n_ch = b.strain_channels.size();
    const auto d = damages(segs, n_ch, cfg.woehler(), cfg.workers);
    ordered_json channel_summary = ordered_json::array();
    for (std::size_t c = 0; c < n_ch; ++c) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < segs.size(); ++i)
            if (d[i * n_ch + c] > 0.0) rows.push_back(static_cast<Eigen::Index>(i));
        reduce::Matrix hs(static_cast<Eigen::Index>(rows.size()), h.cols());
        reduce::Vector y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            hs.row(static_cast<Eigen::Index>(r)) = h.row(rows[r]);
            y[static_cast<Eigen::Index>(r)] = std::log10(d[static_cast<std::size_t>(rows[r]) * n_ch + c]);
        }
        try {
            b.regressors.push_back(models::fit_quadratic(hs, y, b.strain_channels[c]));
        } catch (const InsufficientData& e) {
            throw InsufficientData("strain channel '" + b.strain_channels[c] + "': " + e.what());
        }
        std::optional<double> r2;
        try {
            const reduce::Vector yh = b.regressors.back().predict(hs);
            r2 = models::r2(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                            std::span<const double>(yh.data(), static_cast<std::size_t>(yh.size())));
        } catch (const DataError&) {
        }
        channel_summary.push_back({{"channel", b.strain_channels[c]},
                                   {"segments", segs.size()},
                                   {"zero_damage_segments", segs.size() - rows.size()},
                                   {"train_r2", nullable(r2)}});
    }

    if (!labeled.empty()) {
        bool hinted = std::any_of(labeled.begin(), labeled.end(), [](auto* f) { return !f->partition.empty(); });
        std::set<std::string> ids;
        if (hinted) {
            for (const auto* f : labeled)
                if (f->partition == "train") ids.insert(f->file_id);
        } else if (labeled.size() >= 2) {
            std::vector<ingest::SplitCandidate> lc;
            for (const auto* f : labeled) lc.push_back({f->file_id, f->labels->rider_id, ingest::segment_count(f->length(), cfg.l_seq)});
            ids = ingest::split_files(lc, 0.5, cfg.stratify_by_rider, cfg.seed).train_file_ids;
        }
        b.labeled_train_ids.assign(ids.begin(), ids.end());
        std::vector<const TimeSeriesFile*> ltrain;
        for (const auto* f : labeled)
            if (ids.contains(f->file_id)) ltrain.push_back(f);
        const auto lsegs = segments_of(ltrain, cfg.l_seq, {});
        if (!lsegs.empty()) {
            const auto hl = scores(b, fx, lsegs, cfg.workers);
            for (const auto& task : kTasks) {
                std::vector<std::string> labels;
                for (const auto& s : lsegs) labels.push_back(task_label(task, *s.labels));
                b.classifiers.emplace(task, models::knn_fit(hl, std::move(labels), cfg.knn_k));
            }
            spdlog::info("fit: classifiers trained on {} segments from {} identification rides", lsegs.size(),
                         ltrain.size());
        }
    }

    ordered_json summary;
    summary["training_segments"] = segs.size();
    summary["training_files"] = train.size();
    summary["features"] = fx.length();
    summary["axes"] = b.pca.axes();
    summary["retained_variance_share"] = b.pca.retained_share();
    summary["channels"] = std::move(channel_summary);
    b.training_summary = std::move(summary);
    return b;
}

// ---------------------------------------------------------------------------
// Predict / classify / report

PredictResult predict(const Bundle& bundle, const std::vector<TimeSeriesFile>& files, Subset subset) {
    const auto all = sorted_ptrs(files);
    std::vector<const TimeSeriesFile*> chosen;
    for (const auto* f : all) {
        const bool keep = subset == Subset::all ||
                          (subset == Subset::labeled && f->labels) ||
                          (subset == Subset::test && !f->labels && bundle.split.in_test(f->file_id)) ||
                          (subset == Subset::train && !f->labels && bundle.split.in_train(f->file_id));
        if (keep) chosen.push_back(f);
    }
    if (chosen.empty()) throw InsufficientFiles("no files in the requested subset");
    const auto acc = common_acc_channels(chosen);
    const FeatureExtractor fx(bundle.config, acc);
    check_compatible(bundle, fx, acc);

    const auto segs = segments_of(chosen, bundle.config.l_seq, bundle.strain_channels);
    const std::size_t n_ch = bundle.strain_channels.size();
    const auto h = scores(bundle, fx, segs, bundle.config.workers);
    const auto d = damages(segs, n_ch, bundle.config.woehler(), bundle.config.workers);

    PredictResult res;
    res.predictions.reserve(segs.size() * n_ch);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const reduce::Vector hi = h.row(static_cast<Eigen::Index>(i)).transpose();
        for (std::size_t c = 0; c < n_ch; ++c) {
            Prediction p;
            p.record = {segs[i].file_id, segs[i].index, bundle.strain_channels[c], d[i * n_ch + c]};
            p.lgD_hat = bundle.regressors[c].predict(hi);
            p.D_hat = std::pow(10.0, p.lgD_hat);
            res.predictions.push_back(std::move(p));
        }
    }

    ordered_json channels = ordered_json::array();
    double r2_sum = 0.0;
    int r2_count = 0;
    for (std::size_t c = 0; c < n_ch; ++c) {
        std::vector<double> y, yh, D, Dh;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const auto& p = res.predictions[i * n_ch + c];
            D.push_back(p.record.D);
            Dh.push_back(p.D_hat);
            if (p.record.D > 0.0) {
                y.push_back(p.record.lgD());
                yh.push_back(p.lgD_hat);
            }
        }
        std::optional<double> r2, fds;
        try {
            r2 = models::r2(y, yh);
            r2_sum += *r2;
            ++r2_count;
        } catch (const DataError&) {
        }
        try {
            fds = models::fds_ratio(D, Dh);
        } catch (const DataError&) {
        }
        channels.push_back({{"channel", bundle.strain_channels[c]},
                            {"segments", segs.size()},
                            {"zero_damage_segments", segs.size() - y.size()},
                            {"r2", nullable(r2)},
                            {"fds_ratio", nullable(fds)}});
    }
    static constexpr const char* kSubsetNames[] = {"test", "train", "labeled", "all"};
    ordered_json rep;
    rep["config_hash"] = bundle.config_hash;
    rep["layout_fingerprint"] = bundle.layout_fingerprint;
    rep["subset"] = kSubsetNames[static_cast<int>(subset)];
    rep["files"] = chosen.size();
    rep["segments"] = segs.size();
    rep["axes"] = bundle.pca.axes();
    rep["channels"] = std::move(channels);
    rep["mean_r2"] = r2_count > 0 ? ordered_json(r2_sum / r2_count) : ordered_json(nullptr);
    res.report = std::move(rep);
    return res;
}

std::string predictions_csv(const std::vector<Prediction>& predictions) {
    std::string out = "file_id,segment,channel,D,lgD,D_hat,lgD_hat\n";
    char buf[64];
    auto put = [&](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.append(buf, end);
    };
    for (const auto& p : predictions) {
        out += p.record.file_id + ',' + std::to_string(p.record.segment) + ',' + p.record.channel + ',';
        put(p.record.D);
        out += ',';
        if (p.record.D > 0.0) put(p.record.lgD());
        out += ',';
        put(p.D_hat);
        out += ',';
        put(p.lgD_hat);
        out += '\n';
    }
    return out;
}

ordered_json classify(const Bundle& bundle, const std::vector<TimeSeriesFile>& files) {
    if (bundle.classifiers.empty()) throw InsufficientFiles("bundle has no classifiers (no identification rides at fit time)");
    const auto all = sorted_ptrs(files);
    std::vector<const TimeSeriesFile*> eval;
    for (const auto* f : all)
        if (f->labels && !std::binary_search(bundle.labeled_train_ids.begin(), bundle.labeled_train_ids.end(), f->file_id))
            eval.push_back(f);
    if (eval.empty()) throw InsufficientFiles("no held-out identification rides to classify");
    const auto acc = common_acc_channels(eval);
    const FeatureExtractor fx(bundle.config, acc);
    check_compatible(bundle, fx, acc);

    const auto segs = segments_of(eval, bundle.config.l_seq, {});
    if (segs.empty()) throw InsufficientData("held-out identification rides are shorter than one segment");
    const auto h = scores(bundle, fx, segs, bundle.config.workers);

    ordered_json rep;
    rep["config_hash"] = bundle.config_hash;
    rep["layout_fingerprint"] = bundle.layout_fingerprint;
    rep["files"] = eval.size();
    rep["segments"] = segs.size();
    rep["axes"] = bundle.pca.axes();
    ordered_json tasks = ordered_json::object();
    for (const auto& task : kTasks) {
        auto it = bundle.classifiers.find(task);
        if (it == bundle.classifiers.end()) continue;
        std::vector<std::string> truth, pred(segs.size());
        for (const auto& s : segs) truth.push_back(task_label(task, *s.labels));
        parallel_for(
            segs.size(),
            [&](std::size_t i) {
                pred[i] = models::knn_predict(it->second, reduce::Vector(h.row(static_cast<Eigen::Index>(i)).transpose()));
            },
            bundle.config.workers);
        auto c = models::confusion_and_accuracy(truth, pred, it->second.classes());
        auto j = models::to_json(c);
        j["k"] = it->second.k;
        tasks[task] = std::move(j);
    }
    rep["tasks"] = std::move(tasks);
    return rep;
}

ordered_json report(const Bundle& b) {
    ordered_json rep;
    rep["config"] = to_json(b.config);
    rep["config_hash"] = b.config_hash;
    rep["layout_fingerprint"] = b.layout_fingerprint;
    rep["acc_channels"] = b.acc_channels;
    rep["reference_file"] = b.reference_file;
    rep["strain_channels"] = b.strain_channels;
    rep["split"] = {{"train_files", b.split.train_file_ids.size()},
                    {"test_files", b.split.test_file_ids.size()},
                    {"target_train_fraction", b.split.target_train_fraction}};
    ordered_json ledger = ordered_json::array();
    double cum = 0.0;
    for (Eigen::Index i = 0; i < b.pca.all_variance.size(); ++i) {
        const double share = b.pca.total_variance > 0 ? b.pca.all_variance[i] / b.pca.total_variance : 0.0;
        cum += share;
        ledger.push_back({{"axis", i + 1}, {"share", share}, {"cumulative", cum}, {"retained", i < b.pca.axes()}});
    }
    rep["variance"] = {{"theta", b.pca.theta},
                       {"axes", b.pca.axes()},
                       {"retained_share", b.pca.retained_share()},
                       {"ledger", std::move(ledger)}};
    rep["training_summary"] = b.training_summary;
    return rep;
}

}  // namespace vsense::pipeline
