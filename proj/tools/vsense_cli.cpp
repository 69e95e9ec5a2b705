#include "vsense/error.hpp"
#include "vsense/ingest.hpp"
#include "vsense/pipeline.hpp"
#include "vsense/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace vsense;

namespace {

ordered_json read_json(const fs::path& path, bool config) {
    std::ifstream in(path);
    if (!in) {
        if (config) throw InvalidConfig("cannot open config file " + path.string());
        throw MalformedFile("cannot open " + path.string());
    }
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        const std::string msg = path.string() + ": " + e.what();
        if (config) throw InvalidConfig(msg);
        throw MalformedFile(msg);
    }
}

void write_text(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InvalidConfig("cannot write " + path);
    out << text;
}

void write_json(const ordered_json& j, const std::string& path) { write_text(j.dump(2) + "\n", path); }

// Flag values, in RunConfig key order.
struct RunFlags {
    std::string transform = "scattering";
    pipeline::RunConfig cfg;
    std::string config_file;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--transform", f.transform, "scattering or fft")->capture_default_str();
    cmd->add_option("--J", f.cfg.J, "largest scattering scale exponent")->capture_default_str();
    cmd->add_option("--Q", f.cfg.Q, "first-layer wavelets per octave")->capture_default_str();
    cmd->add_option("--Q2", f.cfg.Q2, "second-layer wavelets per octave")->capture_default_str();
    cmd->add_option("--T", f.cfg.T, "averaging support in samples, 0 for 2^J")->capture_default_str();
    cmd->add_option("--l-seq", f.cfg.l_seq, "segment length in samples")->capture_default_str();
    cmd->add_option("--theta", f.cfg.theta, "minimum variance share per principal axis")->capture_default_str();
    cmd->add_option("--strain-threshold", f.cfg.strain_threshold, "screening threshold, um/m")->capture_default_str();
    cmd->add_option("--wohler-k", f.cfg.wohler_k, "Woehler slope k")->capture_default_str();
    cmd->add_option("--wohler-K", f.cfg.wohler_K, "Woehler constant K")->capture_default_str();
    cmd->add_option("--split-fraction", f.cfg.split_fraction, "training share of usage segments")->capture_default_str();
    cmd->add_option("--stratify-by-rider", f.cfg.stratify_by_rider, "split per rider")->capture_default_str();
    cmd->add_option("--knn-k", f.cfg.knn_k, "neighbours per vote")->capture_default_str();
    cmd->add_option("--seed", f.cfg.seed, "split seed")->capture_default_str();
    cmd->add_option("--reference-file", f.cfg.reference_file, "file id used for strain screening");
    cmd->add_option("--config", f.config_file, "JSON run config; its keys override flags");
}

pipeline::RunConfig resolve_run_config(RunFlags& f, std::size_t workers) {
    f.cfg.transform = pipeline::parse_transform(f.transform);
    f.cfg.workers = workers;
    if (f.config_file.empty()) return f.cfg;
    ordered_json j = read_json(f.config_file, true);
    if (!j.is_object()) throw InvalidConfig("config file must hold a JSON object");
    j.erase("synth");
    if (j.contains("run")) j = j["run"];
    return pipeline::run_config_from_json(j, f.cfg);
}

std::vector<ingest::TimeSeriesFile> load_data(const std::string& dir) {
    if (!fs::is_directory(dir)) throw MissingMetadata("data directory not found: " + dir);
    auto files = ingest::load_directory(dir);
    spdlog::info("loaded {} files from {}", files.size(), dir);
    return files;
}

pipeline::Bundle load_bundle(const std::string& path) {
    return pipeline::bundle_from_json(read_json(path, false));
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("vsense");
    spdlog::set_default_logger(logger);

    CLI::App app{"Virtual sensing of fatigue damage and maneuvers from acceleration data"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string log_level = "info";
    std::size_t workers = 0;
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();
    app.add_option("--workers", workers, "worker threads, 0 for all cores; never changes results")
        ->capture_default_str();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_out;
    std::string synth_config;
    synth::SynthConfig sc;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--config", synth_config, "JSON file; its \"synth\" section overrides flags");
    synth_cmd->add_option("--seed", sc.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--file-seconds", sc.file_seconds, "length of labeled rides")->capture_default_str();
    synth_cmd->add_option("--files-per-class", sc.files_per_class, "labeled rides per condition")
        ->capture_default_str();
    synth_cmd->add_option("--usage-rides", sc.usage_rides_per_rider, "unlabeled rides per rider")
        ->capture_default_str();
    synth_cmd->add_option("--usage-seconds", sc.usage_seconds, "length of unlabeled rides")->capture_default_str();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit standardizer, PCA, regressors and classifiers");
    RunFlags fit_flags;
    std::string fit_data, fit_out;
    fit_cmd->add_option("--data", fit_data, "corpus directory")->required();
    fit_cmd->add_option("--out", fit_out, "bundle path")->required();
    add_run_flags(fit_cmd, fit_flags);

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "predict damage and evaluate R2 and r_FDS");
    std::string pred_bundle, pred_data, pred_subset = "test", pred_csv, pred_out;
    predict_cmd->add_option("--bundle", pred_bundle, "model bundle")->required();
    predict_cmd->add_option("--data", pred_data, "corpus directory")->required();
    predict_cmd->add_option("--subset", pred_subset, "test, train, labeled or all")->capture_default_str();
    predict_cmd->add_option("--csv", pred_csv, "write per-segment predictions as CSV");
    predict_cmd->add_option("--out", pred_out, "report path, stdout when omitted");

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "confusion matrices for underground, speed and rider");
    std::string cls_bundle, cls_data, cls_out;
    classify_cmd->add_option("--bundle", cls_bundle, "model bundle")->required();
    classify_cmd->add_option("--data", cls_data, "corpus directory with labeled rides")->required();
    classify_cmd->add_option("--out", cls_out, "report path, stdout when omitted");

    // report
    auto* report_cmd = app.add_subcommand("report", "variance ledger and model summary of a bundle");
    std::string rep_bundle, rep_out;
    bool rep_layout = false;
    report_cmd->add_option("--bundle", rep_bundle, "model bundle")->required();
    report_cmd->add_flag("--layout", rep_layout, "include the per-position feature layout table");
    report_cmd->add_option("--out", rep_out, "report path, stdout when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    const auto level = spdlog::level::from_str(log_level);
    if (level == spdlog::level::off && log_level != "off") {
        std::cerr << "error: unknown log level '" << log_level << "'\n";
        return 3;
    }
    spdlog::set_level(level);

    try {
        if (synth_cmd->parsed()) {
            if (!synth_config.empty()) {
                const ordered_json j = read_json(synth_config, true);
                if (j.contains("synth")) sc = synth::synth_config_from_json(j["synth"]);
            }
            sc.validate();
            const auto files = synth::generate_dataset(sc);
            synth::write_dataset(files, synth_out);
            write_json(synth::to_json(sc), (fs::path(synth_out) / "synth_config.json").string());
            spdlog::info("wrote {} files to {}", files.size(), synth_out);
        } else if (fit_cmd->parsed()) {
            const auto cfg = resolve_run_config(fit_flags, workers);
            cfg.validate();
            const auto files = load_data(fit_data);
            const auto bundle = pipeline::fit(cfg, files);
            write_json(pipeline::to_json(bundle), fit_out);
            spdlog::info("bundle written to {} (config {})", fit_out, bundle.config_hash);
        } else if (predict_cmd->parsed()) {
            const auto subset = pipeline::parse_subset(pred_subset);
            auto bundle = load_bundle(pred_bundle);
            bundle.config.workers = workers;
            const auto files = load_data(pred_data);
            const auto result = pipeline::predict(bundle, files, subset);
            if (!pred_csv.empty()) write_text(pipeline::predictions_csv(result.predictions), pred_csv);
            write_json(result.report, pred_out);
        } else if (classify_cmd->parsed()) {
            auto bundle = load_bundle(cls_bundle);
            bundle.config.workers = workers;
            const auto files = load_data(cls_data);
            write_json(pipeline::classify(bundle, files), cls_out);
        } else if (report_cmd->parsed()) {
            const auto bundle = load_bundle(rep_bundle);
            auto rep = pipeline::report(bundle);
            if (rep_layout) {
                const pipeline::FeatureExtractor fx(bundle.config, bundle.acc_channels);
                rep["layout"] = fx.layout(true);
            }
            write_json(rep, rep_out);
        }
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return 3;
    } catch (const DataError& e) {
        spdlog::error("data error: {}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
