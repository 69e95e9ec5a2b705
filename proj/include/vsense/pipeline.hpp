#pragma once

#include "vsense/fatigue.hpp"
#include "vsense/ingest.hpp"
#include "vsense/models.hpp"
#include "vsense/reduce.hpp"
#include "vsense/scattering.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

// The virtual-sensing workflow: segment, extract features, standardize, reduce,
// then regress damage and classify maneuvers on the PC scores.
namespace vsense::pipeline {

enum class Transform { scattering, fft };

std::string_view to_string(Transform t);
Transform parse_transform(std::string_view s);

struct RunConfig {
    Transform transform = Transform::scattering;
    int J = 5;
    int Q = 6;
    int Q2 = 1;
    std::size_t T = 0;  ///< 0 means 2^J
    std::size_t l_seq = 4096;
    double theta = 0.002;
    double strain_threshold = 150.0;
    double wohler_k = 5.0;
    double wohler_K = 1e7;
    double split_fraction = 0.777;
    bool stratify_by_rider = true;
    int knn_k = 20;
    std::uint64_t seed = 42;
    /// File whose strain channels decide screening; empty picks the first training file by id.
    std::string reference_file;
    std::size_t workers = 0;  ///< 0 uses every hardware thread; never affects results

    void validate() const;
    scattering::ScatteringConfig scattering_config() const;
    fatigue::WoehlerCurve woehler() const;
};

/// Model-relevant keys only (no worker count), in a fixed order.
nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Keys present in `j` override `base`. Unknown keys raise InvalidConfig.
RunConfig run_config_from_json(const nlohmann::ordered_json& j, RunConfig base = {});
std::string config_hash(const RunConfig& cfg);

/// Feature extraction for one run configuration and acceleration channel set.
class FeatureExtractor {
public:
    FeatureExtractor(const RunConfig& cfg, std::vector<std::string> acc_channels);

    std::size_t length() const noexcept;
    std::vector<double> extract(const ingest::Segment& segment) const;
    std::vector<int> group_map() const;
    nlohmann::ordered_json layout(bool with_entries) const;
    /// Hash of the layout table; bundles refuse features with another fingerprint.
    std::string fingerprint() const;

private:
    RunConfig cfg_;
    std::vector<std::string> channels_;
    std::optional<scattering::FilterBank> bank_;
};

struct Bundle {
    RunConfig config;
    std::string config_hash;
    std::vector<std::string> acc_channels;
    std::string layout_fingerprint;
    ingest::SplitPlan split;                      ///< unlabeled rides
    std::vector<std::string> labeled_train_ids;   ///< identification rides used by the classifiers
    std::string reference_file;
    std::vector<std::string> strain_channels;     ///< retained after screening
    reduce::Standardizer standardizer;
    reduce::PcaModel pca;
    std::vector<models::QuadraticRegressor> regressors;  ///< one per retained strain channel
    std::map<std::string, models::KnnModel> classifiers; ///< task -> model
    nlohmann::ordered_json training_summary;
};

nlohmann::ordered_json to_json(const Bundle& b);
Bundle bundle_from_json(const nlohmann::ordered_json& j);

/// PCA on the training part of the unlabeled rides only; identification rides
/// never enter the standardizer or the PCA.
Bundle fit(const RunConfig& cfg, const std::vector<ingest::TimeSeriesFile>& files);

struct Prediction {
    fatigue::DamageRecord record;
    double lgD_hat = 0.0;
    double D_hat = 0.0;
};

struct PredictResult {
    std::vector<Prediction> predictions;  ///< ordered by (file_id, segment, channel)
    nlohmann::ordered_json report;
};

enum class Subset { test, train, labeled, all };
Subset parse_subset(std::string_view s);

PredictResult predict(const Bundle& bundle, const std::vector<ingest::TimeSeriesFile>& files, Subset subset);
std::string predictions_csv(const std::vector<Prediction>& predictions);

/// Confusion matrices and accuracies for underground, speed and rider on the
/// identification rides not used to train the classifiers.
nlohmann::ordered_json classify(const Bundle& bundle, const std::vector<ingest::TimeSeriesFile>& files);

/// Variance ledger and model summary.
nlohmann::ordered_json report(const Bundle& bundle);

/// Row-per-segment PC scores of the given segments (standardize then project).
reduce::Matrix scores(const Bundle& bundle, const FeatureExtractor& fx, const std::vector<ingest::Segment>& segments,
                      std::size_t workers = 0);

}  // namespace vsense::pipeline
