#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vsense::models {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// 1 + p + p(p+1)/2.
std::size_t quadratic_terms(std::size_t p);

/// [1, h_i, h_i*h_j for i <= j], pairs in row-major upper-triangle order.
Vector quadratic_features(const Vector& h);
Matrix quadratic_design(const Matrix& scores);

struct QuadraticRegressor {
    double intercept = 0.0;
    Vector linear;
    Vector quadratic;  ///< upper triangle (i <= j), row-major
    std::string target_channel;

    std::size_t axes() const noexcept { return static_cast<std::size_t>(linear.size()); }
    Vector coefficients() const;

    double predict(const Vector& scores) const;
    Vector predict(const Matrix& scores) const;
    /// 10^predict, strictly positive.
    double dampred(const Vector& scores) const;
};

/// Least squares on the quadratic feature map, minimum-norm on rank deficiency.
/// Throws InsufficientData unless rows > quadratic_terms(p).
QuadraticRegressor fit_quadratic(const Matrix& scores, const Vector& targets, std::string target_channel = {});

/// 1 - SSE/SST. Throws UndefinedMetric when y is constant.
double r2(std::span<const double> y, std::span<const double> y_star);
/// sum(D*) / sum(D). Throws UndefinedMetric when sum(D) == 0.
double fds_ratio(std::span<const double> D, std::span<const double> D_star);

struct KnnModel {
    Matrix points;
    std::vector<std::string> labels;
    int k = 20;

    /// Sorted distinct training labels.
    std::vector<std::string> classes() const;
};

/// Throws InvalidK unless 1 <= k <= rows.
KnnModel knn_fit(const Matrix& scores, std::vector<std::string> labels, int k = 20);

/// Majority vote among the k nearest (Euclidean) training points. Neighbours are
/// ranked by distance, then label, then coordinates, so the result does not
/// depend on training row order. Vote ties go to the smaller mean distance,
/// then to the lexicographically smaller label.
std::string knn_predict(const KnnModel& model, const Vector& query);
std::vector<std::string> knn_predict(const KnnModel& model, const Matrix& queries);

struct Confusion {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> counts;  ///< [true][predicted]
    double accuracy = 0.0;
};

/// Throws UnknownLabel if either list holds a label outside `label_set`.
Confusion confusion_and_accuracy(std::span<const std::string> truth, std::span<const std::string> predicted,
                                 std::vector<std::string> label_set);

/// Speed bins are categorical; 15.0 -> "15".
std::string speed_label(double kmh);

nlohmann::ordered_json to_json(const QuadraticRegressor& m);
QuadraticRegressor quadratic_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const KnnModel& m);
KnnModel knn_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const Confusion& c);

}  // namespace vsense::models
