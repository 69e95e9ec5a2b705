#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <string>
#include <vector>

namespace vsense::reduce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct GroupStats {
    double mean = 0.0;
    double std = 1.0;
    bool constant = false;  ///< scaled output is 0 for every entry of the group
};

/// Per-group centering and scaling. Statistics are pooled over all training
/// entries of a group (every row, every position mapped to the group).
struct Standardizer {
    std::vector<int> group_map;     ///< feature position -> group id in [0, groups.size())
    std::vector<GroupStats> groups;

    std::size_t features() const noexcept { return group_map.size(); }

    Vector transform(const Vector& row) const;
    Matrix transform(const Matrix& rows) const;
};

/// Throws InsufficientData for fewer than two rows, ShapeError when the group
/// map does not match the column count.
Standardizer fit_standardizer(const Matrix& training, const std::vector<int>& group_map);

struct PcaModel {
    Vector mean;                 ///< feature-wise, in standardized units
    Matrix basis;                ///< features x retained axes, orthonormal columns
    Vector explained_variance;   ///< per retained axis, non-increasing
    double total_variance = 0.0;
    Vector all_variance;         ///< every axis of the decomposition, for the variance ledger
    double theta = 0.0;
    std::string layout_fingerprint;

    Eigen::Index axes() const noexcept { return basis.cols(); }
    Eigen::Index features() const noexcept { return basis.rows(); }
    double retained_share() const;
};

/// SVD of the centred matrix; keeps the leading axes whose variance share is at
/// least theta. Each basis column is signed so its largest-magnitude entry is
/// positive. Throws DegenerateData for rank 0 or when no axis reaches theta.
PcaModel fit_pca(const Matrix& standardized, double theta);

/// Variance share of every axis of the full decomposition, for reporting.
std::vector<double> variance_shares(const Matrix& standardized);

Vector transform(const PcaModel& model, const Vector& row);
Matrix transform(const PcaModel& model, const Matrix& rows);
Vector inverse_transform(const PcaModel& model, const Vector& scores);

nlohmann::ordered_json to_json(const Standardizer& s);
Standardizer standardizer_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const PcaModel& m);
PcaModel pca_from_json(const nlohmann::ordered_json& j);

}  // namespace vsense::reduce
