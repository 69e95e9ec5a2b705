#include "vsense/reduce.hpp"

#include "vsense/error.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace vsense::reduce {

namespace {

void check_row(const PcaModel& m, Eigen::Index n, const char* what) {
    if (n != m.features())
        throw ShapeError(std::string(what) + ": expected " + std::to_string(m.features()) + " features, got " +
                         std::to_string(n));
}

struct Decomposition {
    Vector mean;
    Vector variance;   // s^2 / (n - 1), non-increasing
    double total = 0.0;
    // Right singular vectors, either directly or as Q * left singular vectors of R
    // when the centred matrix was factored through the QR of its transpose.
    Matrix v;
    Eigen::HouseholderQR<Matrix> qr;
    Matrix r_left;
    bool via_qr = false;

    Matrix leading_axes(Eigen::Index k) const {
        if (!via_qr) return v.leftCols(k);
        Matrix padded = Matrix::Zero(qr.rows(), k);
        padded.topRows(r_left.rows()) = r_left.leftCols(k);
        return qr.householderQ() * padded;
    }
};

Decomposition decompose(const Matrix& x) {
    if (x.rows() < 2) throw InsufficientData("PCA needs at least 2 rows, got " + std::to_string(x.rows()));
    if (x.cols() < 1) throw ShapeError("PCA needs at least one feature");
    Decomposition d;
    d.mean = x.colwise().mean().transpose();
    const double dof = static_cast<double>(x.rows() - 1);
    Vector s;
    if (x.cols() > x.rows()) {
        // Wide matrix: X^T = Q R, so X = R^T Q^T and the SVD of the small
        // square R gives the right singular vectors of X as Q times R's left ones.
        d.qr.compute((x.rowwise() - d.mean.transpose()).transpose());
        const Matrix r = d.qr.matrixQR().topRows(x.rows()).triangularView<Eigen::Upper>();
        d.total = r.squaredNorm() / dof;
        Eigen::BDCSVD<Matrix> svd(r, Eigen::ComputeThinU);
        s = svd.singularValues();
        d.r_left = svd.matrixU();
        d.via_qr = true;
    } else {
        const Matrix centred = x.rowwise() - d.mean.transpose();
        d.total = centred.squaredNorm() / dof;
        Eigen::BDCSVD<Matrix> svd(centred, Eigen::ComputeThinV);
        s = svd.singularValues();
        d.v = svd.matrixV();
    }
    d.variance = s.array().square() / dof;
    return d;
}

}  // namespace

Vector Standardizer::transform(const Vector& row) const {
    if (static_cast<std::size_t>(row.size()) != features())
        throw ShapeError("standardizer: expected " + std::to_string(features()) + " features, got " +
                         std::to_string(row.size()));
    Vector out(row.size());
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        const auto& g = groups[static_cast<std::size_t>(group_map[static_cast<std::size_t>(i)])];
        out[i] = g.constant ? 0.0 : (row[i] - g.mean) / g.std;
    }
    return out;
}

Matrix Standardizer::transform(const Matrix& rows) const {
    if (static_cast<std::size_t>(rows.cols()) != features())
        throw ShapeError("standardizer: expected " + std::to_string(features()) + " features, got " +
                         std::to_string(rows.cols()));
    Matrix out(rows.rows(), rows.cols());
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        const auto& g = groups[static_cast<std::size_t>(group_map[static_cast<std::size_t>(c)])];
        if (g.constant)
            out.col(c).setZero();
        else
            out.col(c) = (rows.col(c).array() - g.mean) / g.std;
    }
    return out;
}

Standardizer fit_standardizer(const Matrix& training, const std::vector<int>& group_map) {
    if (training.rows() < 2)
        throw InsufficientData("standardizer needs at least 2 rows, got " + std::to_string(training.rows()));
    if (group_map.size() != static_cast<std::size_t>(training.cols()))
        throw ShapeError("group map has " + std::to_string(group_map.size()) + " entries for " +
                         std::to_string(training.cols()) + " features");
    int n_groups = 0;
    for (int g : group_map) {
        if (g < 0) throw ShapeError("negative group id");
        n_groups = std::max(n_groups, g + 1);
    }

    std::vector<double> sum(static_cast<std::size_t>(n_groups), 0.0);
    std::vector<double> count(static_cast<std::size_t>(n_groups), 0.0);
    for (Eigen::Index c = 0; c < training.cols(); ++c) {
        const auto g = static_cast<std::size_t>(group_map[static_cast<std::size_t>(c)]);
        sum[g] += training.col(c).sum();
        count[g] += static_cast<double>(training.rows());
    }
    Standardizer s;
    s.group_map = group_map;
    s.groups.resize(static_cast<std::size_t>(n_groups));
    for (std::size_t g = 0; g < s.groups.size(); ++g) s.groups[g].mean = count[g] > 0 ? sum[g] / count[g] : 0.0;

    std::vector<double> ss(static_cast<std::size_t>(n_groups), 0.0);
    for (Eigen::Index c = 0; c < training.cols(); ++c) {
        const auto g = static_cast<std::size_t>(group_map[static_cast<std::size_t>(c)]);
        ss[g] += (training.col(c).array() - s.groups[g].mean).square().sum();
    }
    for (std::size_t g = 0; g < s.groups.size(); ++g) {
        auto& st = s.groups[g];
        st.std = count[g] > 0 ? std::sqrt(ss[g] / count[g]) : 0.0;
        st.constant = !(st.std > 1e-12 * std::max(1.0, std::abs(st.mean)));
        if (st.constant) st.std = 1.0;
    }
    return s;
}

double PcaModel::retained_share() const {
    return total_variance > 0.0 ? explained_variance.sum() / total_variance : 0.0;
}

PcaModel fit_pca(const Matrix& standardized, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw InvalidConfig("theta must lie in (0, 1)");
    const Decomposition d = decompose(standardized);
    if (!(d.total > 0.0) || d.variance.size() == 0 || !(d.variance[0] > 0.0))
        throw DegenerateData("PCA input has rank 0");

    Eigen::Index keep = 0;
    while (keep < d.variance.size() && d.variance[keep] / d.total >= theta) ++keep;
    if (keep == 0) throw DegenerateData("no principal axis reaches the variance threshold");

    PcaModel m;
    m.mean = d.mean;
    m.basis = d.leading_axes(keep);
    m.explained_variance = d.variance.head(keep);
    m.total_variance = d.total;
    m.all_variance = d.variance;
    m.theta = theta;
    for (Eigen::Index c = 0; c < keep; ++c) {
        Eigen::Index arg = 0;
        m.basis.col(c).cwiseAbs().maxCoeff(&arg);
        if (m.basis(arg, c) < 0.0) m.basis.col(c) *= -1.0;
    }
    return m;
}

std::vector<double> variance_shares(const Matrix& standardized) {
    const Decomposition d = decompose(standardized);
    std::vector<double> out;
    for (Eigen::Index i = 0; i < d.variance.size(); ++i) out.push_back(d.total > 0 ? d.variance[i] / d.total : 0.0);
    return out;
}

Vector transform(const PcaModel& model, const Vector& row) {
    check_row(model, row.size(), "transform");
    return model.basis.transpose() * (row - model.mean);
}

Matrix transform(const PcaModel& model, const Matrix& rows) {
    check_row(model, rows.cols(), "transform");
    return (rows.rowwise() - model.mean.transpose()) * model.basis;
}

Vector inverse_transform(const PcaModel& model, const Vector& scores) {
    if (scores.size() != model.axes())
        throw ShapeError("inverse_transform: expected " + std::to_string(model.axes()) + " scores, got " +
                         std::to_string(scores.size()));
    return model.mean + model.basis * scores;
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::ordered_json to_json(const Standardizer& s) {
    nlohmann::ordered_json j;
    j["group_map"] = s.group_map;
    auto groups = nlohmann::ordered_json::array();
    for (const auto& g : s.groups) groups.push_back({{"mean", g.mean}, {"std", g.std}, {"constant", g.constant}});
    j["groups"] = std::move(groups);
    return j;
}

Standardizer standardizer_from_json(const nlohmann::ordered_json& j) {
    try {
        Standardizer s;
        s.group_map = j.at("group_map").get<std::vector<int>>();
        for (const auto& g : j.at("groups"))
            s.groups.push_back({g.at("mean").get<double>(), g.at("std").get<double>(), g.at("constant").get<bool>()});
        for (int g : s.group_map)
            if (g < 0 || static_cast<std::size_t>(g) >= s.groups.size())
                throw IncompatibleArtifact("standardizer group id out of range");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw IncompatibleArtifact(std::string("bad standardizer: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const PcaModel& m) {
    nlohmann::ordered_json j;
    j["theta"] = m.theta;
    j["layout_fingerprint"] = m.layout_fingerprint;
    j["total_variance"] = m.total_variance;
    j["explained_variance"] = to_std(m.explained_variance);
    j["all_variance"] = to_std(m.all_variance);
    j["mean"] = to_std(m.mean);
    auto basis = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.basis.rows(); ++r) {
        const Vector row = m.basis.row(r).transpose();
        basis.push_back(to_std(row));
    }
    j["basis"] = std::move(basis);
    return j;
}

PcaModel pca_from_json(const nlohmann::ordered_json& j) {
    try {
        PcaModel m;
        m.theta = j.at("theta").get<double>();
        m.layout_fingerprint = j.at("layout_fingerprint").get<std::string>();
        m.total_variance = j.at("total_variance").get<double>();
        m.explained_variance = to_eigen(j.at("explained_variance").get<std::vector<double>>());
        m.all_variance = to_eigen(j.at("all_variance").get<std::vector<double>>());
        m.mean = to_eigen(j.at("mean").get<std::vector<double>>());
        const auto& basis = j.at("basis");
        const auto axes = m.explained_variance.size();
        m.basis.resize(static_cast<Eigen::Index>(basis.size()), axes);
        for (std::size_t r = 0; r < basis.size(); ++r) {
            const auto row = basis[r].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(row.size()) != axes) throw IncompatibleArtifact("ragged PCA basis");
            for (Eigen::Index c = 0; c < axes; ++c) m.basis(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
        }
        if (m.basis.rows() != m.mean.size()) throw IncompatibleArtifact("PCA basis and mean disagree");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IncompatibleArtifact(std::string("bad PCA model: ") + e.what());
    }
}

}  // namespace vsense::reduce
