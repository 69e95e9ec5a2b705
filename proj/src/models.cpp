#include "vsense/models.hpp"

#include "vsense/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace vsense::models {

std::size_t quadratic_terms(std::size_t p) {
    return 1 + p + p * (p + 1) / 2;
}

Vector quadratic_features(const Vector& h) {
    const auto p = static_cast<std::size_t>(h.size());
    Vector f(static_cast<Eigen::Index>(quadratic_terms(p)));
    Eigen::Index c = 0;
    f[c++] = 1.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) f[c++] = h[i];
    for (Eigen::Index i = 0; i < h.size(); ++i)
        for (Eigen::Index j = i; j < h.size(); ++j) f[c++] = h[i] * h[j];
    return f;
}

Matrix quadratic_design(const Matrix& scores) {
    const auto p = static_cast<std::size_t>(scores.cols());
    Matrix x(scores.rows(), static_cast<Eigen::Index>(quadratic_terms(p)));
    for (Eigen::Index r = 0; r < scores.rows(); ++r) x.row(r) = quadratic_features(scores.row(r).transpose()).transpose();
    return x;
}

Vector QuadraticRegressor::coefficients() const {
    Vector c(static_cast<Eigen::Index>(quadratic_terms(axes())));
    c[0] = intercept;
    c.segment(1, linear.size()) = linear;
    c.tail(quadratic.size()) = quadratic;
    return c;
}

double QuadraticRegressor::predict(const Vector& scores) const {
    if (static_cast<std::size_t>(scores.size()) != axes())
        throw ShapeError("quadratic model expects " + std::to_string(axes()) + " scores, got " +
                         std::to_string(scores.size()));
    // Same accumulation order as the batch path so both agree bit for bit.
    return quadratic_features(scores).dot(coefficients());
}

Vector QuadraticRegressor::predict(const Matrix& scores) const {
    if (static_cast<std::size_t>(scores.cols()) != axes())
        throw ShapeError("quadratic model expects " + std::to_string(axes()) + " scores, got " +
                         std::to_string(scores.cols()));
    Vector out(scores.rows());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) out[r] = predict(Vector(scores.row(r).transpose()));
    return out;
}

double QuadraticRegressor::dampred(const Vector& scores) const {
    return std::pow(10.0, predict(scores));
}

QuadraticRegressor fit_quadratic(const Matrix& scores, const Vector& targets, std::string target_channel) {
    if (scores.rows() != targets.size())
        throw ShapeError("score rows and target count differ: " + std::to_string(scores.rows()) + " vs " +
                         std::to_string(targets.size()));
    const auto p = static_cast<std::size_t>(scores.cols());
    const auto terms = quadratic_terms(p);
    if (static_cast<std::size_t>(scores.rows()) <= terms)
        throw InsufficientData("quadratic regression on " + std::to_string(p) + " axes needs more than " +
                               std::to_string(terms) + " rows, got " + std::to_string(scores.rows()));
    const Matrix x = quadratic_design(scores);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(x);
    const Vector beta = cod.solve(targets);

    QuadraticRegressor m;
    m.intercept = beta[0];
    m.linear = beta.segment(1, static_cast<Eigen::Index>(p));
    m.quadratic = beta.tail(static_cast<Eigen::Index>(terms - 1 - p));
    m.target_channel = std::move(target_channel);
    return m;
}

double r2(std::span<const double> y, std::span<const double> y_star) {
    if (y.size() != y_star.size()) throw ShapeError("r2: length mismatch");
    if (y.size() < 2) throw InsufficientData("r2 needs at least 2 values");
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - y_star[i]) * (y[i] - y_star[i]);
        sst += (y[i] - mean) * (y[i] - mean);
    }
    if (!(sst > 0.0)) throw UndefinedMetric("r2 is undefined for constant targets");
    return 1.0 - sse / sst;
}

double fds_ratio(std::span<const double> D, std::span<const double> D_star) {
    if (D.size() != D_star.size()) throw ShapeError("fds_ratio: length mismatch");
    const double num = std::accumulate(D_star.begin(), D_star.end(), 0.0);
    const double den = std::accumulate(D.begin(), D.end(), 0.0);
    if (!(den > 0.0)) throw UndefinedMetric("fds_ratio is undefined when the observed damage sums to 0");
    return num / den;
}

std::vector<std::string> KnnModel::classes() const {
    std::vector<std::string> out(labels);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

KnnModel knn_fit(const Matrix& scores, std::vector<std::string> labels, int k) {
    if (static_cast<std::size_t>(scores.rows()) != labels.size())
        throw ShapeError("knn: " + std::to_string(scores.rows()) + " points but " + std::to_string(labels.size()) +
                         " labels");
    if (k < 1 || k > scores.rows())
        throw InvalidK("knn: k = " + std::to_string(k) + " with " + std::to_string(scores.rows()) +
                       " training points");
    return {scores, std::move(labels), k};
}

std::string knn_predict(const KnnModel& model, const Vector& query) {
    if (query.size() != model.points.cols())
        throw ShapeError("knn expects " + std::to_string(model.points.cols()) + " scores, got " +
                         std::to_string(query.size()));
    const auto n = static_cast<std::size_t>(model.points.rows());
    if (model.k < 1 || static_cast<std::size_t>(model.k) > n) throw InvalidK("knn: k exceeds training size");

    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < query.size(); ++c) {
            const double d = model.points(static_cast<Eigen::Index>(i), c) - query[c];
            s += d * d;
        }
        dist[i] = std::sqrt(s);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto closer = [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        if (model.labels[a] != model.labels[b]) return model.labels[a] < model.labels[b];
        for (Eigen::Index c = 0; c < model.points.cols(); ++c) {
            const double pa = model.points(static_cast<Eigen::Index>(a), c);
            const double pb = model.points(static_cast<Eigen::Index>(b), c);
            if (pa != pb) return pa < pb;
        }
        return false;
    };
    const auto k = static_cast<std::size_t>(model.k);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);

    struct Vote {
        std::size_t count = 0;
        double distance = 0.0;
    };
    std::map<std::string, Vote> votes;
    for (std::size_t i = 0; i < k; ++i) {
        auto& v = votes[model.labels[order[i]]];
        ++v.count;
        v.distance += dist[order[i]];
    }
    const std::string* best = nullptr;
    Vote best_vote;
    for (const auto& [label, v] : votes) {  // map order gives the label tie-break
        if (!best || v.count > best_vote.count ||
            (v.count == best_vote.count &&
             v.distance / static_cast<double>(v.count) < best_vote.distance / static_cast<double>(best_vote.count))) {
            best = &label;
            best_vote = v;
        }
    }
    return *best;
}

std::vector<std::string> knn_predict(const KnnModel& model, const Matrix& queries) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index r = 0; r < queries.rows(); ++r) out.push_back(knn_predict(model, Vector(queries.row(r).transpose())));
    return out;
}

Confusion confusion_and_accuracy(std::span<const std::string> truth, std::span<const std::string> predicted,
                                 std::vector<std::string> label_set) {
    if (truth.size() != predicted.size()) throw ShapeError("confusion: length mismatch");
    std::sort(label_set.begin(), label_set.end());
    label_set.erase(std::unique(label_set.begin(), label_set.end()), label_set.end());
    auto index_of = [&](const std::string& l) {
        auto it = std::lower_bound(label_set.begin(), label_set.end(), l);
        if (it == label_set.end() || *it != l) throw UnknownLabel("label '" + l + "' is not in the task's label set");
        return static_cast<std::size_t>(it - label_set.begin());
    };
    Confusion c;
    c.labels = label_set;
    c.counts.assign(label_set.size(), std::vector<std::size_t>(label_set.size(), 0));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = index_of(truth[i]);
        const auto p = index_of(predicted[i]);
        ++c.counts[t][p];
        hits += t == p;
    }
    c.accuracy = truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
    return c;
}

std::string speed_label(double kmh) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", kmh);
    return buf;
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::ordered_json to_json(const QuadraticRegressor& m) {
    nlohmann::ordered_json j;
    j["target_channel"] = m.target_channel;
    j["intercept"] = m.intercept;
    j["linear"] = to_std(m.linear);
    j["quadratic"] = to_std(m.quadratic);
    return j;
}

QuadraticRegressor quadratic_from_json(const nlohmann::ordered_json& j) {
    try {
        QuadraticRegressor m;
        m.target_channel = j.at("target_channel").get<std::string>();
        m.intercept = j.at("intercept").get<double>();
        m.linear = to_eigen(j.at("linear").get<std::vector<double>>());
        m.quadratic = to_eigen(j.at("quadratic").get<std::vector<double>>());
        if (quadratic_terms(m.axes()) != 1 + static_cast<std::size_t>(m.linear.size() + m.quadratic.size()))
            throw IncompatibleArtifact("quadratic model coefficient count does not match its axis count");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IncompatibleArtifact(std::string("bad regression model: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const KnnModel& m) {
    nlohmann::ordered_json j;
    j["k"] = m.k;
    j["labels"] = m.labels;
    auto pts = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.points.rows(); ++r) pts.push_back(to_std(m.points.row(r).transpose()));
    j["points"] = std::move(pts);
    return j;
}

KnnModel knn_from_json(const nlohmann::ordered_json& j) {
    try {
        const auto labels = j.at("labels").get<std::vector<std::string>>();
        const auto& pts = j.at("points");
        if (pts.size() != labels.size()) throw IncompatibleArtifact("kNN points and labels disagree");
        Matrix points;
        for (std::size_t r = 0; r < pts.size(); ++r) {
            const auto row = pts[r].get<std::vector<double>>();
            if (r == 0) points.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(row.size()));
            if (static_cast<Eigen::Index>(row.size()) != points.cols()) throw IncompatibleArtifact("ragged kNN points");
            points.row(static_cast<Eigen::Index>(r)) = to_eigen(row).transpose();
        }
        return knn_fit(points, labels, j.at("k").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw IncompatibleArtifact(std::string("bad kNN model: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const Confusion& c) {
    nlohmann::ordered_json j;
    j["labels"] = c.labels;
    j["counts"] = c.counts;
    j["accuracy"] = c.accuracy;
    return j;
}

}  // namespace vsense::models
