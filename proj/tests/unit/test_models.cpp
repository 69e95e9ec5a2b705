#include "../support/gen.hpp"
#include "../support/oracles.hpp"

#include "vsense/error.hpp"
#include "vsense/models.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

using namespace vsense;
using namespace vsense::models;

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Exhaustive kNN: sort every training point by (distance, label, coordinates),
// count labels among the first k, break vote ties by mean distance then label.
std::string knn_oracle(const Matrix& pts, const std::vector<std::string>& labels, int k, const Vector& q) {
    std::vector<std::tuple<double, std::string, std::vector<double>>> all;
    for (Eigen::Index r = 0; r < pts.rows(); ++r) {
        const Vector row = pts.row(r).transpose();
        all.emplace_back((row - q).norm(), labels[static_cast<std::size_t>(r)], to_std(row));
    }
    std::sort(all.begin(), all.end());
    std::map<std::string, std::pair<int, double>> votes;
    for (int i = 0; i < k; ++i) {
        auto& v = votes[std::get<1>(all[static_cast<std::size_t>(i)])];
        v.first += 1;
        v.second += std::get<0>(all[static_cast<std::size_t>(i)]);
    }
    std::string best;
    int best_n = -1;
    double best_mean = 0.0;
    for (const auto& [label, v] : votes) {
        const double mean = v.second / v.first;
        if (v.first > best_n || (v.first == best_n && mean < best_mean)) {
            best = label;
            best_n = v.first;
            best_mean = mean;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("quadratic feature map") {
    CHECK(quadratic_terms(0) == 1);
    CHECK(quadratic_terms(3) == 10);
    CHECK(quadratic_terms(10) == 66);
    Vector h(2);
    h << 2, 3;
    CHECK(to_std(quadratic_features(h)) == std::vector<double>{1, 2, 3, 4, 6, 9});
    gen::Rng rng(50);
    const Matrix s = rng.matrix(7, 4);
    CHECK((quadratic_design(s) - oracle::quadratic_map(s)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quadratic regression") {
    gen::Rng rng(51);
    SUBCASE("exact quadratic in two axes") {
        const Matrix h = rng.matrix(40, 2);
        Vector beta(6);
        beta << 0.5, -1, 2, 0.25, -0.75, 1.5;
        const Vector y = oracle::quadratic_map(h) * beta;
        const auto m = fit_quadratic(h, y, "ch");
        CHECK(m.target_channel == "ch");
        CHECK((m.coefficients() - beta).cwiseAbs().maxCoeff() <= 1e-8);
        const Vector pred = m.predict(h);
        CHECK(r2(to_std(y), to_std(pred)) == doctest::Approx(1.0).epsilon(1e-12));
        // Held-out point.
        Vector q(2);
        q << 0.3, -2.0;
        CHECK(m.predict(q) == doctest::Approx(oracle::quadratic_map(q.transpose()).row(0).dot(beta)).epsilon(1e-8));
        CHECK(m.predict(Vector(Vector::Zero(2))) == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(m.dampred(Vector(Vector::Zero(2))) == doctest::Approx(std::pow(10.0, m.intercept)));
    }
    SUBCASE("constant targets") {
        const Matrix h = rng.matrix(30, 3);
        const auto m = fit_quadratic(h, Vector::Constant(30, -4.2));
        CHECK(m.intercept == doctest::Approx(-4.2).epsilon(1e-10));
        CHECK(m.coefficients().tail(9).cwiseAbs().maxCoeff() <= 1e-10);
    }
    SUBCASE("random problem against normal equations") {
        const Matrix h = rng.matrix(200, 3);
        Vector y(200);
        for (auto& v : y) v = rng.normal();
        const auto m = fit_quadratic(h, y);
        const Vector want = oracle::quadratic_map(h) * oracle::normal_equations(oracle::quadratic_map(h), y);
        const Vector got = m.predict(h);
        CHECK((got - want).norm() <= 1e-6 * want.norm());

        // Residuals are orthogonal to every design column.
        const Matrix x = oracle::quadratic_map(h);
        const Vector resid = y - got;
        CHECK((x.transpose() * resid).cwiseAbs().maxCoeff() <= 1e-6 * x.norm() * y.norm());

        // Batch and row-wise predictions are identical.
        for (Eigen::Index r = 0; r < 200; r += 17) CHECK(m.predict(Vector(h.row(r).transpose())) == got[r]);

        // Least squares beats any constant predictor on its own training set.
        const std::vector<double> ys = to_std(y);
        CHECK(r2(ys, to_std(got)) >= r2(ys, std::vector<double>(200, y.mean())));
        CHECK(r2(ys, to_std(got)) >= r2(ys, std::vector<double>(200, 0.3)));
    }
    SUBCASE("rank deficiency yields the minimum-norm solution") {
        Matrix h = rng.matrix(50, 2);
        h.col(1) = h.col(0);
        const Vector y = h.col(0);
        const auto m = fit_quadratic(h, y);
        CHECK(m.linear[0] == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(m.linear[1] == doctest::Approx(0.5).epsilon(1e-8));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(fit_quadratic(rng.matrix(10, 3), Vector::Zero(10)), InsufficientData);
        CHECK_THROWS_AS(fit_quadratic(rng.matrix(30, 3), Vector::Zero(29)), ShapeError);
        const auto m = fit_quadratic(rng.matrix(30, 2), Vector::Zero(30));
        CHECK_THROWS_AS(m.predict(Vector(Vector::Zero(3))), ShapeError);
    }
    SUBCASE("JSON round trip") {
        const Matrix h = rng.matrix(30, 2);
        const auto m = fit_quadratic(h, h.col(0), "x");
        const auto back = quadratic_from_json(to_json(m));
        CHECK(back.coefficients() == m.coefficients());
        CHECK(back.target_channel == "x");
    }
}

TEST_CASE("metrics") {
    const std::vector<double> y{1, 2, 3, 4};
    CHECK(r2(y, y) == 1.0);
    CHECK(r2(y, std::vector<double>(4, 2.5)) == doctest::Approx(0.0));
    CHECK_THROWS_AS(r2(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), UndefinedMetric);
    CHECK_THROWS_AS(r2(std::vector<double>{2}, std::vector<double>{2}), InsufficientData);
    CHECK_THROWS_AS(r2(y, std::vector<double>{1, 2}), ShapeError);

    const std::vector<double> D{0.1, 0.0, 2.0};
    CHECK(fds_ratio(D, D) == 1.0);
    CHECK(fds_ratio(D, std::vector<double>{0.2, 0.0, 4.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(fds_ratio(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}), UndefinedMetric);
}

TEST_CASE("property: metric bounds and scale equivariance") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CAPTURE(seed);
        gen::Rng rng(seed);
        const std::size_t n = rng.index(2, 60);
        auto y = rng.gaussian(n);
        y[0] += 1.0;
        const auto ys = rng.gaussian(n);
        CHECK(r2(y, ys) <= 1.0);

        std::vector<double> D(n), Ds(n);
        double sum_d = 0.0, sum_s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            D[i] = rng.uniform(0.0, 3.0);
            Ds[i] = rng.uniform(0.0, 3.0);
            sum_d += D[i];
            sum_s += Ds[i];
        }
        CHECK(fds_ratio(D, Ds) == sum_s / sum_d);
        const double c = rng.uniform(0.1, 10.0);
        std::vector<double> scaled(Ds);
        for (auto& v : scaled) v *= c;
        CHECK(fds_ratio(D, scaled) == doctest::Approx(c * fds_ratio(D, Ds)).epsilon(1e-12));
    }
}

TEST_CASE("kNN") {
    gen::Rng rng(52);
    SUBCASE("single class") {
        const auto m = knn_fit(rng.matrix(10, 2), std::vector<std::string>(10, "only"), 3);
        CHECK(knn_predict(m, Vector(Vector::Random(2))) == "only");
        CHECK(m.classes() == std::vector<std::string>{"only"});
    }
    SUBCASE("k = 1 returns the label of a training point") {
        const Matrix pts = rng.matrix(20, 3);
        std::vector<std::string> labels;
        for (int i = 0; i < 20; ++i) labels.push_back("c" + std::to_string(i % 4));
        const auto m = knn_fit(pts, labels, 1);
        for (int i = 0; i < 20; ++i) CHECK(knn_predict(m, Vector(pts.row(i).transpose())) == labels[static_cast<std::size_t>(i)]);
    }
    SUBCASE("two classes against the exhaustive oracle") {
        Matrix pts = rng.matrix(100, 2);
        std::vector<std::string> labels;
        for (int i = 0; i < 100; ++i) {
            labels.push_back(i < 50 ? "a" : "b");
            if (i >= 50) pts.row(i).array() += 1.0;
        }
        const auto m = knn_fit(pts, labels, 20);
        const Matrix queries = rng.matrix(50, 2, 1.5);
        const auto batch = knn_predict(m, queries);
        for (Eigen::Index q = 0; q < 50; ++q) {
            const Vector row = queries.row(q).transpose();
            CHECK(knn_predict(m, row) == knn_oracle(pts, labels, 20, row));
            CHECK(batch[static_cast<std::size_t>(q)] == knn_predict(m, row));
        }
    }
    SUBCASE("vote ties go to the closer class, then the smaller label") {
        Matrix pts(4, 1);
        pts << -1, 1, -3, 3.5;
        const auto m = knn_fit(pts, {"x", "y", "x", "y"}, 4);
        CHECK(knn_predict(m, Vector(Vector::Zero(1))) == "x");  // mean distance 2 vs 2.25
        Matrix sym(2, 1);
        sym << -1, 1;
        CHECK(knn_predict(knn_fit(sym, {"q", "p"}, 2), Vector(Vector::Zero(1))) == "p");
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(knn_fit(rng.matrix(5, 2), std::vector<std::string>(5, "a"), 6), InvalidK);
        CHECK_THROWS_AS(knn_fit(rng.matrix(5, 2), std::vector<std::string>(5, "a"), 0), InvalidK);
        CHECK_THROWS_AS(knn_fit(rng.matrix(5, 2), std::vector<std::string>(4, "a"), 1), ShapeError);
        const auto m = knn_fit(rng.matrix(5, 2), std::vector<std::string>(5, "a"), 2);
        CHECK_THROWS_AS(knn_predict(m, Vector(Vector::Zero(3))), ShapeError);
    }
    SUBCASE("JSON round trip") {
        const auto m = knn_fit(rng.matrix(6, 2), {"a", "b", "a", "b", "a", "b"}, 3);
        const auto back = knn_from_json(to_json(m));
        CHECK(back.points == m.points);
        CHECK(back.labels == m.labels);
        CHECK(back.k == 3);
    }
}

TEST_CASE("property: kNN ignores training row order") {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        CAPTURE(seed);
        gen::Rng rng(seed);
        const Eigen::Index n = static_cast<Eigen::Index>(rng.index(5, 60));
        // Coarse coordinates create distance ties.
        Matrix pts(n, 2);
        for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = static_cast<double>(rng.index(0, 4));
        std::vector<std::string> labels;
        for (Eigen::Index i = 0; i < n; ++i) labels.push_back(std::string(1, static_cast<char>('a' + rng.index(0, 2))));
        const int k = static_cast<int>(rng.index(1, static_cast<std::size_t>(n)));

        std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine);
        Matrix pts2(n, 2);
        std::vector<std::string> labels2;
        for (Eigen::Index i = 0; i < n; ++i) {
            pts2.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
            labels2.push_back(labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
        }
        const auto a = knn_fit(pts, labels, k);
        const auto b = knn_fit(pts2, labels2, k);
        for (int q = 0; q < 10; ++q) {
            Vector v(2);
            v << static_cast<double>(rng.index(0, 8)) / 2.0, static_cast<double>(rng.index(0, 8)) / 2.0;
            CHECK(knn_predict(a, v) == knn_predict(b, v));
            CHECK(knn_predict(a, v) == knn_oracle(pts, labels, k, v));
        }
    }
}

TEST_CASE("confusion and accuracy") {
    const std::vector<std::string> t{"a", "b", "b", "c"};
    const auto same = confusion_and_accuracy(t, t, {"c", "b", "a"});
    CHECK(same.labels == std::vector<std::string>{"a", "b", "c"});
    CHECK(same.accuracy == 1.0);
    CHECK(same.counts[1][1] == 2);
    CHECK(same.counts[0][1] == 0);

    const std::vector<std::string> p{"b", "c", "c", "a"};
    const auto wrong = confusion_and_accuracy(t, p, {"a", "b", "c"});
    CHECK(wrong.accuracy == 0.0);
    std::size_t rows = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) rows += wrong.counts[i][j];
    CHECK(rows == 4);
    CHECK(wrong.counts[1][2] == 2);  // row sums are class supports

    CHECK_THROWS_AS(confusion_and_accuracy(t, p, {"a", "b"}), UnknownLabel);
    CHECK_THROWS_AS(confusion_and_accuracy(t, std::vector<std::string>{"a"}, {"a", "b", "c"}), ShapeError);

    CHECK(speed_label(15.0) == "15");
    CHECK(speed_label(12.5) == "12.5");
}
