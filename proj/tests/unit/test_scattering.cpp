#include "../support/gen.hpp"
#include "../support/oracles.hpp"

#include "vsense/error.hpp"
#include "vsense/scattering.hpp"

#include <doctest.h>

#include <numbers>
#include <set>

using namespace vsense;
using namespace vsense::scattering;

namespace {

ScatteringConfig small(int J = 3, int Q = 2, std::size_t l = 256, std::size_t T = 0) {
    ScatteringConfig c;
    c.J = J;
    c.Q1 = Q;
    c.l_seq = l;
    c.T = T;
    return c;
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
    double n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(n / norm2(b));
}

std::vector<double> sinusoid(std::size_t n, double f, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) + phase);
    return x;
}

// Peak of the analytic Morlet from its closed-form derivative, by bisection.
double derivative_root(const Wavelet& w) {
    const double c = w.gauss_center, s2 = w.sigma * w.sigma;
    auto d = [&](double x) {
        return -(x - c) * std::exp(-(x - c) * (x - c) / (2 * s2)) + x * std::exp(-(x * x + c * c) / (2 * s2));
    };
    double lo = c, hi = c + 10 * w.sigma;
    REQUIRE(d(lo) > 0.0);
    REQUIRE(d(hi) < 0.0);
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        (d(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS(FilterBank(small(9, 2, 256)), InvalidScale);
    CHECK_NOTHROW(FilterBank(small(8, 1, 256)));
    CHECK_THROWS_AS(FilterBank(small(3, 0, 256)), InvalidConfig);
    CHECK_THROWS_AS(FilterBank(small(0, 1, 256)), InvalidConfig);
    CHECK_THROWS_AS(FilterBank(small(3, 2, 256, 512)), InvalidConfig);
    CHECK(small().averaging() == 8);
    CHECK(small(3, 2, 256, 24).averaging() == 24);
    CHECK(small().positions() == 32);
}

TEST_CASE("filter bank invariants") {
    for (auto [J, Q] : {std::pair{1, 1}, std::pair{3, 2}, std::pair{5, 6}, std::pair{4, 8}}) {
        CAPTURE(J);
        CAPTURE(Q);
        const auto cfg = small(J, Q, 256);
        const FilterBank bank(cfg);
        const std::size_t N = cfg.padded_length();
        REQUIRE(bank.layer1().size() == static_cast<std::size_t>(J * Q));
        REQUIRE(bank.layer2().size() == static_cast<std::size_t>(J));

        // Lattice: peaks at xi_max * 2^(-k/Q), strictly decreasing.
        const auto xi = bank.center_frequencies();
        for (std::size_t k = 0; k < xi.size(); ++k) {
            const double want = max_center_frequency(Q) * std::exp2(-static_cast<double>(k) / Q);
            CHECK(derivative_root(bank.layer1()[k]) == doctest::Approx(want).epsilon(1e-9));
            if (k) CHECK(xi[k] < xi[k - 1]);
        }

        // Zero mean in the time domain.
        for (const auto& w : bank.layer1()) {
            const auto h = oracle::impulse([&](std::size_t k) { return std::complex<double>(k <= N / 2 ? w(double(k) / N) : 0.0); }, N);
            std::complex<double> sum{};
            double l2 = 0.0;
            for (const auto& v : h) {
                sum += v;
                l2 += std::norm(v);
            }
            CHECK(std::abs(sum) <= 1e-6 * std::sqrt(l2));
        }

        // Littlewood-Paley bound on a fine grid, both layers.
        for (const auto* layer : {&bank.layer1(), &bank.layer2()}) {
            double worst = 0.0;
            for (int g = 0; g <= 20000; ++g) {
                const double f = 0.5 * g / 20000.0;
                double s = bank.lowpass()(f) * bank.lowpass()(f);
                for (const auto& w : *layer) s += w(f) * w(f);
                worst = std::max(worst, s);
            }
            CHECK(worst <= 1.0 + 1e-2);
        }

        // Sampled responses agree with the closed form wherever they are kept.
        for (const auto& w : bank.layer1())
            for (std::size_t k = 0; k <= N / 2; k += 7)
                CHECK(std::abs(w.response[k] - w(double(k) / N)) <= 1e-16);
    }
}

TEST_CASE("path pruning and layout") {
    const FilterBank bank(ScatteringConfig{});
    std::size_t second = 0;
    for (std::size_t i = 0; i < bank.layer1().size(); ++i)
        for (int j : bank.children()[i]) {
            CHECK(bank.layer2()[static_cast<std::size_t>(j)].xi < bank.layer1()[i].xi);
            ++second;
        }
    CHECK(bank.paths().size() == 1 + bank.layer1().size() + second);
    CHECK(bank.coefficients_per_channel() == bank.paths().size() * 128);
    const std::vector<std::string> ch{"a", "b", "c", "d", "e"};
    const auto layout = layout_json(bank, ch, true);
    CHECK(layout["total_length"].get<std::size_t>() == 5 * bank.coefficients_per_channel());
    CHECK(layout["entries"].size() == 5 * bank.coefficients_per_channel());
    const auto groups = group_map(bank, 5);
    CHECK(groups.size() == 5 * bank.coefficients_per_channel());
    CHECK(*std::max_element(groups.begin(), groups.end()) == 14);
    CHECK(std::set<int>(groups.begin(), groups.end()).size() == 15);
}

TEST_CASE("reflect padding") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(reflect_pad(x, 2, 8) == std::vector<double>{3, 2, 1, 2, 3, 4, 3, 2});
    CHECK(reflect_pad(std::vector<double>{5}, 1, 3) == std::vector<double>{5, 5, 5});
}

TEST_CASE("scatter against the direct oracle") {
    gen::Rng rng(20);
    SUBCASE("stride divides the padded length") {
        const FilterBank bank(small());
        const auto x = rng.gaussian(256);
        CHECK(rel_l2(scatter(x, bank).flatten(), oracle::scatter_direct(x, bank)) <= 1e-6);
    }
    SUBCASE("stride does not divide the padded length") {
        const FilterBank bank(small(3, 2, 256, 24));
        const auto x = rng.gaussian(256);
        CHECK(rel_l2(scatter(x, bank).flatten(), oracle::scatter_direct(x, bank)) <= 1e-6);
    }
    SUBCASE("odd length") {
        const FilterBank bank(small(2, 1, 101));
        const auto x = rng.gaussian(101);
        CHECK(rel_l2(scatter(x, bank).flatten(), oracle::scatter_direct(x, bank)) <= 1e-6);
    }
}

TEST_CASE("scatter special inputs") {
    const FilterBank bank(small());
    SUBCASE("zero input") {
        for (double v : scatter(std::vector<double>(256, 0.0), bank).flatten()) CHECK(v == 0.0);
    }
    SUBCASE("constant input") {
        const double c = -4.0;
        const auto sv = scatter(std::vector<double>(256, c), bank);
        for (double v : sv.s1) CHECK(v <= 1e-6 * std::abs(c));
        for (double v : sv.s2) CHECK(v <= 1e-6 * std::abs(c));
        // phi has unit DC gain on the grid, so S0 reproduces the constant.
        for (double v : sv.s0) CHECK(v == doctest::Approx(c).epsilon(1e-9));
    }
    SUBCASE("sinusoid at a lattice frequency peaks in that path") {
        for (std::size_t i = 0; i < bank.layer1().size(); ++i) {
            CAPTURE(i);
            const auto sv = scatter(sinusoid(256, bank.layer1()[i].xi, 0.4), bank);
            std::vector<double> per_path(bank.layer1().size(), 0.0);
            for (std::size_t p = 0; p < per_path.size(); ++p)
                for (std::size_t m = 0; m < sv.positions; ++m) per_path[p] += sv.s1[p * sv.positions + m];
            CHECK(static_cast<std::size_t>(std::max_element(per_path.begin(), per_path.end()) - per_path.begin()) == i);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(scatter(std::vector<double>(255, 0.0), bank), ShapeError);
        std::vector<double> x(256, 0.0);
        x[9] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(scatter(x, bank), NonFiniteSample);
    }
}

TEST_CASE("property: non-negativity and non-expansion") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        CAPTURE(seed);
        gen::Rng rng(seed);
        const int J = static_cast<int>(rng.index(1, 5));
        const int Q = static_cast<int>(rng.index(1, 8));
        const FilterBank bank(small(J, Q, 512));
        const auto x = seed % 2 ? rng.gaussian(512, rng.uniform(0.1, 5.0)) : rng.walk(512);
        const auto sv = scatter(x, bank);
        for (double v : sv.s1) CHECK(v >= 0.0);
        for (double v : sv.s2) CHECK(v >= 0.0);

        const auto padded = reflect_pad(x, 256, 1024);
        double out = 0.0;
        for (const auto& row : scatter_full(x, bank)) out += norm2(row);
        CHECK(std::sqrt(out) <= std::sqrt(norm2(padded)) * (1.0 + 2e-2));
    }
}

TEST_CASE("property: approximate translation invariance") {
    const auto cfg = small(5, 6, 1024);
    const FilterBank bank(cfg);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        std::mt19937_64 rng(seed);
        const auto x = oracle::band_limited(1024, 0.02, 0.2, rng);
        const std::size_t shift = 1 + seed % (cfg.averaging() / 8);
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[(i + shift) % x.size()] = x[i];
        CHECK(rel_l2(scatter(y, bank).flatten(), scatter(x, bank).flatten()) <= 0.2);
    }
}

TEST_CASE("deformation ordering on a warp ladder") {
    const FilterBank bank(small(5, 6, 1024));
    const double f = 0.05;
    const auto base = scatter(sinusoid(1024, f), bank).flatten();
    double previous = 0.0;
    for (double eps : {0.01, 0.03, 0.09}) {
        CAPTURE(eps);
        const double d = rel_l2(scatter(sinusoid(1024, f * (1.0 + eps)), bank).flatten(), base);
        CHECK(d > previous);
        previous = d;
    }
}

TEST_CASE("assembled scattering vectors") {
    gen::Rng rng(21);
    const FilterBank bank(small());
    auto f = gen::make_file("f", 512, 3, 0, rng);
    const auto seg = ingest::segment_file(f, 256).at(1);
    const auto v = assemble_scattering_vector(seg, bank);
    const std::size_t B = bank.coefficients_per_channel();
    CHECK(v.size() == 3 * B);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto one = scatter(seg.acc(c), bank).flatten();
        CHECK(std::equal(one.begin(), one.end(), v.begin() + c * B));
    }

    SUBCASE("channel permutation permutes blocks") {
        auto g = f;
        std::swap(g.acc_channels[0], g.acc_channels[2]);
        const auto w = assemble_scattering_vector(ingest::segment_file(g, 256).at(1), bank);
        CHECK(std::equal(w.begin(), w.begin() + B, v.begin() + 2 * B));
        CHECK(std::equal(w.begin() + B, w.begin() + 2 * B, v.begin() + B));
    }
    SUBCASE("non-finite sample names file, channel and position") {
        auto g = f;
        g.acc_channels[1].samples[300] = std::nan("");
        const auto bad = ingest::segment_file(g, 256).at(1);
        try {
            assemble_scattering_vector(bad, bank);
            FAIL("expected NonFiniteSample");
        } catch (const NonFiniteSample& e) {
            CHECK(e.file_id() == "f");
            CHECK(e.channel() == "acc#1");
            CHECK(e.index() == 300);
        }
    }
}
