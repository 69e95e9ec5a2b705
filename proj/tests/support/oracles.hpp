#pragma once

// Slow, independent reference implementations used by the unit and acceptance
// tests. None of them calls into the library code paths they check.

#include "vsense/scattering.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <random>
#include <tuple>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------- rainflow

struct RefCycle {
    double range;  // full range |a - b|
    double a;
    double b;
};

inline std::vector<double> extrema(const std::vector<double>& x) {
    // Drop repeats, then keep points where the slope changes sign.
    std::vector<double> y;
    for (double v : x)
        if (y.empty() || v != y.back()) y.push_back(v);
    if (y.size() < 3) return y;
    std::vector<double> out{y.front()};
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        if ((y[i] - y[i - 1]) * (y[i + 1] - y[i]) < 0.0) out.push_back(y[i]);
    out.push_back(y.back());
    return out;
}

// Repeatedly removes the leftmost closing 4-point window until none remains.
inline std::vector<double> leftmost_pass(std::vector<double> pts, std::vector<RefCycle>& cycles) {
    for (;;) {
        bool found = false;
        for (std::size_t i = 0; i + 3 < pts.size(); ++i) {
            const double inner = std::fabs(pts[i + 1] - pts[i + 2]);
            if (inner <= std::fabs(pts[i] - pts[i + 1]) && inner <= std::fabs(pts[i + 2] - pts[i + 3])) {
                cycles.push_back({inner, pts[i + 1], pts[i + 2]});
                pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                          pts.begin() + static_cast<std::ptrdiff_t>(i) + 3);
                found = true;
                break;
            }
        }
        if (!found) return pts;
    }
}

// Cycle multiset as sorted (amplitude, mean) pairs from raw samples.
inline std::vector<std::pair<double, double>> rainflow_reference(const std::vector<double>& series) {
    std::vector<RefCycle> cycles;
    const std::vector<double> residue = leftmost_pass(extrema(series), cycles);
    if (residue.size() >= 2) {
        std::vector<double> twice = residue;
        twice.insert(twice.end(), residue.begin(), residue.end());
        leftmost_pass(extrema(twice), cycles);
    }
    std::vector<std::pair<double, double>> out;
    for (const auto& c : cycles) out.emplace_back(c.range / 2.0, (c.a + c.b) / 2.0);
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------- DFT

inline std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x, int sign = -1) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{};
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

inline std::vector<double> hamming_magnitudes(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> xw(n);
    for (std::size_t i = 0; i < n; ++i)
        xw[i] = x[i] * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)));
    const auto X = dft(xw);
    std::vector<double> out(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) out[k] = std::abs(X[k]);
    return out;
}

// ---------------------------------------------------------------- scattering

// Time-domain impulse response of a frequency response sampled on the N-grid.
template <typename Response>
std::vector<std::complex<double>> impulse(Response&& response, std::size_t N) {
    std::vector<std::complex<double>> h(N);
    for (std::size_t k = 0; k < N; ++k) h[k] = response(k);
    auto t = dft(h, +1);
    for (auto& v : t) v /= static_cast<double>(N);
    return t;
}

inline std::vector<std::complex<double>> circular_convolve(const std::vector<std::complex<double>>& x,
                                                           const std::vector<std::complex<double>>& h) {
    const std::size_t N = x.size();
    std::vector<std::complex<double>> y(N);
    for (std::size_t n = 0; n < N; ++n) {
        std::complex<double> acc{};
        for (std::size_t m = 0; m < N; ++m) acc += x[m] * h[(n + N - m) % N];
        y[n] = acc;
    }
    return y;
}

// Direct O(N^2) scattering: mirror padding, circular time-domain convolutions,
// averaging, and sampling at pad_left + m*T. Flattened S0 | S1 | S2.
inline std::vector<double> scatter_direct(const std::vector<double>& x, const vsense::scattering::FilterBank& bank) {
    const auto& cfg = bank.config();
    const std::size_t L = x.size();
    const std::size_t N = 2 * L;
    const std::size_t a = L / 2;
    const std::size_t T = cfg.averaging();
    const std::size_t P = (L + T - 1) / T;

    // Mirror without repeating the edge sample.
    std::vector<std::complex<double>> padded(N);
    for (std::size_t i = 0; i < N; ++i) {
        long t = static_cast<long>(i) - static_cast<long>(a);
        const long n = static_cast<long>(L);
        while (t < 0 || t >= n) t = t < 0 ? -t : 2 * (n - 1) - t;
        padded[i] = x[static_cast<std::size_t>(t)];
    }

    auto freq = [N](std::size_t k) {
        return static_cast<double>(k) / static_cast<double>(N);
    };
    const auto& lp = bank.lowpass();
    const auto phi = impulse([&](std::size_t k) { return std::complex<double>(lp(freq(k))); }, N);
    auto psi = [&](const vsense::scattering::Wavelet& w) {
        return impulse([&](std::size_t k) { return std::complex<double>(k <= N / 2 ? w(freq(k)) : 0.0); }, N);
    };
    auto modulus = [](std::vector<std::complex<double>> v) {
        for (auto& c : v) c = std::abs(c);
        return v;
    };
    auto average = [&](const std::vector<std::complex<double>>& v, std::vector<double>& out) {
        const auto y = circular_convolve(v, phi);
        for (std::size_t m = 0; m < P; ++m) out.push_back(y[a + m * T].real());
    };

    std::vector<double> s0, s1, s2;
    average(padded, s0);
    for (std::size_t i = 0; i < bank.layer1().size(); ++i) {
        const auto u1 = modulus(circular_convolve(padded, psi(bank.layer1()[i])));
        average(u1, s1);
        for (const auto& w2 : bank.layer2()) {
            if (!(w2.xi < bank.layer1()[i].xi)) continue;
            average(modulus(circular_convolve(u1, psi(w2))), s2);
        }
    }
    std::vector<double> out = s0;
    out.insert(out.end(), s1.begin(), s1.end());
    out.insert(out.end(), s2.begin(), s2.end());
    return out;
}

// ---------------------------------------------------------------- PCA

// Eigenvectors of the sample covariance, descending, each column signed so its
// largest-magnitude entry is positive.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> covariance_eigen(const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::Index n = cov.cols();
    Eigen::MatrixXd vecs(n, n);
    Eigen::VectorXd vals(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        vecs.col(i) = es.eigenvectors().col(n - 1 - i);
        vals[i] = es.eigenvalues()[n - 1 - i];
        Eigen::Index arg = 0;
        vecs.col(i).cwiseAbs().maxCoeff(&arg);
        if (vecs(arg, i) < 0) vecs.col(i) *= -1.0;
    }
    return {vecs, vals};
}

// Rows with covariance V diag(s^2) V^T for a random orthonormal V.
inline Eigen::MatrixXd correlated_gaussian(std::size_t rows, const std::vector<double>& scales, std::mt19937_64& rng) {
    const auto cols = static_cast<Eigen::Index>(scales.size());
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(cols, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    Eigen::MatrixXd z(static_cast<Eigen::Index>(rows), cols);
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        for (Eigen::Index c = 0; c < cols; ++c) z(r, c) = g(rng) * scales[static_cast<std::size_t>(c)];
    Eigen::RowVectorXd offset(cols);
    for (Eigen::Index c = 0; c < cols; ++c) offset[c] = 3.0 * g(rng);
    return (z * q.transpose()).rowwise() + offset;
}

// ---------------------------------------------------------------- regression

// [1, h_i, h_i h_j (i <= j)] written out independently.
inline Eigen::MatrixXd quadratic_map(const Eigen::MatrixXd& h) {
    const Eigen::Index p = h.cols();
    Eigen::MatrixXd x(h.rows(), 1 + p + p * (p + 1) / 2);
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
        Eigen::Index c = 0;
        x(r, c++) = 1.0;
        for (Eigen::Index i = 0; i < p; ++i) x(r, c++) = h(r, i);
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = i; j < p; ++j) x(r, c++) = h(r, i) * h(r, j);
    }
    return x;
}

inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

// ---------------------------------------------------------------- signals

// Gaussian noise band-passed to [lo, hi] cycles per sample via a brick-wall DFT mask.
inline std::vector<double> band_limited(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<double> out(n, 0.0);
    const std::size_t kmax = n / 2;
    std::vector<std::tuple<double, double, double>> comps;  // frequency, amplitude, phase
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    for (std::size_t k = 1; k < kmax; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(n);
        if (f < lo || f > hi) continue;
        comps.emplace_back(f, g(rng), ph(rng));
    }
    for (std::size_t t = 0; t < n; ++t) {
        double v = 0.0;
        for (const auto& [f, amp, phase] : comps) v += amp * std::cos(2.0 * std::numbers::pi * f * static_cast<double>(t) + phase);
        out[t] = v;
    }
    return out;
}

}  // namespace oracle
