#include "vsense/fatigue.hpp"

#include "vsense/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace vsense::fatigue {

std::vector<double> turning_points(std::span<const double> series) {
    std::vector<double> tp;
    if (series.empty()) return tp;
    tp.push_back(series[0]);
    int direction = 0;  // sign of the current run
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double d = series[i] - tp.back();
        if (d == 0.0) continue;
        const int s = d > 0.0 ? 1 : -1;
        if (s == direction) {
            tp.back() = series[i];  // run continues, move the extremum
        } else {
            tp.push_back(series[i]);
            direction = s;
        }
    }
    return tp;
}

namespace {

// Runs the four-point rule over `points`, appending closed cycles; returns the residue.
std::vector<double> four_point_pass(std::span<const double> points, std::vector<Cycle>& out, bool second_pass) {
    std::vector<double> stack;
    stack.reserve(points.size());
    for (double p : points) {
        stack.push_back(p);
        while (stack.size() >= 4) {
            const std::size_t n = stack.size();
            const double s1 = stack[n - 4], s2 = stack[n - 3], s3 = stack[n - 2], s4 = stack[n - 1];
            const double x = std::abs(s2 - s3);
            if (x <= std::abs(s1 - s2) && x <= std::abs(s3 - s4)) {
                out.push_back({x / 2.0, (s2 + s3) / 2.0, 1.0, second_pass});
                stack.erase(stack.end() - 3, stack.end() - 1);
            } else {
                break;
            }
        }
    }
    return stack;
}

}  // namespace

CycleList rainflow_count(std::span<const double> turning) {
    CycleList result;
    result.residue = four_point_pass(turning, result.cycles, false);
    if (result.residue.size() < 2) return result;

    std::vector<double> doubled(result.residue);
    doubled.insert(doubled.end(), result.residue.begin(), result.residue.end());
    const std::vector<double> tp = turning_points(doubled);
    four_point_pass(tp, result.cycles, true);
    return result;
}

void WoehlerCurve::validate() const {
    if (!(k > 0.0) || !(K > 0.0) || !std::isfinite(k) || !std::isfinite(K))
        throw InvalidConfig("Woehler curve needs k > 0 and K > 0");
}

double WoehlerCurve::cycles_to_failure(double amplitude) const {
    return K * std::pow(amplitude, -k);
}

double damage_sum(std::span<const Cycle> cycles, const WoehlerCurve& curve) {
    curve.validate();
    double d = 0.0;
    for (const auto& c : cycles) {
        if (!(c.amplitude > 0.0)) continue;
        d += c.count * std::pow(c.amplitude, curve.k) / curve.K;
    }
    return d;
}

double damage_sum(const CycleList& cycles, const WoehlerCurve& curve) {
    return damage_sum(std::span<const Cycle>(cycles.cycles), curve);
}

double segment_damage(std::span<const double> strain, const WoehlerCurve& curve) {
    const auto tp = turning_points(strain);
    return damage_sum(rainflow_count(tp), curve);
}

double DamageRecord::lgD() const {
    return D > 0.0 ? std::log10(D) : std::numeric_limits<double>::quiet_NaN();
}

std::string damage_records_csv(std::span<const DamageRecord> records) {
    std::string out = "file_id,segment,channel,D,lgD\n";
    char buf[64];
    auto put = [&](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.append(buf, end);
    };
    for (const auto& r : records) {
        out += r.file_id;
        out += ',';
        out += std::to_string(r.segment);
        out += ',';
        out += r.channel;
        out += ',';
        put(r.D);
        out += ',';
        if (r.D > 0.0) put(r.lgD());
        out += '\n';
    }
    return out;
}

RainflowMatrix rainflow_matrix(const CycleList& cycles, std::size_t bins) {
    if (bins == 0) throw InvalidConfig("rainflow matrix needs at least one bin");
    RainflowMatrix m;
    m.bins = bins;
    m.counts.assign(bins * bins, 0.0);
    if (cycles.cycles.empty()) return m;
    m.amplitude_min = m.amplitude_max = cycles.cycles.front().amplitude;
    m.mean_min = m.mean_max = cycles.cycles.front().mean;
    for (const auto& c : cycles.cycles) {
        m.amplitude_min = std::min(m.amplitude_min, c.amplitude);
        m.amplitude_max = std::max(m.amplitude_max, c.amplitude);
        m.mean_min = std::min(m.mean_min, c.mean);
        m.mean_max = std::max(m.mean_max, c.mean);
    }
    auto bin = [bins](double v, double lo, double hi) -> std::size_t {
        if (!(hi > lo)) return 0;
        const auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        return std::min(b, bins - 1);
    };
    for (const auto& c : cycles.cycles)
        m.counts[bin(c.amplitude, m.amplitude_min, m.amplitude_max) * bins + bin(c.mean, m.mean_min, m.mean_max)] +=
            c.count;
    return m;
}

}  // namespace vsense::fatigue
