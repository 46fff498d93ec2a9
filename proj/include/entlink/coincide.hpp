#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "entlink/montecarlo.hpp"

namespace entlink::coincide {

using montecarlo::TagStream;

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_sorted(const TagStream& s, const char* name) {
    for (std::size_t i = 1; i < s.tags.size(); ++i)
        if (s.tags[i].time_ps < s.tags[i - 1].time_ps)
            throw std::invalid_argument(std::string("coincide: stream ") + name +
                                        " is not sorted");
}

} // namespace detail

/// Start-stop histogram of t_b - t_a over [-range, +range].
struct CoincidenceHistogram {
    std::int64_t bin_width_ps = 0;
    std::int64_t range_ps = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t total_pairs_examined = 0; // pairs that landed in the histogram

    std::int64_t bin_lo_ps(std::size_t i) const {
        return -range_ps + static_cast<std::int64_t>(i) * bin_width_ps;
    }
    double bin_center_ps(std::size_t i) const { return bin_lo_ps(i) + 0.5 * bin_width_ps; }

    /// Sum of counts with bin centers inside [lo, hi].
    std::uint64_t counts_in(std::int64_t lo_ps, std::int64_t hi_ps) const {
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            double c = bin_center_ps(i);
            if (c >= lo_ps && c <= hi_ps) sum += counts[i];
        }
        return sum;
    }
};

/// All-pairs differences in a single merged pass: for each tag of a, the b
/// tags within range are found through a monotonically advancing window, so
/// the cost is O(n_a + n_b + pairs in range).
inline CoincidenceHistogram histogram(const TagStream& a, const TagStream& b,
                                      std::int64_t bin_width_ps, std::int64_t range_ps) {
    if (bin_width_ps <= 0 || range_ps <= 0)
        throw std::invalid_argument("coincide: bin width and range must be positive");
    if (bin_width_ps > range_ps)
        throw std::invalid_argument("coincide: bin width exceeds range");
    if ((2 * range_ps) % bin_width_ps != 0)
        throw std::invalid_argument("coincide: bins must tile the range exactly");
    detail::require_sorted(a, "a");
    detail::require_sorted(b, "b");

    CoincidenceHistogram hist;
    hist.bin_width_ps = bin_width_ps;
    hist.range_ps = range_ps;
    hist.counts.assign(static_cast<std::size_t>(2 * range_ps / bin_width_ps), 0);

    std::size_t lo = 0;
    for (const auto& ta : a.tags) {
        while (lo < b.tags.size() && b.tags[lo].time_ps < ta.time_ps - range_ps) ++lo;
        for (std::size_t j = lo; j < b.tags.size() && b.tags[j].time_ps <= ta.time_ps + range_ps;
             ++j) {
            std::int64_t dt = b.tags[j].time_ps - ta.time_ps;
            auto idx = static_cast<std::size_t>((dt + range_ps) / bin_width_ps);
            if (idx >= hist.counts.size()) idx = hist.counts.size() - 1; // dt == +range
            ++hist.counts[idx];
            ++hist.total_pairs_examined;
        }
    }
    return hist;
}

struct CoincidenceResult {
    std::int64_t window_ps = 250;
    std::uint64_t coincidences = 0;
    double acc_estimate = 0.0; // accidentals expected in the signal window
    double duration_s = 0.0;
    double rate_hz = 0.0;
};

namespace detail {

/// Greedy earliest one-to-one matching: each tag pairs with at most one
/// partner, mirroring start-stop hardware. Two-pointer pass, O(n_a + n_b).
inline std::uint64_t greedy_matches(const TagStream& a, const TagStream& b,
                                    std::int64_t center_ps, std::int64_t half_window_ps) {
    std::uint64_t count = 0;
    std::size_t j = 0;
    for (const auto& ta : a.tags) {
        std::int64_t lo = ta.time_ps + center_ps - half_window_ps;
        std::int64_t hi = ta.time_ps + center_ps + half_window_ps;
        while (j < b.tags.size() && b.tags[j].time_ps < lo) ++j;
        if (j < b.tags.size() && b.tags[j].time_ps <= hi) {
            ++count;
            ++j;
        }
    }
    return count;
}

} // namespace detail

/// Count coincidences with |t_b - t_a - center| <= window/2. The accidental
/// estimate comes from an identical window displaced by acc_offset_ps, which
/// must sit clear of the signal window (and should sit clear of all peaks;
/// the default is 10 UMI imbalances away).
inline CoincidenceResult count_coincidences(const TagStream& a, const TagStream& b,
                                            std::int64_t window_ps, std::int64_t center_ps,
                                            double duration_s,
                                            std::int64_t acc_offset_ps = 3400) {
    if (window_ps <= 0) throw std::invalid_argument("coincide: window must be positive");
    if (!(duration_s > 0.0)) throw std::invalid_argument("coincide: duration must be positive");
    if (std::llabs(acc_offset_ps) < window_ps)
        throw std::invalid_argument("coincide: accidental window overlaps the signal window");
    detail::require_sorted(a, "a");
    detail::require_sorted(b, "b");

    CoincidenceResult res;
    res.window_ps = window_ps;
    res.duration_s = duration_s;
    res.coincidences = detail::greedy_matches(a, b, center_ps, window_ps / 2);
    res.acc_estimate = static_cast<double>(
        detail::greedy_matches(a, b, center_ps + acc_offset_ps, window_ps / 2));
    res.rate_hz = static_cast<double>(res.coincidences) / duration_s;
    return res;
}

struct FringePoint {
    double phase_rad = 0.0;
    CoincidenceResult result;
};

struct FringeScan {
    std::vector<FringePoint> points;

    void validate() const {
        if (points.size() < 5)
            throw std::invalid_argument("coincide: a fringe scan needs at least 5 points");
        auto [mn, mx] = std::minmax_element(points.begin(), points.end(),
                                            [](const FringePoint& x, const FringePoint& y) {
                                                return x.phase_rad < y.phase_rad;
                                            });
        if (mx->phase_rad - mn->phase_rad < 2.0 * 3.141592653589793 - 1e-9)
            throw std::invalid_argument("coincide: fringe scan must span a full period");
    }
};

/// Weighted least-squares fit of rate(phi) = C * (1 + V cos(phi + phi0)).
/// visibility is amplitude over mean; visibility_err the propagated 1 sigma.
struct FringeFit {
    double visibility = 0.0; // clamped to [0, 1]
    double visibility_unclamped = 0.0;
    double visibility_err = 0.0;
    double mean_rate_hz = 0.0;
    double phase_offset_rad = 0.0;
    double chi2_per_dof = 0.0;
    bool clamped = false; // fit amplitude exceeded the physical range
};

namespace detail {

struct SinusoidSample {
    double phase;
    double rate;
    double sigma;
};

struct SinusoidSolution {
    double beta[3];   // mean, cos coefficient, sin coefficient
    double cov[3][3];
    double model(double phase) const {
        return beta[0] + beta[1] * std::cos(phase) + beta[2] * std::sin(phase);
    }
};

/// Exact weighted normal-equation solve for rate = b0 + b1 cos + b2 sin.
inline SinusoidSolution solve_sinusoid(const std::vector<SinusoidSample>& samples) {
    double ata[3][3] = {};
    double aty[3] = {};
    for (const auto& s : samples) {
        double w = 1.0 / (s.sigma * s.sigma);
        double x[3] = {1.0, std::cos(s.phase), std::sin(s.phase)};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) ata[r][c] += w * x[r] * x[c];
            aty[r] += w * x[r] * s.rate;
        }
    }
    // Gauss-Jordan with partial pivoting; the inverse is the covariance.
    SinusoidSolution sol{};
    double m[3][6] = {};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = ata[r][c];
        m[r][3 + r] = 1.0;
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
        if (std::fabs(m[piv][col]) < 1e-12)
            throw FitError("coincide: degenerate fringe scan (singular normal equations)");
        std::swap(m[col], m[piv]);
        double d = m[col][col];
        for (int c = 0; c < 6; ++c) m[col][c] /= d;
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            double f = m[r][col];
            for (int c = 0; c < 6; ++c) m[r][c] -= f * m[col][c];
        }
    }
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) sol.cov[r][c] = m[r][3 + c];
    for (int r = 0; r < 3; ++r)
        sol.beta[r] =
            sol.cov[r][0] * aty[0] + sol.cov[r][1] * aty[1] + sol.cov[r][2] * aty[2];
    return sol;
}

/// Visibility, phase and delta-method error from a solved sinusoid.
inline FringeFit fit_from_solution(const SinusoidSolution& sol) {
    const double mean = sol.beta[0];
    const double amp = std::hypot(sol.beta[1], sol.beta[2]);
    if (!(mean > 0.0)) throw FitError("coincide: fitted mean rate is not positive");

    FringeFit fit;
    fit.mean_rate_hz = mean;
    fit.visibility_unclamped = amp / mean;
    fit.phase_offset_rad = std::atan2(-sol.beta[2], sol.beta[1]);
    fit.clamped = fit.visibility_unclamped > 1.0;
    fit.visibility = std::clamp(fit.visibility_unclamped, 0.0, 1.0);

    double safe_amp = std::max(amp, 1e-300);
    double g[3] = {-amp / (mean * mean), sol.beta[1] / (safe_amp * mean),
                   sol.beta[2] / (safe_amp * mean)};
    double var = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) var += g[r] * sol.cov[r][c] * g[c];
    fit.visibility_err = std::sqrt(std::max(var, 0.0));
    return fit;
}

inline std::vector<SinusoidSample> samples_from_scan(const FringeScan& scan) {
    std::vector<SinusoidSample> samples;
    samples.reserve(scan.points.size());
    for (const auto& pt : scan.points) {
        double dur = pt.result.duration_s;
        if (!(dur > 0.0)) throw FitError("coincide: scan point without a duration");
        double counts = static_cast<double>(pt.result.coincidences);
        samples.push_back({pt.phase_rad, counts / dur, std::max(std::sqrt(counts), 1.0) / dur});
    }
    return samples;
}

} // namespace detail

/// The model is linear in (C, C V cos phi0, -C V sin phi0), so the weighted
/// normal equations give the exact optimum in closed form; no iteration or
/// seeding is needed. Poisson weights sigma_i = max(sqrt(N_i), 1)/duration_i.
inline FringeFit fit_fringe(const FringeScan& scan) {
    scan.validate();
    auto samples = detail::samples_from_scan(scan);
    auto sol = detail::solve_sinusoid(samples);
    FringeFit fit = detail::fit_from_solution(sol);

    double chi2 = 0.0;
    for (const auto& s : samples) {
        double r = (s.rate - sol.model(s.phase)) / s.sigma;
        chi2 += r * r;
    }
    fit.chi2_per_dof =
        samples.size() > 3 ? chi2 / static_cast<double>(samples.size() - 3) : 0.0;
    return fit;
}

/// Raw versus accidental-subtracted visibility. Each point's own displaced
/// window estimate is removed before refitting; weights keep the raw-count
/// Poisson errors. Subtractions that would go negative clamp to zero and set
/// the flag, as does a net error too large to be meaningful.
struct RawNet {
    double raw = 0.0;
    double net = 0.0;
    FringeFit net_fit;
    int clamped_points = 0;
    bool low_snr = false;
};

inline RawNet raw_vs_net(const FringeScan& scan, const FringeFit& raw_fit) {
    RawNet out;
    out.raw = raw_fit.visibility;

    auto samples = detail::samples_from_scan(scan);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& pt = scan.points[i];
        double net_counts = static_cast<double>(pt.result.coincidences) - pt.result.acc_estimate;
        if (net_counts < 0.0) {
            net_counts = 0.0;
            ++out.clamped_points;
        }
        samples[i].rate = net_counts / pt.result.duration_s;
    }

    auto sol = detail::solve_sinusoid(samples);
    if (!(sol.beta[0] > 0.0)) {
        out.low_snr = true;
        return out;
    }
    out.net_fit = detail::fit_from_solution(sol);
    out.net = out.net_fit.visibility;
    out.low_snr = out.clamped_points > 0 || out.net_fit.visibility_err > 0.25;
    return out;
}

inline std::string histogram_csv(const CoincidenceHistogram& hist) {
    std::string csv = "bin_lo_ps,bin_hi_ps,count\n";
    char line[96];
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        std::snprintf(line, sizeof line, "%lld,%lld,%llu\n",
                      static_cast<long long>(hist.bin_lo_ps(i)),
                      static_cast<long long>(hist.bin_lo_ps(i) + hist.bin_width_ps),
                      static_cast<unsigned long long>(hist.counts[i]));
        csv += line;
    }
    return csv;
}

/// Fringe points as "phase_rad,rate_hz,rate_err_hz" rows for plotting.
inline std::string scan_csv(const FringeScan& scan) {
    std::string csv = "phase_rad,rate_hz,rate_err_hz\n";
    char line[128];
    for (const auto& pt : scan.points) {
        double err = std::max(std::sqrt(static_cast<double>(pt.result.coincidences)), 1.0) /
                     pt.result.duration_s;
        std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g\n", pt.phase_rad,
                      static_cast<double>(pt.result.coincidences) / pt.result.duration_s, err);
        csv += line;
    }
    return csv;
}

} // namespace entlink::coincide
