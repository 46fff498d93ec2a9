#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "entlink/coincide.hpp"
#include "entlink/montecarlo.hpp"
#include "entlink/scenario.hpp"

namespace entlink::pipeline {

using montecarlo::SimConfig;

/// Worker count: ENTLINK_THREADS if set, else hardware concurrency, clamped.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("ENTLINK_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v <= 256) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : std::min(hw, 8u);
}

/// Run fn(0..n-1) on a small pool. Each index owns its output slot, so
/// results are identical for any schedule; the first exception wins.
template <typename Fn>
inline void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(thread_budget(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Seed-path tags for per-scan-point and per-sweep-row substreams.
inline constexpr std::uint64_t kScanStream = 0x5c;
inline constexpr std::uint64_t kSweepStream = 0x5e;

struct ScanSpec {
    int points = 12;
    double duration_per_point_s = 1.0;
    std::int64_t window_ps = 250;
};

/// Phase grid spanning a full period inclusive of both ends.
inline std::vector<double> scan_phases(int points) {
    std::vector<double> phases(points);
    constexpr double two_pi = 6.283185307179586;
    for (int j = 0; j < points; ++j)
        phases[j] = two_pi * j / static_cast<double>(points - 1);
    return phases;
}

struct PairScanResult {
    coincide::FringeScan scan;
    coincide::FringeFit fit;
    coincide::RawNet raw_net;
};

struct ScanResult {
    std::vector<double> phases;
    std::vector<PairScanResult> per_pair; // plan order
    double live_duration_per_point_s = 0.0;
};

/// Simulate one fringe scan: Alice's analyzer phase steps through the grid,
/// every channel pair is counted at each step, and each pair's fringe is fit.
/// Point seeds derive from the base seed and the point index.
inline ScanResult run_fringe_scan(const SimConfig& base, const ScanSpec& spec) {
    if (spec.points < 5)
        throw std::invalid_argument("pipeline: a scan needs at least 5 phase points");
    ScanResult result;
    result.phases = scan_phases(spec.points);
    const std::size_t pairs = base.plan.size();
    result.per_pair.resize(pairs);
    for (auto& pr : result.per_pair) pr.scan.points.resize(spec.points);

    const auto acc_offset_ps =
        static_cast<std::int64_t>(std::llround(10.0 * base.umi_a.delta_tau_s * 1e12));

    std::vector<std::vector<coincide::CoincidenceResult>> per_point(spec.points);
    std::atomic<double> live{0.0};
    parallel_for(static_cast<std::size_t>(spec.points), [&](std::size_t j) {
        SimConfig cfg = base;
        cfg.duration_s = spec.duration_per_point_s;
        cfg.umi_a.phase_rad = result.phases[j];
        cfg.seed = rng::derive_seed(base.seed, {kScanStream, j});
        auto sim = montecarlo::simulate(cfg);
        live.store(sim.live_duration_s);
        std::vector<coincide::CoincidenceResult> row(pairs);
        for (std::size_t p = 0; p < pairs; ++p)
            row[p] = coincide::count_coincidences(
                sim.stream_for(montecarlo::Arm::alice, p),
                sim.stream_for(montecarlo::Arm::bob, p), spec.window_ps, 0,
                sim.live_duration_s, acc_offset_ps);
        per_point[j] = std::move(row);
    });
    result.live_duration_per_point_s = live.load();

    for (std::size_t p = 0; p < pairs; ++p) {
        for (int j = 0; j < spec.points; ++j)
            result.per_pair[p].scan.points[j] = {result.phases[j], per_point[j][p]};
        result.per_pair[p].fit = coincide::fit_fringe(result.per_pair[p].scan);
        result.per_pair[p].raw_net =
            coincide::raw_vs_net(result.per_pair[p].scan, result.per_pair[p].fit);
    }
    return result;
}

/// Phase-averaged detected-coincidence rate estimate, dead time and window
/// capture included; used to size sweep durations.
inline double expected_coincidence_rate_hz(const SimConfig& cfg, std::int64_t window_ps) {
    const double lam = cfg.pair_rate_hz();
    const double r_a = lam * cfg.link.alpha_a / 2.0 + cfg.detector_a.dark_rate_hz;
    const double r_b = lam * cfg.link.alpha_b / 2.0 + cfg.detector_b.dark_rate_hz;
    const double p_a = 1.0 / (1.0 + r_a * cfg.detector_a.dead_time_s);
    const double p_b = 1.0 / (1.0 + r_b * cfg.detector_b.dead_time_s);
    const double sigma_diff =
        cfg.detector_a.jitter_fwhm_s / 2.3548200450309493; // coincidence-peak sigma
    double capture = 1.0;
    if (sigma_diff > 0.0)
        capture = std::erf(window_ps * 1e-12 / 2.0 / (sigma_diff * std::sqrt(2.0)));
    return lam * cfg.link.alpha_a * cfg.link.alpha_b / 4.0 * p_a * p_b * capture;
}

struct SweepRow {
    double nbar = 0.0;
    double v_analytic = 0.0;
    double v_fit = 0.0;
    double v_fit_err = 0.0;
    double pair_rate_hz = 0.0;  // mean fitted coincidence rate per channel pair
    double total_rate_hz = 0.0; // summed over simulated pairs
    double duration_s = 0.0;
    std::string error; // non-empty if this row failed; others still complete
};

struct SweepSpec {
    double nbar_min = 0.003;
    double nbar_max = 1.0;
    int points = 9;
    int scan_points = 12;
    double target_coincidences_per_point = 1e4;
    double min_duration_s = 0.05;
    double max_duration_s = 30.0;
    std::int64_t window_ps = 250;
};

inline std::vector<double> log_grid(double lo, double hi, int points) {
    std::vector<double> grid(points);
    if (points == 1) {
        grid[0] = lo;
        return grid;
    }
    double step = std::log(hi / lo) / (points - 1);
    for (int i = 0; i < points; ++i) grid[i] = lo * std::exp(step * i);
    return grid;
}

/// Visibility and rate versus brightness: one analytic and one simulated
/// (scan + fit) value per grid point. Durations adapt to the expected rate,
/// clamped to keep high-brightness (saturated) points affordable.
inline std::vector<SweepRow> sweep(const SimConfig& base, const SweepSpec& spec) {
    auto grid_points = log_grid(spec.nbar_min, spec.nbar_max, spec.points);
    std::vector<SweepRow> rows(grid_points.size());
    for (std::size_t i = 0; i < grid_points.size(); ++i) {
        SweepRow& row = rows[i];
        row.nbar = grid_points[i];
        SimConfig cfg = base;
        cfg.nbar = row.nbar;
        cfg.seed = rng::derive_seed(base.seed, {kSweepStream, i});
        try {
            auto op = budget::OperatingPoint::from_detectors(cfg.nbar, cfg.window_s,
                                                             cfg.detector_a, cfg.detector_b);
            row.v_analytic = budget::visibility(op, cfg.link).visibility;

            double rate = expected_coincidence_rate_hz(cfg, spec.window_ps);
            double dur = spec.target_coincidences_per_point / std::max(rate, 1e-9);
            ScanSpec scan_spec{spec.scan_points,
                               std::clamp(dur, spec.min_duration_s, spec.max_duration_s),
                               spec.window_ps};
            auto scan = run_fringe_scan(cfg, scan_spec);
            row.duration_s = scan_spec.duration_per_point_s;
            double total = 0.0;
            double mean_v = 0.0, mean_err = 0.0;
            for (const auto& pr : scan.per_pair) {
                total += pr.fit.mean_rate_hz;
                mean_v += pr.fit.visibility;
                mean_err += pr.fit.visibility_err * pr.fit.visibility_err;
            }
            auto n = static_cast<double>(scan.per_pair.size());
            row.v_fit = mean_v / n;
            row.v_fit_err = std::sqrt(mean_err) / n;
            row.pair_rate_hz = total / n;
            row.total_rate_hz = total;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }
    return rows;
}

inline std::string sweep_csv_header() {
    return "nbar,v_analytic,v_fit,v_fit_err,pair_rate_hz,total_rate_hz,duration_s,error";
}

inline std::string sweep_csv_row(const SweepRow& row) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s", row.nbar,
                  row.v_analytic, row.v_fit, row.v_fit_err, row.pair_rate_hz,
                  row.total_rate_hz, row.duration_s, row.error.c_str());
    return buf;
}

} // namespace entlink::pipeline
