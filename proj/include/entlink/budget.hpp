#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace entlink::budget {

inline double db_to_linear(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }
inline double linear_to_db(double transmittance) { return -10.0 * std::log10(transmittance); }

/// Bell-CHSH violation needs V > 1/sqrt(2); key distribution needs QBER < 9%,
/// i.e. V > 0.82.
inline constexpr double kBellThreshold = 0.70710678118654752;
inline constexpr double kQcThreshold = 0.82;

/// Free-running single photon detector parameters.
struct DetectorSpec {
    double efficiency = 1.0;       // folded into the link transmittance when building one
    double dark_rate_hz = 1000.0;
    double dead_time_s = 9e-6;     // non-paralyzable
    double jitter_fwhm_s = 155e-12; // full detection-system jitter (coincidence FWHM)

    void validate() const {
        if (efficiency < 0.0 || efficiency > 1.0)
            throw std::invalid_argument("detector: efficiency must be in [0,1]");
        if (dark_rate_hz < 0.0 || dead_time_s < 0.0 || jitter_fwhm_s < 0.0)
            throw std::invalid_argument("detector: rates and times must be non-negative");
    }
};

/// Total transmittance per arm, generator to detector, detector efficiency
/// included. Interferometer splitting factors are NOT part of alpha; the
/// analytic model carries them explicitly.
struct LinkBudget {
    double alpha_a = 1.0;
    double alpha_b = 1.0;

    static LinkBudget from_db_loss(double loss_a_db, double loss_b_db) {
        return {db_to_linear(loss_a_db), db_to_linear(loss_b_db)};
    }

    /// Compose one arm's transmittance from parts.
    static double arm_from_parts(double component_loss_db, double fiber_length_km,
                                 double attenuation_db_per_km, double detector_efficiency) {
        return db_to_linear(component_loss_db + fiber_length_km * attenuation_db_per_km) *
               detector_efficiency;
    }

    double loss_a_db() const { return linear_to_db(alpha_a); }
    double loss_b_db() const { return linear_to_db(alpha_b); }

    void validate() const {
        if (!(alpha_a > 0.0) || alpha_a > 1.0 || !(alpha_b > 0.0) || alpha_b > 1.0)
            throw std::invalid_argument("budget: transmittance must be in (0,1]");
    }
};

/// Source brightness and per-window noise at one operating point.
struct OperatingPoint {
    double nbar = 0.015;       // mean pair number per window per channel pair
    double window_s = 250e-12;
    double dark_prob_a = 2.5e-7; // dark-count probability per window
    double dark_prob_b = 2.5e-7;

    static OperatingPoint from_detectors(double nbar, double window_s, const DetectorSpec& a,
                                         const DetectorSpec& b) {
        return {nbar, window_s, a.dark_rate_hz * window_s, b.dark_rate_hz * window_s};
    }

    void validate() const {
        if (nbar < 0.0) throw std::invalid_argument("budget: nbar must be non-negative");
        if (!(window_s > 0.0)) throw std::invalid_argument("budget: window must be positive");
        if (dark_prob_a < 0.0 || dark_prob_b < 0.0)
            throw std::invalid_argument("budget: dark probabilities must be non-negative");
    }
};

/// Analytic per-window probabilities and the visibility they imply.
/// model_strained flags operating points (nbar > 0.1) where the two-/three-pair
/// truncation behind the formula is known to overestimate V.
struct PerformanceEstimate {
    double visibility = 0.0;
    double qber = 0.0;
    double true_coinc_prob = 0.0;
    double accidental_prob = 0.0;
    double singles_prob_a = 0.0;
    double singles_prob_b = 0.0;
    bool model_strained = false;
};

inline double qber_from_visibility(double v) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("budget: visibility must be in [0,1]");
    return (1.0 - v) / 2.0;
}

/// V = (nbar*aa*ab/4) / (nbar*aa*ab/4 + 2*(nbar*aa/2 + da)*(nbar*ab/2 + db)).
/// The /4 is the interferometers' central-peak throughput at the fringe
/// maximum, the /2 factors are single-arm throughputs.
inline PerformanceEstimate visibility(const OperatingPoint& op, const LinkBudget& lb) {
    op.validate();
    lb.validate();
    PerformanceEstimate est;
    est.true_coinc_prob = op.nbar * lb.alpha_a * lb.alpha_b / 4.0;
    est.singles_prob_a = op.nbar * lb.alpha_a / 2.0 + op.dark_prob_a;
    est.singles_prob_b = op.nbar * lb.alpha_b / 2.0 + op.dark_prob_b;
    est.accidental_prob = 2.0 * est.singles_prob_a * est.singles_prob_b;
    double denom = est.true_coinc_prob + est.accidental_prob;
    est.visibility = denom > 0.0 ? est.true_coinc_prob / denom : 0.0;
    est.qber = (1.0 - est.visibility) / 2.0;
    est.model_strained = op.nbar > 0.1;
    return est;
}

struct SecurityMargins {
    bool bell_violated = false;
    bool qc_ok = false;
};

inline SecurityMargins security_margins(double v) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("budget: visibility must be in [0,1]");
    return {v > kBellThreshold, v > kQcThreshold};
}

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double visibility_at_symmetric_loss(double loss_db, double nbar, double dark_prob_a,
                                           double dark_prob_b, double window_s) {
    OperatingPoint op{nbar, window_s, dark_prob_a, dark_prob_b};
    return visibility(op, LinkBudget::from_db_loss(loss_db, loss_db)).visibility;
}

} // namespace detail

/// Largest symmetric per-arm loss (dB) keeping visibility >= v_target.
/// V is monotone decreasing in loss for d > 0, so bisection to 0.01 dB.
inline double max_tolerable_loss_db(double nbar, double dark_prob_a, double dark_prob_b,
                                    double v_target, double window_s = 250e-12,
                                    double loss_ceiling_db = 200.0) {
    if (v_target <= 0.0 || v_target >= 1.0)
        throw std::invalid_argument("budget: loss solver needs v_target in (0,1)");
    double v0 = detail::visibility_at_symmetric_loss(0.0, nbar, dark_prob_a, dark_prob_b, window_s);
    if (v0 <= v_target)
        throw SolverError("budget: target visibility unreachable even at zero loss");
    double v_ceiling =
        detail::visibility_at_symmetric_loss(loss_ceiling_db, nbar, dark_prob_a, dark_prob_b, window_s);
    if (v_ceiling > v_target)
        throw SolverError("budget: visibility stays above target up to the loss ceiling "
                          "(with d = 0 it is loss-independent)");
    double lo = 0.0, hi = loss_ceiling_db;
    while (hi - lo > 0.01) {
        double mid = 0.5 * (lo + hi);
        if (detail::visibility_at_symmetric_loss(mid, nbar, dark_prob_a, dark_prob_b, window_s) >
            v_target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Total link length when the source sits mid-link and each arm spends
/// (loss_budget - baseline) dB of fiber at the given attenuation.
inline double loss_to_distance_km(double loss_budget_db, double baseline_db,
                                  double attenuation_db_per_km) {
    if (attenuation_db_per_km <= 0.0)
        throw std::invalid_argument("budget: attenuation must be positive");
    if (loss_budget_db < baseline_db)
        throw std::invalid_argument("budget: loss budget below the baseline loss");
    return 2.0 * (loss_budget_db - baseline_db) / attenuation_db_per_km;
}

/// Brightness where the visibility curve peaks: below it dark counts dominate,
/// above it multi-pair accidentals do.
inline double peak_visibility_nbar(const LinkBudget& lb, double dark_prob_a, double dark_prob_b) {
    return 2.0 * std::sqrt(dark_prob_a * dark_prob_b / (lb.alpha_a * lb.alpha_b));
}

/// Largest nbar keeping visibility >= v_min; the coincidence rate grows with
/// nbar below saturation, so the rate-optimal point sits on that boundary.
/// Searches the decreasing branch (nbar above the visibility peak) by
/// bisection to a relative 1e-4. v_min <= 0 returns nbar_ceiling.
inline double optimal_nbar(const LinkBudget& lb, double dark_prob_a, double dark_prob_b,
                           double v_min, double window_s = 250e-12, double nbar_ceiling = 10.0) {
    lb.validate();
    if (v_min >= 1.0) throw std::invalid_argument("budget: v_min must be below 1");
    if (v_min <= 0.0) return nbar_ceiling;

    auto vis_at = [&](double nbar) {
        OperatingPoint op{nbar, window_s, dark_prob_a, dark_prob_b};
        return visibility(op, lb).visibility;
    };
    double n_peak = peak_visibility_nbar(lb, dark_prob_a, dark_prob_b);
    if (n_peak >= nbar_ceiling || vis_at(n_peak) < v_min)
        throw SolverError("budget: v_min exceeds the peak visibility (dark-count dominated)");
    if (vis_at(nbar_ceiling) >= v_min) return nbar_ceiling;

    double lo = n_peak, hi = nbar_ceiling;
    while ((hi - lo) > 1e-4 * hi) {
        double mid = 0.5 * (lo + hi);
        if (vis_at(mid) >= v_min)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline nlohmann::ordered_json estimate_to_json(const OperatingPoint& op, const LinkBudget& lb,
                                               const PerformanceEstimate& est) {
    nlohmann::ordered_json j;
    j["nbar"] = op.nbar;
    j["window_s"] = op.window_s;
    j["alpha_a_db"] = -lb.loss_a_db();
    j["alpha_b_db"] = -lb.loss_b_db();
    j["d_a"] = op.dark_prob_a;
    j["d_b"] = op.dark_prob_b;
    j["visibility"] = est.visibility;
    j["qber"] = est.qber;
    j["true_coinc_prob"] = est.true_coinc_prob;
    j["accidental_prob"] = est.accidental_prob;
    j["singles_prob_a"] = est.singles_prob_a;
    j["singles_prob_b"] = est.singles_prob_b;
    j["model_strained"] = est.model_strained;
    return j;
}

inline std::string estimate_csv_header() {
    return "nbar,alpha_a_db,alpha_b_db,d_a,d_b,V,QBER";
}

inline std::string estimate_csv_row(const OperatingPoint& op, const LinkBudget& lb,
                                    const PerformanceEstimate& est) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", op.nbar,
                  -lb.loss_a_db(), -lb.loss_b_db(), op.dark_prob_a, op.dark_prob_b,
                  est.visibility, est.qber);
    return buf;
}

} // namespace entlink::budget
