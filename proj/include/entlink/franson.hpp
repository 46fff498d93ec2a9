#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "entlink/rng.hpp"

namespace entlink::franson {

/// Coherence times bracketing the interferometer imbalance: the filtered
/// single-photon coherence tau and the pump-limited biphoton coherence.
struct CoherenceSpec {
    double tau_s = 10e-12;
    double pump_coherence_s = 1e-6;
};

/// Unbalanced Michelson analyzer: long-short travel-time difference and the
/// settable phase of the long arm.
struct UmiSpec {
    double delta_tau_s = 340e-12;
    double phase_rad = 0.0;
};

enum class TimingCondition {
    imbalance_above_coherence,   // delta_tau > tau, else single-photon interference
    imbalance_below_pump,        // delta_tau < pump coherence, else no two-photon fringe
    arms_matched,                // |delta_tau_a - delta_tau_b| small against tau
};

struct TimingViolation {
    TimingCondition condition;
    std::string detail;
};

struct TimingReport {
    std::vector<TimingViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Arm-matching tolerance: "much smaller than tau" quantified as tau / this.
inline constexpr double kArmMatchFactor = 10.0;

/// Checks pump_coherence > delta_tau_{a,b} > tau and
/// |delta_tau_a - delta_tau_b| <= tau / kArmMatchFactor.
/// Violations are data, not errors; an invalid setup still simulates.
inline TimingReport validate_timing(const UmiSpec& umi_a, const UmiSpec& umi_b,
                                    const CoherenceSpec& c) {
    if (umi_a.delta_tau_s <= 0.0 || umi_b.delta_tau_s <= 0.0 || c.tau_s <= 0.0 ||
        c.pump_coherence_s <= 0.0)
        throw std::invalid_argument("franson: timing parameters must be positive");

    TimingReport report;
    auto ps = [](double s) { return std::to_string(s * 1e12) + " ps"; };
    for (auto [tag, dt] : {std::pair{"a", umi_a.delta_tau_s}, std::pair{"b", umi_b.delta_tau_s}}) {
        if (!(dt > c.tau_s))
            report.violations.push_back({TimingCondition::imbalance_above_coherence,
                                         std::string("delta_tau_") + tag + " = " + ps(dt) +
                                             " not above tau = " + ps(c.tau_s)});
        if (!(dt < c.pump_coherence_s))
            report.violations.push_back({TimingCondition::imbalance_below_pump,
                                         std::string("delta_tau_") + tag + " = " + ps(dt) +
                                             " not below pump coherence = " +
                                             ps(c.pump_coherence_s)});
    }
    double mismatch = std::fabs(umi_a.delta_tau_s - umi_b.delta_tau_s);
    if (mismatch > c.tau_s / kArmMatchFactor)
        report.violations.push_back({TimingCondition::arms_matched,
                                     "arm mismatch " + ps(mismatch) + " above tau/" +
                                         std::to_string(static_cast<int>(kArmMatchFactor)) +
                                         " = " + ps(c.tau_s / kArmMatchFactor)});
    return report;
}

enum class OutcomeKind {
    central_interfering, // both photons analyzed, short-short/long-long, interferes
    satellite_early,     // Alice long / Bob short: coincidence at -delta_tau
    satellite_late,      // Alice short / Bob long: coincidence at +delta_tau
    lost,                // no analyzed coincidence (one or both photons dropped)
};

/// Probabilities of the four joint outcomes for one emitted pair, before any
/// transmission loss. Each 50/50 analyzer passes a photon with amplitude 1/2
/// per path; the short-short and long-long joint amplitudes interfere with
/// contrast v0.
struct OutcomeDistribution {
    double p_central = 0.0;
    double p_satellite_early = 0.0;
    double p_satellite_late = 0.0;
    double p_lost = 0.0;
};

inline OutcomeDistribution outcome_distribution(double phi_sum, double v0) {
    if (v0 < 0.0 || v0 > 1.0)
        throw std::invalid_argument("franson: intrinsic visibility must be in [0,1]");
    OutcomeDistribution dist;
    dist.p_central = (1.0 + v0 * std::cos(phi_sum)) / 8.0;
    dist.p_satellite_early = 1.0 / 16.0;
    dist.p_satellite_late = 1.0 / 16.0;
    dist.p_lost = 1.0 - dist.p_central - dist.p_satellite_early - dist.p_satellite_late;
    return dist;
}

/// One sampled pair. kind == lost can still leave a single analyzed photon on
/// either arm; the flags and delays say which tags exist. Arm marginals are
/// phase-independent: P(analyzed) = 1/2 per arm with delay 0 or delta_tau
/// equally likely, as required for fringe-free singles.
struct PairOutcome {
    OutcomeKind kind = OutcomeKind::lost;
    bool alice_detected = false;
    bool bob_detected = false;
    double delay_a_s = 0.0;
    double delay_b_s = 0.0;
};

inline PairOutcome sample_pair_outcome(double phi_sum, double v0, const UmiSpec& umi_a,
                                       const UmiSpec& umi_b, rng::Stream& stream) {
    const double vc = v0 * std::cos(phi_sum);
    // Joint sectors: both analyzed = (2+vc)/8 [central (1+vc)/8 + satellites 2/16],
    // each single-arm sector (2-vc)/8, both lost (2+vc)/8. Sums to 1, marginals 1/2.
    const double p_central = (1.0 + vc) / 8.0;
    const double p_sat = 1.0 / 16.0;
    const double p_single = (2.0 - vc) / 8.0;

    PairOutcome out;
    double u = stream.uniform();
    if (u < p_central) {
        out.kind = OutcomeKind::central_interfering;
        out.alice_detected = out.bob_detected = true;
        if (stream.bernoulli(0.5)) { // long-long; short-short leaves both delays zero
            out.delay_a_s = umi_a.delta_tau_s;
            out.delay_b_s = umi_b.delta_tau_s;
        }
        return out;
    }
    u -= p_central;
    if (u < p_sat) {
        out.kind = OutcomeKind::satellite_early; // Alice long, Bob short
        out.alice_detected = out.bob_detected = true;
        out.delay_a_s = umi_a.delta_tau_s;
        return out;
    }
    u -= p_sat;
    if (u < p_sat) {
        out.kind = OutcomeKind::satellite_late; // Alice short, Bob long
        out.alice_detected = out.bob_detected = true;
        out.delay_b_s = umi_b.delta_tau_s;
        return out;
    }
    u -= p_sat;
    out.kind = OutcomeKind::lost;
    if (u < p_single) {
        out.alice_detected = true;
        out.delay_a_s = stream.bernoulli(0.5) ? umi_a.delta_tau_s : 0.0;
        return out;
    }
    u -= p_single;
    if (u < p_single) {
        out.bob_detected = true;
        out.delay_b_s = stream.bernoulli(0.5) ? umi_b.delta_tau_s : 0.0;
    }
    return out;
}

/// Per-emission rates of every tag-producing outcome after folding in the arm
/// transmittances. Categories are disjoint, so a Poisson pair-emission process
/// splits into independent Poisson processes, one per category (coloring);
/// the simulator generates only these instead of every emission.
struct DetectionWeights {
    double central_short_short = 0.0; // both tags, delays (0, 0)
    double central_long_long = 0.0;   // both tags, delays (dta, dtb)
    double satellite_early = 0.0;     // both tags, delays (dta, 0)
    double satellite_late = 0.0;      // both tags, delays (0, dtb)
    double alice_only_short = 0.0;
    double alice_only_long = 0.0;
    double bob_only_short = 0.0;
    double bob_only_long = 0.0;

    double both_tags() const {
        return central_short_short + central_long_long + satellite_early + satellite_late;
    }
    double any_tag() const {
        return both_tags() + alice_only_short + alice_only_long + bob_only_short + bob_only_long;
    }
};

inline DetectionWeights detection_weights(double phi_sum, double v0, double alpha_a,
                                          double alpha_b) {
    const double vc = v0 * std::cos(phi_sum);
    const double ab = alpha_a * alpha_b;
    DetectionWeights w;
    w.central_short_short = (1.0 + vc) / 16.0 * ab;
    w.central_long_long = (1.0 + vc) / 16.0 * ab;
    w.satellite_early = ab / 16.0;
    w.satellite_late = ab / 16.0;
    // Surviving-arm marginal stays 1/2 split evenly over short/long, so a tag
    // with a lost partner (at the analyzer or in transmission) has weight
    // alpha * (1/4 - alpha_other * (2+vc)/16) per path.
    w.alice_only_short = alpha_a * (0.25 - alpha_b * (2.0 + vc) / 16.0);
    w.alice_only_long = w.alice_only_short;
    w.bob_only_short = alpha_b * (0.25 - alpha_a * (2.0 + vc) / 16.0);
    w.bob_only_long = w.bob_only_short;
    return w;
}

} // namespace entlink::franson
