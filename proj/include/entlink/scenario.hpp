#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "entlink/budget.hpp"
#include "entlink/montecarlo.hpp"
#include "entlink/version.hpp"

namespace entlink::scenario {

using montecarlo::SimConfig;

/// Bench configuration: 8 ITU channel pairs around channel 47, 11 dB total
/// loss per arm (components plus detector efficiency), 1 kHz equivalent dark
/// rate (2.5e-7 per 250 ps window), 9 us dead time, 155 ps system jitter,
/// 340 ps analyzer imbalance.
inline SimConfig back_to_back() {
    SimConfig cfg;
    cfg.duration_s = 1.0;
    cfg.seed = 1;
    cfg.window_s = 250e-12;
    cfg.nbar = 0.015;
    cfg.plan = grid::build_plan(39, 46, 47);
    cfg.link = budget::LinkBudget::from_db_loss(11.0, 11.0);
    cfg.detector_a = {1.0, 1000.0, 9e-6, 155e-12}; // efficiency folded into the link loss
    cfg.detector_b = {1.0, 1000.0, 9e-6, 155e-12};
    cfg.umi_a = {340e-12, 0.0};
    cfg.umi_b = {340e-12, 0.0};
    cfg.coherence = {10e-12, 1e-6};
    cfg.v0 = 1.0;
    return cfg;
}

/// 150 km deployment: the bench setup plus 16 dB of fiber per arm and the
/// brightness backed off to nbar = 0.05.
inline SimConfig km150() {
    SimConfig cfg = back_to_back();
    cfg.link = budget::LinkBudget::from_db_loss(27.0, 27.0);
    cfg.nbar = 0.05;
    return cfg;
}

inline SimConfig preset(const std::string& name) {
    if (name == "back_to_back") return back_to_back();
    if (name == "km150") return km150();
    throw std::invalid_argument("scenario: unknown preset '" + name +
                                "' (expected back_to_back or km150)");
}

inline nlohmann::ordered_json detector_to_json(const budget::DetectorSpec& d) {
    return {{"efficiency", d.efficiency},
            {"dark_rate_hz", d.dark_rate_hz},
            {"dead_time_s", d.dead_time_s},
            {"jitter_fwhm_s", d.jitter_fwhm_s}};
}

inline budget::DetectorSpec detector_from_json(const nlohmann::json& j,
                                               budget::DetectorSpec base) {
    base.efficiency = j.value("efficiency", base.efficiency);
    base.dark_rate_hz = j.value("dark_rate_hz", base.dark_rate_hz);
    base.dead_time_s = j.value("dead_time_s", base.dead_time_s);
    base.jitter_fwhm_s = j.value("jitter_fwhm_s", base.jitter_fwhm_s);
    return base;
}

inline nlohmann::ordered_json config_to_json(const SimConfig& cfg) {
    nlohmann::ordered_json j;
    j["duration_s"] = cfg.duration_s;
    j["seed"] = cfg.seed;
    j["window_ps"] = cfg.window_s * 1e12;
    j["nbar"] = cfg.nbar;
    j["v0"] = cfg.v0;
    j["plan"] = grid::plan_to_json(cfg.plan);
    j["link"] = {{"loss_db_a", cfg.link.loss_a_db()}, {"loss_db_b", cfg.link.loss_b_db()}};
    j["detector_a"] = detector_to_json(cfg.detector_a);
    j["detector_b"] = detector_to_json(cfg.detector_b);
    j["umi_a"] = {{"delta_tau_ps", cfg.umi_a.delta_tau_s * 1e12},
                  {"phase_rad", cfg.umi_a.phase_rad}};
    j["umi_b"] = {{"delta_tau_ps", cfg.umi_b.delta_tau_s * 1e12},
                  {"phase_rad", cfg.umi_b.phase_rad}};
    j["coherence"] = {{"tau_ps", cfg.coherence.tau_s * 1e12},
                      {"pump_coherence_us", cfg.coherence.pump_coherence_s * 1e6}};
    j["pair_phase_offsets_rad"] = cfg.pair_phase_offsets_rad;
    j["duty_fraction"] = cfg.duty_fraction;
    j["record_truth"] = cfg.record_truth;
    return j;
}

/// Overlay JSON keys onto an existing config; absent keys keep their values.
inline SimConfig config_from_json(const nlohmann::json& j, SimConfig base) {
    base.duration_s = j.value("duration_s", base.duration_s);
    base.seed = j.value("seed", base.seed);
    if (j.contains("window_ps")) base.window_s = j.at("window_ps").get<double>() * 1e-12;
    base.nbar = j.value("nbar", base.nbar);
    base.v0 = j.value("v0", base.v0);
    if (j.contains("plan")) {
        const auto& pj = j.at("plan");
        if (pj.contains("pairs")) {
            base.plan = grid::plan_from_json(pj);
        } else {
            base.plan = grid::build_plan(pj.value("alice_first", 39), pj.value("alice_last", 46),
                                         pj.value("degenerate_index", 47),
                                         pj.value("spacing_ghz", grid::kDefaultSpacingGhz));
        }
    }
    if (j.contains("link")) {
        const auto& lj = j.at("link");
        base.link = budget::LinkBudget::from_db_loss(
            lj.value("loss_db_a", base.link.loss_a_db()),
            lj.value("loss_db_b", base.link.loss_b_db()));
    }
    if (j.contains("detector_a"))
        base.detector_a = detector_from_json(j.at("detector_a"), base.detector_a);
    if (j.contains("detector_b"))
        base.detector_b = detector_from_json(j.at("detector_b"), base.detector_b);
    if (j.contains("umi_a")) {
        const auto& u = j.at("umi_a");
        base.umi_a.delta_tau_s = u.value("delta_tau_ps", base.umi_a.delta_tau_s * 1e12) * 1e-12;
        base.umi_a.phase_rad = u.value("phase_rad", base.umi_a.phase_rad);
    }
    if (j.contains("umi_b")) {
        const auto& u = j.at("umi_b");
        base.umi_b.delta_tau_s = u.value("delta_tau_ps", base.umi_b.delta_tau_s * 1e12) * 1e-12;
        base.umi_b.phase_rad = u.value("phase_rad", base.umi_b.phase_rad);
    }
    if (j.contains("coherence")) {
        const auto& c = j.at("coherence");
        base.coherence.tau_s = c.value("tau_ps", base.coherence.tau_s * 1e12) * 1e-12;
        base.coherence.pump_coherence_s =
            c.value("pump_coherence_us", base.coherence.pump_coherence_s * 1e6) * 1e-6;
    }
    if (j.contains("pair_phase_offsets_rad"))
        base.pair_phase_offsets_rad =
            j.at("pair_phase_offsets_rad").get<std::vector<double>>();
    base.duty_fraction = j.value("duty_fraction", base.duty_fraction);
    base.record_truth = j.value("record_truth", base.record_truth);
    return base;
}

/// Per channel pair entry of a run report. Rates additive across pairs;
/// visibility fields are NaN until an analysis fills them.
struct PairEntry {
    int pair_index = 0;
    int alice_channel = 0;
    int bob_channel = 0;
    double coincident_event_rate_hz = 0.0;
    double singles_rate_a_hz = 0.0;
    double singles_rate_b_hz = 0.0;
    bool saturated_a = false;
    bool saturated_b = false;
    double visibility = std::nan("");
    double visibility_err = std::nan("");
    double qber = std::nan("");
};

struct Totals {
    double coincident_event_rate_hz = 0.0;
    double singles_rate_a_hz = 0.0;
    double singles_rate_b_hz = 0.0;
};

struct Report {
    std::string scenario;
    std::uint64_t seed = 0;
    double duration_s = 0.0;
    std::string version = kVersion;
    nlohmann::ordered_json config_echo;
    std::vector<PairEntry> pairs;
    Totals totals;
    budget::SecurityMargins security;
    bool any_saturated = false;

    void recompute_totals() {
        totals = {};
        any_saturated = false;
        for (const auto& p : pairs) {
            totals.coincident_event_rate_hz += p.coincident_event_rate_hz;
            totals.singles_rate_a_hz += p.singles_rate_a_hz;
            totals.singles_rate_b_hz += p.singles_rate_b_hz;
            any_saturated = any_saturated || p.saturated_a || p.saturated_b;
        }
    }

    /// Totals must equal the per-pair sums; recheck after any mutation.
    bool totals_consistent(double rel_tol = 1e-9) const {
        Totals sum{};
        for (const auto& p : pairs) {
            sum.coincident_event_rate_hz += p.coincident_event_rate_hz;
            sum.singles_rate_a_hz += p.singles_rate_a_hz;
            sum.singles_rate_b_hz += p.singles_rate_b_hz;
        }
        auto close = [rel_tol](double x, double y) {
            return std::fabs(x - y) <= rel_tol * std::max({std::fabs(x), std::fabs(y), 1.0});
        };
        return close(sum.coincident_event_rate_hz, totals.coincident_event_rate_hz) &&
               close(sum.singles_rate_a_hz, totals.singles_rate_a_hz) &&
               close(sum.singles_rate_b_hz, totals.singles_rate_b_hz);
    }
};

inline Report report_from_sim(const SimConfig& cfg, const montecarlo::SimResult& sim,
                              const std::string& scenario_name) {
    Report rep;
    rep.scenario = scenario_name;
    rep.seed = cfg.seed;
    rep.duration_s = cfg.duration_s;
    rep.config_echo = config_to_json(cfg);
    const double live = sim.live_duration_s;
    for (std::size_t p = 0; p < cfg.plan.size(); ++p) {
        PairEntry e;
        e.pair_index = static_cast<int>(p);
        e.alice_channel = cfg.plan.pairs[p].alice.index;
        e.bob_channel = cfg.plan.pairs[p].bob.index;
        e.coincident_event_rate_hz = sim.pair_stats[p].coincident_events / live;
        e.singles_rate_a_hz = sim.detector_stats[2 * p].accepted_tags / live;
        e.singles_rate_b_hz = sim.detector_stats[2 * p + 1].accepted_tags / live;
        e.saturated_a = sim.detector_stats[2 * p].saturated;
        e.saturated_b = sim.detector_stats[2 * p + 1].saturated;
        rep.pairs.push_back(e);
    }
    rep.recompute_totals();
    return rep;
}

inline nlohmann::ordered_json report_to_json(const Report& rep) {
    nlohmann::ordered_json j;
    j["scenario"] = rep.scenario;
    j["seed"] = rep.seed;
    j["duration_s"] = rep.duration_s;
    j["version"] = rep.version;
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : rep.pairs) {
        nlohmann::ordered_json pj;
        pj["pair_index"] = p.pair_index;
        pj["alice_channel"] = p.alice_channel;
        pj["bob_channel"] = p.bob_channel;
        pj["coincident_event_rate_hz"] = p.coincident_event_rate_hz;
        pj["singles_rate_a_hz"] = p.singles_rate_a_hz;
        pj["singles_rate_b_hz"] = p.singles_rate_b_hz;
        pj["saturated_a"] = p.saturated_a;
        pj["saturated_b"] = p.saturated_b;
        if (!std::isnan(p.visibility)) {
            pj["visibility"] = p.visibility;
            pj["visibility_err"] = p.visibility_err;
            pj["qber"] = p.qber;
        }
        j["pairs"].push_back(pj);
    }
    j["totals"] = {{"coincident_event_rate_hz", rep.totals.coincident_event_rate_hz},
                   {"singles_rate_a_hz", rep.totals.singles_rate_a_hz},
                   {"singles_rate_b_hz", rep.totals.singles_rate_b_hz}};
    j["security"] = {{"bell_violated", rep.security.bell_violated},
                     {"qc_ok", rep.security.qc_ok}};
    j["any_saturated"] = rep.any_saturated;
    j["config"] = rep.config_echo;
    return j;
}

} // namespace entlink::scenario
