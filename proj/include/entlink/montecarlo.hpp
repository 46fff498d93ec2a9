#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "entlink/budget.hpp"
#include "entlink/franson.hpp"
#include "entlink/grid.hpp"
#include "entlink/rng.hpp"

namespace entlink::montecarlo {

using DetectorId = std::uint16_t;

enum class Arm : std::uint8_t { alice = 0, bob = 1 };

inline DetectorId make_detector_id(Arm arm, int channel_index) {
    return static_cast<DetectorId>((static_cast<int>(arm) << 8) | (channel_index & 0xff));
}
inline Arm detector_arm(DetectorId id) { return static_cast<Arm>((id >> 8) & 1); }
inline int detector_channel(DetectorId id) { return id & 0xff; }

struct TimeTag {
    std::int64_t time_ps;
    DetectorId detector;
};

/// Tag origin for diagnostics: darks are kDarkOrigin, photon tags carry a
/// unique emission id shared by the two tags of one coincident pair.
inline constexpr std::int64_t kDarkOrigin = -1;

struct TagStream {
    std::vector<TimeTag> tags;         // sorted ascending in time
    std::vector<std::int64_t> origins; // parallel to tags when truth is recorded

    bool has_truth() const { return origins.size() == tags.size() && !tags.empty(); }
    std::size_t size() const { return tags.size(); }
};

struct SimConfig {
    double duration_s = 1.0;
    std::uint64_t seed = 1;
    double window_s = 250e-12;
    double nbar = 0.015;
    grid::ChannelPlan plan = grid::build_plan(39, 46, 47);
    budget::LinkBudget link = budget::LinkBudget::from_db_loss(11.0, 11.0);
    budget::DetectorSpec detector_a;
    budget::DetectorSpec detector_b;
    franson::UmiSpec umi_a;
    franson::UmiSpec umi_b;
    franson::CoherenceSpec coherence;
    double v0 = 1.0;
    std::vector<double> pair_phase_offsets_rad; // optional residual per-pair offsets
    double duty_fraction = 1.0; // live-time fraction per pair (sequential-scan emulation)
    bool record_truth = false;
    double tag_capacity_per_detector = 3e8;

    double pair_rate_hz() const { return nbar / window_s; }
    double phi_sum(std::size_t pair_index) const {
        double off =
            pair_index < pair_phase_offsets_rad.size() ? pair_phase_offsets_rad[pair_index] : 0.0;
        return umi_a.phase_rad + umi_b.phase_rad + off;
    }

    void validate() const {
        if (!(duration_s > 0.0)) throw std::invalid_argument("sim: duration must be positive");
        if (nbar < 0.0) throw std::invalid_argument("sim: nbar must be non-negative");
        if (!(window_s > 0.0)) throw std::invalid_argument("sim: window must be positive");
        if (plan.empty()) throw std::invalid_argument("sim: channel plan is empty");
        if (v0 < 0.0 || v0 > 1.0) throw std::invalid_argument("sim: v0 must be in [0,1]");
        if (!(duty_fraction > 0.0) || duty_fraction > 1.0)
            throw std::invalid_argument("sim: duty fraction must be in (0,1]");
        link.validate();
        detector_a.validate();
        detector_b.validate();
    }
};

struct PairStats {
    int pair_index = 0;
    std::uint64_t emitted = 0;           // total pair emissions (all outcomes)
    std::uint64_t coincident_events = 0; // emissions that tagged both arms (pre dead time)
};

struct DetectorStats {
    DetectorId detector = 0;
    std::uint64_t raw_tags = 0;      // photon + dark tags before dead time
    std::uint64_t accepted_tags = 0; // after non-paralyzable dead time
    bool saturated = false;          // accepted rate close to the 1/dead_time ceiling
};

struct SimResult {
    std::vector<TagStream> streams; // one per (arm, channel), plan order: A0,B0,A1,B1,...
    std::vector<PairStats> pair_stats;
    std::vector<DetectorStats> detector_stats;
    franson::TimingReport timing;
    double live_duration_s = 0.0; // duty-scaled span of the tag times

    const TagStream& stream_for(Arm arm, std::size_t pair_index) const {
        return streams[2 * pair_index + (arm == Arm::alice ? 0 : 1)];
    }
};

namespace detail {

// Seed-path tags; the numeric values are part of the reproducibility contract.
inline constexpr std::uint64_t kPairStream = 0x70;
inline constexpr std::uint64_t kDarkStream = 0x71;

// Category order is fixed: it keys the RNG substreams.
enum Category : int {
    cat_central_ss = 0,
    cat_central_ll,
    cat_satellite_early,
    cat_satellite_late,
    cat_alice_only_short,
    cat_alice_only_long,
    cat_bob_only_short,
    cat_bob_only_long,
    cat_count,
    cat_nothing = cat_count, // emissions with no surviving tag; counted, never timed
};

struct CategorySpec {
    double rate_hz = 0.0;
    double delay_a_s = 0.0;
    double delay_b_s = 0.0;
    bool tags_alice = false;
    bool tags_bob = false;
};

inline std::array<CategorySpec, cat_count> category_table(const SimConfig& cfg,
                                                          std::size_t pair_index) {
    auto w = franson::detection_weights(cfg.phi_sum(pair_index), cfg.v0, cfg.link.alpha_a,
                                        cfg.link.alpha_b);
    const double lam = cfg.pair_rate_hz();
    const double dta = cfg.umi_a.delta_tau_s;
    const double dtb = cfg.umi_b.delta_tau_s;
    std::array<CategorySpec, cat_count> t{};
    t[cat_central_ss] = {lam * w.central_short_short, 0.0, 0.0, true, true};
    t[cat_central_ll] = {lam * w.central_long_long, dta, dtb, true, true};
    t[cat_satellite_early] = {lam * w.satellite_early, dta, 0.0, true, true};
    t[cat_satellite_late] = {lam * w.satellite_late, 0.0, dtb, true, true};
    t[cat_alice_only_short] = {lam * w.alice_only_short, 0.0, 0.0, true, false};
    t[cat_alice_only_long] = {lam * w.alice_only_long, dta, 0.0, true, false};
    t[cat_bob_only_short] = {lam * w.bob_only_short, 0.0, 0.0, false, true};
    t[cat_bob_only_long] = {lam * w.bob_only_long, 0.0, dtb, false, true};
    return t;
}

inline double arm_jitter_sigma_s(const budget::DetectorSpec& det) {
    // The configured FWHM is the full detection system's (the coincidence
    // peak width); each arm contributes sigma_sys/sqrt(2).
    constexpr double fwhm_to_sigma = 2.3548200450309493; // 2*sqrt(2*ln 2)
    return det.jitter_fwhm_s / fwhm_to_sigma / std::sqrt(2.0);
}

inline std::int64_t to_ps(double seconds) {
    return static_cast<std::int64_t>(std::llround(seconds * 1e12));
}

struct RawTag {
    std::int64_t time_ps;
    std::int64_t origin;
};

/// Generate one detector's photon tags for one channel pair, accumulating the
/// per-category event counts. Both-tag categories replay identically for
/// either arm (jitter draws for both arms are always consumed), so the two
/// detectors can be built independently with bounded memory.
inline void generate_photon_tags(const SimConfig& cfg, std::size_t pair_index, Arm arm,
                                 double live_duration_s, std::vector<RawTag>& out,
                                 std::array<std::uint64_t, cat_count>& category_counts) {
    const auto table = category_table(cfg, pair_index);
    const double sigma_a = arm_jitter_sigma_s(cfg.detector_a);
    const double sigma_b = arm_jitter_sigma_s(cfg.detector_b);
    const std::int64_t end_ps = to_ps(live_duration_s);

    for (int cat = 0; cat < cat_count; ++cat) {
        const auto& spec = table[cat];
        const bool wants = (arm == Arm::alice) ? spec.tags_alice : spec.tags_bob;
        if (!wants || spec.rate_hz <= 0.0) continue;

        rng::Stream stream(rng::derive_seed(
            cfg.seed, {kPairStream, pair_index, static_cast<std::uint64_t>(cat)}));
        double t = 0.0;
        std::uint64_t seq = 0;
        for (;;) {
            t += stream.exponential(spec.rate_hz);
            if (t >= live_duration_s) break;
            double jit = 0.0;
            if (spec.tags_alice) {
                double j = stream.normal(sigma_a);
                if (arm == Arm::alice) jit = j;
            }
            if (spec.tags_bob) {
                double j = stream.normal(sigma_b);
                if (arm == Arm::bob) jit = j;
            }
            const double delay = (arm == Arm::alice) ? spec.delay_a_s : spec.delay_b_s;
            std::int64_t tag = to_ps(t + delay + jit);
            std::int64_t origin =
                static_cast<std::int64_t>((static_cast<std::uint64_t>(pair_index) << 40) |
                                          (static_cast<std::uint64_t>(cat) << 36) |
                                          (seq & 0xfffffffffULL));
            ++seq;
            if (tag < 0 || tag > end_ps) continue; // jitter spill at the run edges
            out.push_back({tag, origin});
        }
        category_counts[cat] = seq;
    }
}

inline void generate_dark_tags(const SimConfig& cfg, Arm arm, int channel,
                               double live_duration_s, std::vector<RawTag>& out) {
    const auto& det = (arm == Arm::alice) ? cfg.detector_a : cfg.detector_b;
    if (det.dark_rate_hz <= 0.0) return;
    rng::Stream stream(rng::derive_seed(cfg.seed, {kDarkStream, static_cast<std::uint64_t>(arm),
                                                   static_cast<std::uint64_t>(channel)}));
    double t = 0.0;
    for (;;) {
        t += stream.exponential(det.dark_rate_hz);
        if (t >= live_duration_s) break;
        out.push_back({to_ps(t), kDarkOrigin});
    }
}

/// Sort and apply non-paralyzable dead time: a tag is accepted iff it is
/// strictly later than the previous accepted tag and the gap is at least the
/// dead time. Ties and in-window tags are discarded.
inline void sort_and_dead_filter(std::vector<RawTag>& raw, std::int64_t dead_ps,
                                 std::uint64_t* raw_count) {
    std::sort(raw.begin(), raw.end(), [](const RawTag& x, const RawTag& y) {
        return x.time_ps != y.time_ps ? x.time_ps < y.time_ps : x.origin < y.origin;
    });
    if (raw_count) *raw_count = raw.size();
    std::size_t kept = 0;
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    for (const RawTag& tag : raw) {
        if (tag.time_ps > last && (dead_ps == 0 || tag.time_ps - last >= dead_ps)) {
            raw[kept++] = tag;
            last = tag.time_ps;
        }
    }
    raw.resize(kept);
}

inline double expected_tags_per_detector(const SimConfig& cfg, Arm arm, double live_duration_s) {
    const auto& det = (arm == Arm::alice) ? cfg.detector_a : cfg.detector_b;
    const double alpha = (arm == Arm::alice) ? cfg.link.alpha_a : cfg.link.alpha_b;
    return live_duration_s * (cfg.pair_rate_hz() * alpha / 2.0 + det.dark_rate_hz);
}

} // namespace detail

/// Simulate the whole link at one phase setting. Pair emissions form a
/// homogeneous Poisson process per channel pair; the disjoint detection
/// outcomes are generated as independent thinned Poisson processes (exact
/// coloring of the emission process), so runtime scales with detected tags,
/// not emissions. Identical configs give bit-identical streams.
inline SimResult simulate(const SimConfig& cfg) {
    cfg.validate();
    SimResult result;
    result.timing = franson::validate_timing(cfg.umi_a, cfg.umi_b, cfg.coherence);
    const double live = cfg.duration_s * cfg.duty_fraction;
    result.live_duration_s = live;

    for (Arm arm : {Arm::alice, Arm::bob})
        if (detail::expected_tags_per_detector(cfg, arm, live) > cfg.tag_capacity_per_detector)
            throw std::invalid_argument(
                "sim: expected tag count exceeds capacity (" +
                std::to_string(static_cast<std::uint64_t>(cfg.tag_capacity_per_detector)) +
                " per detector); shorten the run or reduce nbar");

    result.streams.resize(2 * cfg.plan.size());
    result.pair_stats.resize(cfg.plan.size());
    result.detector_stats.resize(2 * cfg.plan.size());

    for (std::size_t p = 0; p < cfg.plan.size(); ++p) {
        auto& stats = result.pair_stats[p];
        stats.pair_index = static_cast<int>(p);
        std::array<std::uint64_t, detail::cat_count> counts{};

        for (Arm arm : {Arm::alice, Arm::bob}) {
            const int channel = (arm == Arm::alice) ? cfg.plan.pairs[p].alice.index
                                                    : cfg.plan.pairs[p].bob.index;
            const auto& det = (arm == Arm::alice) ? cfg.detector_a : cfg.detector_b;
            const std::size_t slot = 2 * p + (arm == Arm::alice ? 0 : 1);

            std::vector<detail::RawTag> raw;
            raw.reserve(static_cast<std::size_t>(
                std::min(detail::expected_tags_per_detector(cfg, arm, live) * 1.05 + 64.0,
                         cfg.tag_capacity_per_detector)));
            detail::generate_photon_tags(cfg, p, arm, live, raw, counts);
            detail::generate_dark_tags(cfg, arm, channel, live, raw);

            auto& dstats = result.detector_stats[slot];
            dstats.detector = make_detector_id(arm, channel);
            detail::sort_and_dead_filter(raw, detail::to_ps(det.dead_time_s), &dstats.raw_tags);
            dstats.accepted_tags = raw.size();
            if (det.dead_time_s > 0.0)
                dstats.saturated = dstats.accepted_tags >= 0.8 * (live / det.dead_time_s);

            auto& stream = result.streams[slot];
            stream.tags.reserve(raw.size());
            if (cfg.record_truth) stream.origins.reserve(raw.size());
            for (const auto& tag : raw) {
                stream.tags.push_back({tag.time_ps, dstats.detector});
                if (cfg.record_truth) stream.origins.push_back(tag.origin);
            }
        }

        // Emissions = timed outcomes + the untimed remainder, one Poisson draw.
        const auto table = detail::category_table(cfg, p);
        double any_rate = 0.0;
        std::uint64_t timed = 0;
        for (const auto& spec : table) any_rate += spec.rate_hz;
        for (int cat = 0; cat < detail::cat_count; ++cat) {
            timed += counts[cat];
            if (table[cat].tags_alice && table[cat].tags_bob)
                stats.coincident_events += counts[cat];
        }
        double nothing_rate = std::max(cfg.pair_rate_hz() - any_rate, 0.0);
        rng::Stream nothing_stream(rng::derive_seed(
            cfg.seed, {detail::kPairStream, p, static_cast<std::uint64_t>(detail::cat_nothing)}));
        stats.emitted = timed + nothing_stream.poisson(nothing_rate * live);
    }
    return result;
}

/// Merge sorted streams into one sorted stream, stable for equal times
/// (earlier input wins). Throws on unsorted input. Truth labels survive only
/// if every input carries them.
inline TagStream merge_streams(const std::vector<TagStream>& streams) {
    TagStream merged;
    bool keep_truth = !streams.empty();
    std::size_t total = 0;
    for (const auto& s : streams) {
        total += s.tags.size();
        if (!s.tags.empty() && s.origins.size() != s.tags.size()) keep_truth = false;
    }
    merged.tags.reserve(total);
    if (keep_truth) merged.origins.reserve(total);

    using Head = std::pair<std::int64_t, std::size_t>; // (time, stream index)
    auto cmp = [](const Head& x, const Head& y) {
        return x.first != y.first ? x.first > y.first : x.second > y.second;
    };
    std::priority_queue<Head, std::vector<Head>, decltype(cmp)> heap(cmp);
    std::vector<std::size_t> cursor(streams.size(), 0);
    for (std::size_t i = 0; i < streams.size(); ++i)
        if (!streams[i].tags.empty()) heap.push({streams[i].tags[0].time_ps, i});

    while (!heap.empty()) {
        auto [time, idx] = heap.top();
        heap.pop();
        std::size_t& c = cursor[idx];
        merged.tags.push_back(streams[idx].tags[c]);
        if (keep_truth) merged.origins.push_back(streams[idx].origins[c]);
        ++c;
        if (c < streams[idx].tags.size()) {
            std::int64_t next = streams[idx].tags[c].time_ps;
            if (next < time)
                throw std::invalid_argument("merge: input stream " + std::to_string(idx) +
                                            " is not sorted");
            heap.push({next, idx});
        }
    }
    if (!keep_truth) merged.origins.clear();
    return merged;
}

} // namespace entlink::montecarlo
