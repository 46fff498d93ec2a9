#pragma once

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace entlink::grid {

/// Speed of light in nm*THz (wavelength[nm] = kSpeedOfLight / frequency[THz]).
inline constexpr double kSpeedOfLight = 299792.458;

/// Grid anchor: channel 0 sits at 190.0 THz; index counts spacing steps upward.
inline constexpr double kGridOriginThz = 190.0;
inline constexpr double kGridCeilingThz = 200.0;
inline constexpr double kDefaultSpacingGhz = 100.0;

inline int max_channel_index(double spacing_ghz) {
    return static_cast<int>(std::floor((kGridCeilingThz - kGridOriginThz) * 1000.0 / spacing_ghz));
}

inline double channel_frequency_thz(int index, double spacing_ghz = kDefaultSpacingGhz) {
    if (spacing_ghz <= 0.0)
        throw std::invalid_argument("grid: channel spacing must be positive");
    if (index < 0 || index > max_channel_index(spacing_ghz))
        throw std::out_of_range("grid: channel index " + std::to_string(index) + " outside grid");
    return kGridOriginThz + index * spacing_ghz * 1e-3;
}

inline double channel_wavelength_nm(int index, double spacing_ghz = kDefaultSpacingGhz) {
    return kSpeedOfLight / channel_frequency_thz(index, spacing_ghz);
}

/// One grid channel: index plus derived center frequency and wavelength.
struct ItuChannel {
    int index = 0;
    double frequency_thz = 0.0;
    double wavelength_nm = 0.0;

    static ItuChannel at(int index, double spacing_ghz = kDefaultSpacingGhz) {
        double f = channel_frequency_thz(index, spacing_ghz);
        return {index, f, kSpeedOfLight / f};
    }

    bool operator==(const ItuChannel&) const = default;
};

/// Energy-conserving channel pair: indices sum to twice the degenerate index,
/// so the two center frequencies sum to the pump frequency.
struct ChannelPair {
    ItuChannel alice;
    ItuChannel bob;

    bool operator==(const ChannelPair&) const = default;
};

/// The partner index of `index` when pairs mirror around `degenerate_index`.
inline int conjugate_channel(int index, int degenerate_index,
                             double spacing_ghz = kDefaultSpacingGhz) {
    int conj = 2 * degenerate_index - index;
    if (conj < 0 || conj > max_channel_index(spacing_ghz))
        throw std::out_of_range("grid: conjugate channel " + std::to_string(conj) +
                                " outside grid");
    return conj;
}

struct ChannelPlan {
    int degenerate_index = 47;
    double spacing_ghz = kDefaultSpacingGhz;
    std::vector<ChannelPair> pairs;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }

    /// Pump frequency implied by the degenerate channel (twice its center).
    double pump_frequency_thz() const {
        return 2.0 * channel_frequency_thz(degenerate_index, spacing_ghz);
    }
};

/// Build one pair per Alice channel in [alice_first, alice_last]; Bob gets the
/// conjugate. An empty interval (alice_first > alice_last) gives an empty plan.
inline ChannelPlan build_plan(int alice_first, int alice_last, int degenerate_index,
                              double spacing_ghz = kDefaultSpacingGhz) {
    ChannelPlan plan;
    plan.degenerate_index = degenerate_index;
    plan.spacing_ghz = spacing_ghz;
    if (alice_first > alice_last) return plan;

    if (alice_first <= degenerate_index && degenerate_index <= alice_last)
        throw std::invalid_argument("grid: plan range must exclude the degenerate channel");

    for (int idx = alice_first; idx <= alice_last; ++idx) {
        int conj = conjugate_channel(idx, degenerate_index, spacing_ghz);
        if (conj >= alice_first && conj <= alice_last)
            throw std::invalid_argument("grid: conjugate of channel " + std::to_string(idx) +
                                        " collides with the requested range");
        plan.pairs.push_back({ItuChannel::at(idx, spacing_ghz), ItuChannel::at(conj, spacing_ghz)});
    }
    return plan;
}

/// How many disjoint pairs fit a symmetric emission bandwidth (nm) around the
/// degenerate channel. Channel pitch in nm is evaluated at degeneracy.
inline int pair_capacity(double bandwidth_nm, int degenerate_index,
                         double spacing_ghz = kDefaultSpacingGhz) {
    double lambda_d = channel_wavelength_nm(degenerate_index, spacing_ghz);
    double pitch_nm = lambda_d * lambda_d * spacing_ghz * 1e-3 / kSpeedOfLight;
    return static_cast<int>(std::floor(0.5 * bandwidth_nm / pitch_nm));
}

struct AllocationScenario {
    enum class Mode { multi_user, throughput };
    Mode mode = Mode::throughput;
    int users = 1;
    int channels_per_user = 1;
};

/// Split a plan between users. multi_user hands each user a disjoint block of
/// channels_per_user pairs (plan order); throughput hands everything to one.
inline std::vector<ChannelPlan> allocate(const ChannelPlan& plan,
                                         const AllocationScenario& scenario) {
    std::vector<ChannelPlan> result;
    if (scenario.mode == AllocationScenario::Mode::throughput) {
        result.push_back(plan);
        return result;
    }
    if (scenario.users < 1 || scenario.channels_per_user < 1)
        throw std::invalid_argument("grid: allocation needs at least one user and one channel");
    std::size_t needed =
        static_cast<std::size_t>(scenario.users) * static_cast<std::size_t>(scenario.channels_per_user);
    if (needed > plan.size())
        throw std::invalid_argument("grid: scenario needs " + std::to_string(needed) +
                                    " pairs, plan has " + std::to_string(plan.size()));
    std::size_t next = 0;
    for (int u = 0; u < scenario.users; ++u) {
        ChannelPlan user_plan;
        user_plan.degenerate_index = plan.degenerate_index;
        user_plan.spacing_ghz = plan.spacing_ghz;
        for (int c = 0; c < scenario.channels_per_user; ++c)
            user_plan.pairs.push_back(plan.pairs[next++]);
        result.push_back(std::move(user_plan));
    }
    return result;
}

inline nlohmann::ordered_json plan_to_json(const ChannelPlan& plan) {
    nlohmann::ordered_json j;
    j["degenerate_index"] = plan.degenerate_index;
    j["spacing_ghz"] = plan.spacing_ghz;
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : plan.pairs)
        j["pairs"].push_back({{"alice", p.alice.index}, {"bob", p.bob.index}});
    return j;
}

inline ChannelPlan plan_from_json(const nlohmann::json& j) {
    ChannelPlan plan;
    plan.degenerate_index = j.at("degenerate_index").get<int>();
    plan.spacing_ghz = j.value("spacing_ghz", kDefaultSpacingGhz);
    std::set<int> used;
    for (const auto& p : j.at("pairs")) {
        int a = p.at("alice").get<int>();
        int b = p.at("bob").get<int>();
        if (a + b != 2 * plan.degenerate_index)
            throw std::invalid_argument("grid: pair " + std::to_string(a) + "-" +
                                        std::to_string(b) + " breaks energy conservation");
        if (!used.insert(a).second || !used.insert(b).second)
            throw std::invalid_argument("grid: channel used twice in plan");
        plan.pairs.push_back(
            {ItuChannel::at(a, plan.spacing_ghz), ItuChannel::at(b, plan.spacing_ghz)});
    }
    return plan;
}

} // namespace entlink::grid
