#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <tuple>
#include <vector>

#include "causalbench/synthgen.hpp"
#include "causalbench/types.hpp"

namespace causalbench::intervene {

enum class Kind { do_clamp, soft_noise, random_forcing };

std::string kind_name(Kind kind);
Kind parse_kind(const std::string& name);

// One intervention semantics applied in consecutive per-variable episodes.
// `scale` multiplies the variable's observational standard deviation: the
// clamp constant is ±scale·sd, soft noise has sd scale·sd, random forcing
// replaces the value by scale·sd·eps with fresh standard Gaussian eps.
struct InterventionScheme {
    Kind kind = Kind::random_forcing;
    double scale = 2.0;
    int episode_len = 50;
    std::vector<int> order;  // episode order over variables; empty = 0..K-1

    void validate(int k) const;
};

struct LogEntry {
    long t = 0;
    int var = 0;
    Kind kind = Kind::do_clamp;
    double value = 0.0;  // clamped/forced value, or the noise sd for soft
};

struct InterventionLog {
    std::vector<LogEntry> entries;

    void save_csv(const std::filesystem::path& path) const;
};

// The three arms of the size-match experiment. obs is a prefix of obs_big
// (identical innovations); combined shares the prefix and then runs one
// intervention episode per variable.
struct ArmSet {
    Series obs;
    Series combined;
    Series obs_big;
    LaggedAdjacency truth;
    std::shared_ptr<const InterventionLog> log;  // combined arm's log
    long t_obs = 0;
    int episode_len = 0;

    // Three series CSVs plus a manifest naming roles and sizes.
    void save(const std::filesystem::path& dir) const;
};

// Simulates spec.t recorded steps with the episodes occupying the final
// K·episode_len rows (one per variable, in scheme order). `seed` replaces
// spec.seed. Episode constants and noise come from a dedicated stream, so
// the innovations match a plain run of the same spec bit for bit.
std::tuple<Series, LaggedAdjacency, InterventionLog> simulate_with_interventions(
    const synthgen::GeneratorSpec& spec, const InterventionScheme& scheme, std::uint64_t seed);

// obs = first t_obs rows; combined = obs followed by K episodes; obs_big =
// the same process run observationally to the combined length.
ArmSet build_arms(const synthgen::GeneratorSpec& spec, const InterventionScheme& scheme,
                  long t_obs, std::uint64_t seed);

}  // namespace causalbench::intervene
