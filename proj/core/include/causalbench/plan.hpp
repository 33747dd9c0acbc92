#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "causalbench/intervene.hpp"
#include "causalbench/synthgen.hpp"

namespace causalbench::harness {

enum class CellKind { synth, arms, real };

struct PlanCell {
    std::string id;
    std::string group;  // report grouping, e.g. "grid" vs "causeme_sweep"
    CellKind kind = CellKind::synth;

    synthgen::GeneratorSpec gen;
    int method_lag = 1;
    // per-method lag budget, overriding method_lag (e.g. the lagged
    // bottleneck variant runs deeper than the lag-1 classical methods)
    std::map<std::string, int> lag_overrides;

    int lag_for(const std::string& method) const {
        auto it = lag_overrides.find(method);
        return it == lag_overrides.end() ? method_lag : it->second;
    }

    // arms cells
    intervene::InterventionScheme scheme;
    long t_obs = 0;
    std::vector<std::string> arms;  // subset of {obs, combined, obs_big}

    // real cells
    std::filesystem::path manifest;
};

// A fully enumerated stage run: every cell is specified before anything
// executes. Plan files are plain text: `key: value` lines plus one
// `cell: k=v k=v ...` line per cell.
struct ExperimentPlan {
    std::string stage;  // f1 f2 f3 f4 f5 survives
    std::uint64_t base_seed = 20260810;
    int n_seeds = 10;
    std::vector<std::string> methods;
    std::vector<PlanCell> cells;
    std::filesystem::path out_dir;

    // survives stage: bottleneck (d, lambda) grid
    std::vector<int> d_grid;
    std::vector<double> lambda_grid;

    void validate() const;  // throws PlanError; performs no side effects

    static ExperimentPlan load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // Desk-scale defaults for each stage. `out_root` defaults to "out", or
    // the CAUSALBENCH_OUT environment variable when set.
    static ExperimentPlan default_plan(const std::string& stage,
                                       const std::filesystem::path& out_root = {});
};

std::filesystem::path default_out_root();

}  // namespace causalbench::harness
