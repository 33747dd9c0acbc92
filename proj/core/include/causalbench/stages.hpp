#pragma once

#include <filesystem>
#include <vector>

#include "causalbench/evalstats.hpp"
#include "causalbench/plan.hpp"
#include "causalbench/registry.hpp"

namespace causalbench::harness {

struct StageOptions {
    int jobs = 0;       // worker threads; 0 = hardware concurrency
    bool quiet = false; // suppress per-job progress lines on stderr
};

struct StageResult {
    std::vector<evalstats::RunRecord> records;  // canonically sorted
    int failures = 0;
    bool seed_collision = false;
    std::filesystem::path ledger_path;
    std::vector<std::filesystem::path> report_files;
};

// Executes every (cell, seed, method[, arm]) combination of the plan,
// writes the canonical ledger plus the stage reports, and returns both.
// Individual cell failures are recorded in the ledger (flags = error:...)
// rather than aborting the stage. Real-data cells whose files are missing
// are skipped with a warning. Rerunning the same plan reproduces identical
// ledger rows apart from wall_time.
StageResult run_stage(const ExperimentPlan& plan, const MethodRegistry& registry,
                      const StageOptions& opts = {});

// Regenerates the ledger-derived report files for a stage.
std::vector<std::filesystem::path> emit_reports(
    const std::vector<evalstats::RunRecord>& records, const ExperimentPlan& plan);

// Grid-cell method name used by the survives stage, e.g. bottleneck_d20_l0.001.
std::string bottleneck_grid_name(int d, double lambda);

}  // namespace causalbench::harness
