#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalbench/types.hpp"

namespace causalbench::evalstats {

// One (experiment, config-cell, seed, method, arm) result row.
struct RunRecord {
    std::string stage;
    std::string cell;
    std::uint64_t seed = 0;
    std::string method;
    std::string arm = "-";
    double auroc = std::numeric_limits<double>::quiet_NaN();
    double mse = std::numeric_limits<double>::quiet_NaN();  // NaN = absent
    std::string flags;
    double wall_time = 0.0;

    bool has_mse() const { return std::isfinite(mse); }
};

// Append-only CSV ledger: (stage, cell, seed, method, arm, auroc, mse, flags,
// wall_time). Row order is canonicalized by the harness before writing.
void save_ledger(const std::filesystem::path& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> load_ledger(const std::filesystem::path& path);

// Exact Mann-Whitney AUROC with mid-rank tie handling.
// Throws UndefinedAuroc when labels are all-positive or all-negative.
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// Flat-lag AUROC of a score tensor against ground truth, self-pairs excluded
// at every lag. When the two sides disagree on lag depth, scores are
// collapsed by max-over-lags and truth by any-lag OR before comparison.
double auroc_flat_lag(const ScoreMatrix& scores, const LaggedAdjacency& truth);

// Same, with the given ordered (effect, cause) pairs removed from the grid
// at every lag. Ground-truth policies that exclude labeled pairs (rather
// than recode them as negatives) evaluate through this overload.
double auroc_flat_lag(const ScoreMatrix& scores, const LaggedAdjacency& truth,
                      const std::vector<std::pair<int, int>>& excluded_pairs);

struct PairedTestResult {
    std::string label;               // method pair or arm pair
    std::vector<double> deltas;      // per seed
    double mean_delta = 0.0;
    double p_ttest = 1.0;            // two-sided paired t-test
    double p_sign = 1.0;             // exact two-sided sign test
    bool ttest_degenerate = false;   // zero-variance deltas
    int n() const { return static_cast<int>(deltas.size()); }
};

// Paired t-test plus an exact sign test as the distribution-free companion.
// Requires n >= 3. Zero-variance deltas flag the t-test as degenerate.
PairedTestResult paired_test(const std::vector<double>& deltas_by_seed,
                             const std::string& label = "");

// Per-cell comparison of one reference method against the best competitor.
struct WinRateRow {
    std::string cell;
    double ref_value = 0.0;
    double best_competitor_value = 0.0;
    std::string best_competitor;
    bool ref_wins = false;  // strict-win convention; ties count as non-wins
    bool tie = false;
};

struct WinRateTable {
    std::string metric;  // "auroc" or "mse"
    std::string reference;
    std::vector<WinRateRow> rows;
    double mean_delta = 0.0;    // mean(ref - best competitor) over cells
    double win_rate = 0.0;      // fraction of cells where reference strictly wins
    double loss_rate = 0.0;
    double tie_rate = 0.0;
    std::map<std::string, int> best_competitor_tally;
};

// Aggregates records per (cell, method) by the mean over seeds, then scores
// the reference against the best competitor per cell. Cells missing the
// reference or lacking any competitor raise IncompleteGrid naming them.
// AUROC: higher wins; MSE: lower wins, record rows without MSE are ignored.
WinRateTable win_rate_table(const std::vector<RunRecord>& records,
                            const std::string& reference_method,
                            const std::string& metric);

}  // namespace causalbench::evalstats
