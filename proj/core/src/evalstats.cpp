#include "causalbench/evalstats.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <numeric>
#include <set>

#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"

namespace causalbench::evalstats {

void save_ledger(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    csv::Table table;
    table.header = {"stage", "cell", "seed", "method", "arm", "auroc", "mse", "flags", "wall_time"};
    for (const auto& r : records) {
        table.rows.push_back({r.stage, r.cell, std::to_string(r.seed), r.method, r.arm,
                              std::isfinite(r.auroc) ? csv::format_double(r.auroc) : "",
                              r.has_mse() ? csv::format_double(r.mse) : "", r.flags,
                              csv::format_double(r.wall_time)});
    }
    csv::write_file(path, table);
}

std::vector<RunRecord> load_ledger(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    std::vector<RunRecord> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.size() != 9) throw IngestionError("bad ledger row in " + path.string());
        RunRecord r;
        r.stage = row[0];
        r.cell = row[1];
        r.seed = std::stoull(row[2]);
        r.method = row[3];
        r.arm = row[4];
        r.auroc = row[5].empty() ? std::numeric_limits<double>::quiet_NaN()
                                 : csv::parse_double(row[5]);
        r.mse = row[6].empty() ? std::numeric_limits<double>::quiet_NaN()
                               : csv::parse_double(row[6]);
        r.flags = row[7];
        r.wall_time = csv::parse_double(row[8]);
        out.push_back(std::move(r));
    }
    return out;
}

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) throw ParameterError("auroc: size mismatch");
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (auto l : labels) n_pos += (l != 0);
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw UndefinedAuroc("auroc undefined: need at least one positive and one negative");
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Mid-rank handling: every member of a tie group gets the average rank.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
        for (size_t m = i; m < j; ++m) {
            if (labels[order[m]]) rank_sum_pos += mid_rank;
        }
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auroc_flat_lag(const ScoreMatrix& scores, const LaggedAdjacency& truth) {
    return auroc_flat_lag(scores, truth, {});
}

double auroc_flat_lag(const ScoreMatrix& scores_in, const LaggedAdjacency& truth_in,
                      const std::vector<std::pair<int, int>>& excluded_pairs) {
    if (scores_in.k != truth_in.k) throw ParameterError("auroc_flat_lag: K mismatch");

    const bool collapse = scores_in.max_lag != truth_in.max_lag;
    const ScoreMatrix scores = collapse ? scores_in.collapse_static() : scores_in;
    const LaggedAdjacency truth = collapse ? truth_in.collapse_static() : truth_in;

    std::set<std::pair<int, int>> excluded(excluded_pairs.begin(), excluded_pairs.end());
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    s.reserve(static_cast<size_t>(scores.k) * scores.k * scores.max_lag);
    for (int tau = 1; tau <= scores.max_lag; ++tau) {
        for (int i = 0; i < scores.k; ++i) {
            for (int j = 0; j < scores.k; ++j) {
                if (i == j) continue;
                if (excluded.count({i, j})) continue;
                s.push_back(scores.at(i, j, tau));
                y.push_back(truth.edge(i, j, tau) ? 1 : 0);
            }
        }
    }
    return auroc(s, y);
}

PairedTestResult paired_test(const std::vector<double>& deltas, const std::string& label) {
    const int n = static_cast<int>(deltas.size());
    if (n < 3) throw ParameterError("paired_test requires n >= 3");

    PairedTestResult res;
    res.label = label;
    res.deltas = deltas;
    res.mean_delta = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;

    double ss = 0.0;
    for (double d : deltas) ss += (d - res.mean_delta) * (d - res.mean_delta);
    const double sd = std::sqrt(ss / (n - 1));

    if (sd <= 1e-12 * std::max(1.0, std::abs(res.mean_delta))) {
        res.ttest_degenerate = true;
        res.p_ttest = 1.0;
    } else {
        const double tstat = res.mean_delta / (sd / std::sqrt(static_cast<double>(n)));
        boost::math::students_t dist(n - 1);
        res.p_ttest = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(tstat)));
        res.p_ttest = std::clamp(res.p_ttest, std::numeric_limits<double>::min(), 1.0);
    }

    int nz = 0, pos = 0;
    for (double d : deltas) {
        if (d != 0.0) {
            ++nz;
            if (d > 0.0) ++pos;
        }
    }
    if (nz == 0) {
        res.p_sign = 1.0;
    } else {
        boost::math::binomial dist(nz, 0.5);
        const int lo = std::min(pos, nz - pos);
        res.p_sign = std::min(1.0, 2.0 * boost::math::cdf(dist, lo));
    }
    return res;
}

WinRateTable win_rate_table(const std::vector<RunRecord>& records,
                            const std::string& reference_method, const std::string& metric) {
    if (metric != "auroc" && metric != "mse") throw ParameterError("unknown metric " + metric);
    const bool lower_is_better = metric == "mse";

    // Mean over seeds per (cell, method).
    std::map<std::string, std::map<std::string, std::pair<double, int>>> by_cell;
    for (const auto& r : records) {
        const double v = metric == "auroc" ? r.auroc : r.mse;
        if (!std::isfinite(v)) continue;
        auto& acc = by_cell[r.cell][r.method];
        acc.first += v;
        acc.second += 1;
    }

    WinRateTable table;
    table.metric = metric;
    table.reference = reference_method;

    std::vector<std::string> missing;
    int wins = 0, losses = 0, ties = 0;
    double delta_sum = 0.0;
    for (const auto& [cell, methods] : by_cell) {
        auto ref_it = methods.find(reference_method);
        if (ref_it == methods.end() || methods.size() < 2) {
            missing.push_back(cell);
            continue;
        }
        const double ref = ref_it->second.first / ref_it->second.second;
        std::string best_name;
        double best = lower_is_better ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity();
        for (const auto& [name, acc] : methods) {
            if (name == reference_method) continue;
            const double v = acc.first / acc.second;
            const bool better = lower_is_better ? v < best : v > best;
            if (better) {
                best = v;
                best_name = name;
            }
        }
        WinRateRow row;
        row.cell = cell;
        row.ref_value = ref;
        row.best_competitor_value = best;
        row.best_competitor = best_name;
        row.tie = ref == best;
        row.ref_wins = lower_is_better ? ref < best : ref > best;
        delta_sum += ref - best;
        if (row.ref_wins) ++wins;
        else if (row.tie) ++ties;
        else ++losses;
        table.best_competitor_tally[best_name] += 1;
        table.rows.push_back(std::move(row));
    }
    if (!missing.empty()) {
        std::string msg = "win_rate_table: cells missing reference or competitors:";
        for (const auto& c : missing) msg += " " + c;
        throw IncompleteGrid(msg);
    }
    if (table.rows.empty()) throw IncompleteGrid("win_rate_table: no complete cells");

    const double n = static_cast<double>(table.rows.size());
    table.mean_delta = delta_sum / n;
    table.win_rate = wins / n;
    table.loss_rate = losses / n;
    table.tie_rate = ties / n;
    return table;
}

}  // namespace causalbench::evalstats
