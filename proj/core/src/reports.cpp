#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/stages.hpp"

namespace causalbench::harness {

namespace {

using evalstats::RunRecord;

std::string fmt(double v, int digits = 3) {
    if (!std::isfinite(v)) return "-";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string fmt_signed(double v, int digits = 3) {
    if (!std::isfinite(v)) return "-";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%+.*f", digits, v);
    return buf;
}

std::string fmt_p(double p) {
    if (!std::isfinite(p)) return "-";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.1e", p);
    return buf;
}

std::string align_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<size_t> widths;
    for (const auto& row : rows) {
        if (row.size() > widths.size()) widths.resize(row.size(), 0);
        for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    std::ostringstream os;
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            os << row[c];
            if (c + 1 < row.size()) os << std::string(widths[c] - row[c].size() + 2, ' ');
        }
        os << '\n';
    }
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

// Methods expected per plan, including the survives bottleneck grid.
std::vector<std::string> expected_methods(const ExperimentPlan& plan) {
    std::vector<std::string> methods = plan.methods;
    if (plan.stage == "survives") {
        for (int d : plan.d_grid) {
            for (double lam : plan.lambda_grid) methods.push_back(bottleneck_grid_name(d, lam));
        }
    }
    return methods;
}

void check_completeness(const std::vector<RunRecord>& records, const ExperimentPlan& plan) {
    std::set<std::string> have;
    for (const auto& r : records) {
        have.insert(r.cell + "|" + std::to_string(r.seed) + "|" + r.method + "|" + r.arm);
    }
    const auto methods = expected_methods(plan);
    std::vector<std::string> missing;
    for (const auto& cell : plan.cells) {
        const std::vector<std::string> arms =
            cell.kind == CellKind::arms ? cell.arms : std::vector<std::string>{"-"};
        for (int s = 0; s < plan.n_seeds; ++s) {
            for (const auto& m : methods) {
                for (const auto& a : arms) {
                    const std::string key =
                        cell.id + "|" + std::to_string(s) + "|" + m + "|" + a;
                    if (!have.count(key)) missing.push_back(key);
                }
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "ledger incomplete for stage " + plan.stage + "; missing:";
        for (size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
        if (missing.size() > 20) msg += " (+" + std::to_string(missing.size() - 20) + " more)";
        throw IncompleteGrid(msg);
    }
    if (records.empty()) throw IncompleteGrid("empty ledger for stage " + plan.stage);
}

struct CellMethodStats {
    std::vector<double> aurocs;
    std::vector<double> mses;

    double mean_auroc() const {
        if (aurocs.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0;
        for (double v : aurocs) s += v;
        return s / aurocs.size();
    }
    double std_auroc() const {
        if (aurocs.size() < 2) return 0.0;
        const double m = mean_auroc();
        double ss = 0;
        for (double v : aurocs) ss += (v - m) * (v - m);
        return std::sqrt(ss / (aurocs.size() - 1));
    }
    double mean_mse() const {
        if (mses.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0;
        for (double v : mses) s += v;
        return s / mses.size();
    }
};

// key: cell | method | arm
std::map<std::string, CellMethodStats> aggregate(const std::vector<RunRecord>& records) {
    std::map<std::string, CellMethodStats> agg;
    for (const auto& r : records) {
        auto& s = agg[r.cell + "|" + r.method + "|" + r.arm];
        if (std::isfinite(r.auroc)) s.aurocs.push_back(r.auroc);
        if (std::isfinite(r.mse)) s.mses.push_back(r.mse);
    }
    return agg;
}

std::vector<std::filesystem::path> emit_summary(const std::vector<RunRecord>& records,
                                                const ExperimentPlan& plan,
                                                const std::string& name) {
    auto agg = aggregate(records);
    csv::Table table;
    table.header = {"cell", "method", "mean_auroc", "std_auroc", "mean_mse", "n"};
    std::vector<std::vector<std::string>> text{
        {"cell", "method", "auroc (mean+/-std)", "mse"}};
    for (const auto& cell : plan.cells) {
        for (const auto& m : expected_methods(plan)) {
            auto it = agg.find(cell.id + "|" + m + "|-");
            if (it == agg.end()) continue;
            const auto& s = it->second;
            table.rows.push_back({cell.id, m, csv::format_double(s.mean_auroc()),
                                  csv::format_double(s.std_auroc()),
                                  s.mses.empty() ? "" : csv::format_double(s.mean_mse()),
                                  std::to_string(s.aurocs.size())});
            text.push_back({cell.id, m, fmt(s.mean_auroc()) + " +/- " + fmt(s.std_auroc()),
                            s.mses.empty() ? "-" : fmt(s.mean_mse(), 4)});
        }
    }
    const auto csv_path = plan.out_dir / (name + ".csv");
    const auto txt_path = plan.out_dir / (name + ".txt");
    csv::write_file(csv_path, table);
    write_text(txt_path, align_table(text));
    return {csv_path, txt_path};
}

std::vector<std::filesystem::path> emit_f2(const std::vector<RunRecord>& records,
                                           const ExperimentPlan& plan) {
    std::map<std::string, std::string> cell_group;
    for (const auto& cell : plan.cells) cell_group[cell.id] = cell.group;

    std::vector<RunRecord> grid_records;
    std::vector<RunRecord> sweep_records;
    for (const auto& r : records) {
        if (cell_group[r.cell] == "grid") grid_records.push_back(r);
        else sweep_records.push_back(r);
    }

    auto auroc_table = evalstats::win_rate_table(grid_records, "bottleneck", "auroc");
    auto mse_table = evalstats::win_rate_table(grid_records, "bottleneck", "mse");
    const int n_cells = static_cast<int>(auroc_table.rows.size());

    auto tally = [&](const evalstats::WinRateTable& t) {
        std::string s;
        for (const auto& [name, count] : t.best_competitor_tally) {
            if (!s.empty()) s += ", ";
            s += name + " (" + std::to_string(count) + "/" + std::to_string(n_cells) + ")";
        }
        return s;
    };

    std::ostringstream txt;
    txt << "bottleneck vs tuned baselines, stress grid (" << n_cells << " cells)\n\n";
    txt << align_table({
        {"metric", "mean delta", "bottleneck win rate"},
        {"flat-lag auroc", fmt_signed(auroc_table.mean_delta),
         fmt(100.0 * auroc_table.win_rate, 1) + "% (" +
             std::to_string(static_cast<int>(std::lround(auroc_table.win_rate * n_cells))) +
             "/" + std::to_string(n_cells) + ")"},
        {"prediction mse", fmt_signed(mse_table.mean_delta),
         fmt(100.0 * mse_table.win_rate, 1) + "% (" +
             std::to_string(static_cast<int>(std::lround(mse_table.win_rate * n_cells))) + "/" +
             std::to_string(n_cells) + ")"},
    });
    txt << "\nbest baseline by auroc: " << tally(auroc_table) << "\n";
    txt << "best baseline by mse:   " << tally(mse_table) << "\n";

    csv::Table cells_csv;
    cells_csv.header = {"cell", "metric", "bottleneck", "best_baseline", "best_baseline_value",
                        "bottleneck_wins"};
    for (const auto* t : {&auroc_table, &mse_table}) {
        for (const auto& row : t->rows) {
            cells_csv.rows.push_back({row.cell, t->metric, csv::format_double(row.ref_value),
                                      row.best_competitor,
                                      csv::format_double(row.best_competitor_value),
                                      row.ref_wins ? "1" : "0"});
        }
    }

    const auto txt_path = plan.out_dir / "table1.txt";
    const auto csv_path = plan.out_dir / "table1_cells.csv";
    write_text(txt_path, txt.str());
    csv::write_file(csv_path, cells_csv);

    std::vector<std::filesystem::path> files{txt_path, csv_path};
    if (!sweep_records.empty()) {
        ExperimentPlan sweep_plan = plan;
        sweep_plan.cells.clear();
        for (const auto& cell : plan.cells) {
            if (cell.group == "causeme_sweep") sweep_plan.cells.push_back(cell);
        }
        auto extra = emit_summary(sweep_records, sweep_plan, "f2_causeme_sweep");
        files.insert(files.end(), extra.begin(), extra.end());
    }
    return files;
}

struct GapLine {
    std::string cell, method;
    int n = 0;
    double mean_gap = std::numeric_limits<double>::quiet_NaN();
    double p_ttest = std::numeric_limits<double>::quiet_NaN();
    double p_sign = std::numeric_limits<double>::quiet_NaN();
    double mean_conf = std::numeric_limits<double>::quiet_NaN();
    double p_conf = std::numeric_limits<double>::quiet_NaN();
};

std::vector<std::filesystem::path> emit_gaps(const std::vector<RunRecord>& records,
                                             const ExperimentPlan& plan) {
    // per (cell, method, arm): seed -> auroc
    std::map<std::string, std::map<std::uint64_t, double>> per_seed;
    for (const auto& r : records) {
        if (std::isfinite(r.auroc)) per_seed[r.cell + "|" + r.method + "|" + r.arm][r.seed] =
            r.auroc;
    }

    auto deltas_for = [&](const std::string& cell, const std::string& method,
                          const std::string& a, const std::string& b) {
        std::vector<double> deltas;
        const auto ia = per_seed.find(cell + "|" + method + "|" + a);
        const auto ib = per_seed.find(cell + "|" + method + "|" + b);
        if (ia == per_seed.end() || ib == per_seed.end()) return deltas;
        for (const auto& [seed, va] : ia->second) {
            auto it = ib->second.find(seed);
            if (it != ib->second.end()) deltas.push_back(va - it->second);
        }
        return deltas;
    };

    std::vector<GapLine> lines;
    for (const auto& cell : plan.cells) {
        if (cell.kind != CellKind::arms) continue;
        const bool has_obs =
            std::find(cell.arms.begin(), cell.arms.end(), "obs") != cell.arms.end();
        for (const auto& method : plan.methods) {
            GapLine line;
            line.cell = cell.id;
            line.method = method;
            auto sm = deltas_for(cell.id, method, "combined", "obs_big");
            if (sm.size() >= 3) {
                auto t = evalstats::paired_test(sm);
                line.n = t.n();
                line.mean_gap = t.mean_delta;
                line.p_ttest = t.p_ttest;
                line.p_sign = t.p_sign;
            }
            if (has_obs) {
                auto conf = deltas_for(cell.id, method, "combined", "obs");
                if (conf.size() >= 3) {
                    auto t = evalstats::paired_test(conf);
                    line.mean_conf = t.mean_delta;
                    line.p_conf = t.p_ttest;
                }
            }
            lines.push_back(std::move(line));
        }
    }

    csv::Table table;
    table.header = {"cell",   "method",        "n",          "mean_gap_size_matched",
                    "p_ttest", "p_sign",        "mean_gap_confounded", "p_confounded"};
    std::vector<std::vector<std::string>> txt{
        {"cell", "method", "size-matched gap (p, n)", "confounded gap (p)"}};
    for (const auto& l : lines) {
        table.rows.push_back({l.cell, l.method, std::to_string(l.n),
                              csv::format_double(l.mean_gap), csv::format_double(l.p_ttest),
                              csv::format_double(l.p_sign), csv::format_double(l.mean_conf),
                              csv::format_double(l.p_conf)});
        txt.push_back({l.cell, l.method,
                       fmt_signed(l.mean_gap) + " (p=" + fmt_p(l.p_ttest) + ", n=" +
                           std::to_string(l.n) + ")",
                       std::isfinite(l.mean_conf)
                           ? fmt_signed(l.mean_conf) + " (p=" + fmt_p(l.p_conf) + ")"
                           : "-"});
    }

    const auto csv_path = plan.out_dir / (plan.stage + "_gaps.csv");
    const auto txt_path = plan.out_dir / (plan.stage + "_gaps.txt");
    csv::write_file(csv_path, table);
    write_text(txt_path, align_table(txt));
    return {csv_path, txt_path};
}

std::vector<std::filesystem::path> emit_survives(const std::vector<RunRecord>& records,
                                                 const ExperimentPlan& plan) {
    auto agg = aggregate(records);
    auto mean_of = [&](const std::string& cell, const std::string& method) {
        auto it = agg.find(cell + "|" + method + "|-");
        return it == agg.end() ? std::numeric_limits<double>::quiet_NaN()
                               : it->second.mean_auroc();
    };

    // Default bottleneck cell: d = K when available, lambda = 1e-3 when available.
    const int k = plan.cells.front().gen.k;
    int default_d = plan.d_grid[plan.d_grid.size() / 2];
    if (std::find(plan.d_grid.begin(), plan.d_grid.end(), k) != plan.d_grid.end()) default_d = k;
    double default_lam = plan.lambda_grid[plan.lambda_grid.size() / 2];
    if (std::find(plan.lambda_grid.begin(), plan.lambda_grid.end(), 1e-3) !=
        plan.lambda_grid.end()) {
        default_lam = 1e-3;
    }
    const std::string default_bn = bottleneck_grid_name(default_d, default_lam);

    csv::Table table;
    table.header = {"cell", "d", "lambda", "bottleneck_auroc", "best_baseline",
                    "best_baseline_auroc", "bottleneck_wins"};
    std::vector<std::vector<std::string>> txt{
        {"cell", "d", "lambda", "bottleneck", "best baseline", "wins"}};

    std::map<std::string, std::pair<int, int>> cell_wins;  // cell -> (wins, cells)
    std::map<std::string, double> cell_improvement;
    for (const auto& cell : plan.cells) {
        double best_base = -1.0;
        std::string best_name;
        for (const auto& m : plan.methods) {
            const double v = mean_of(cell.id, m);
            if (std::isfinite(v) && v > best_base) {
                best_base = v;
                best_name = m;
            }
        }
        for (int d : plan.d_grid) {
            for (double lam : plan.lambda_grid) {
                const auto name = bottleneck_grid_name(d, lam);
                const double bn = mean_of(cell.id, name);
                const bool wins = std::isfinite(bn) && bn > best_base;
                cell_wins[cell.id].first += wins ? 1 : 0;
                cell_wins[cell.id].second += 1;
                cell_improvement[cell.id] += (bn - best_base) / (plan.d_grid.size() *
                                                                 plan.lambda_grid.size());
                table.rows.push_back({cell.id, std::to_string(d), csv::format_double(lam),
                                      csv::format_double(bn), best_name,
                                      csv::format_double(best_base), wins ? "1" : "0"});
                txt.push_back({cell.id, std::to_string(d), csv::format_double(lam), fmt(bn),
                               best_name + " " + fmt(best_base), wins ? "yes" : "no"});
            }
        }
    }

    std::ostringstream extra;
    for (const auto& [cell, wc] : cell_wins) {
        extra << "\ncell " << cell << ": bottleneck beats best tuned baseline on " << wc.first
              << "/" << wc.second << " (d, lambda) cells, mean improvement "
              << fmt_signed(cell_improvement[cell]) << "\n";
    }

    // Per-seed lasso-vs-default-bottleneck comparison (zero-nonlinearity check).
    std::map<std::string, std::map<std::uint64_t, double>> per_seed;
    for (const auto& r : records) {
        if (std::isfinite(r.auroc)) per_seed[r.cell + "|" + r.method][r.seed] = r.auroc;
    }
    for (const auto& cell : plan.cells) {
        const auto la = per_seed.find(cell.id + "|lasso");
        const auto bn = per_seed.find(cell.id + "|" + default_bn);
        if (la == per_seed.end() || bn == per_seed.end()) continue;
        int lasso_wins = 0, n = 0;
        for (const auto& [seed, v] : la->second) {
            auto it = bn->second.find(seed);
            if (it == bn->second.end()) continue;
            ++n;
            if (v >= it->second) ++lasso_wins;
        }
        extra << "cell " << cell.id << ": lasso >= default bottleneck (" << default_bn
              << ") on " << lasso_wins << "/" << n << " seeds\n";
    }

    const auto csv_path = plan.out_dir / "survives_grid.csv";
    const auto txt_path = plan.out_dir / "survives.txt";
    csv::write_file(csv_path, table);
    write_text(txt_path, align_table(txt) + extra.str());
    return {csv_path, txt_path};
}

}  // namespace

std::vector<std::filesystem::path> emit_reports(const std::vector<RunRecord>& records,
                                                const ExperimentPlan& plan) {
    plan.validate();
    check_completeness(records, plan);
    std::filesystem::create_directories(plan.out_dir);

    if (plan.stage == "f1") return emit_summary(records, plan, "f1_summary");
    if (plan.stage == "f2") return emit_f2(records, plan);
    if (plan.stage == "f3") return emit_summary(records, plan, "table2");
    if (plan.stage == "f4" || plan.stage == "f5") return emit_gaps(records, plan);
    if (plan.stage == "survives") return emit_survives(records, plan);
    throw PlanError("no report emitter for stage " + plan.stage);
}

}  // namespace causalbench::harness
