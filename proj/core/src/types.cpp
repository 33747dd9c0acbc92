#include "causalbench/types.hpp"

#include <algorithm>
#include <cmath>

#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"

namespace causalbench {

namespace {
int parse_int(const std::string& s) {
    try {
        size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw IngestionError("not an integer: '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw IngestionError("not an integer: '" + s + "'");
    }
}
}  // namespace

void Series::validate() const {
    if (t() < 2 || k() < 2) {
        throw ParameterError("Series requires T >= 2 and K >= 2, got T=" +
                             std::to_string(t()) + " K=" + std::to_string(k()));
    }
    if (!values.allFinite()) throw ParameterError("Series contains non-finite entries");
    if (!var_names.empty() && static_cast<Eigen::Index>(var_names.size()) != k()) {
        throw ParameterError("var_names size does not match K");
    }
}

Series Series::head(Eigen::Index n) const {
    if (n > t()) throw ParameterError("Series::head beyond length");
    Series out;
    out.values = values.topRows(n);
    out.var_names = var_names;
    out.dt = dt;
    return out;
}

void Series::save_csv(const std::filesystem::path& path) const {
    csv::Table table;
    if (var_names.empty()) {
        for (Eigen::Index j = 0; j < k(); ++j) table.header.push_back("x" + std::to_string(j));
    } else {
        table.header = var_names;
    }
    table.rows.reserve(t());
    for (Eigen::Index r = 0; r < t(); ++r) {
        std::vector<std::string> row;
        row.reserve(k());
        for (Eigen::Index c = 0; c < k(); ++c) row.push_back(csv::format_double(values(r, c)));
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

Series Series::load_csv(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    Series s;
    s.var_names = table.header;
    const auto k = static_cast<Eigen::Index>(table.header.size());
    s.values.resize(static_cast<Eigen::Index>(table.rows.size()), k);
    for (size_t r = 0; r < table.rows.size(); ++r) {
        if (static_cast<Eigen::Index>(table.rows[r].size()) != k) {
            throw IngestionError("ragged CSV row " + std::to_string(r) + " in " + path.string());
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            s.values(static_cast<Eigen::Index>(r), c) = csv::parse_double(table.rows[r][c]);
        }
    }
    return s;
}

int LaggedAdjacency::count_true_offdiag() const {
    int n = 0;
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                if (i != j && edge(i, j, tau)) ++n;
    return n;
}

int LaggedAdjacency::count_false_offdiag() const {
    return k * (k - 1) * max_lag - count_true_offdiag();
}

LaggedAdjacency LaggedAdjacency::collapse_static() const {
    LaggedAdjacency out(k, 1);
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                if (edge(i, j, tau)) out.set_edge(i, j, 1);
    return out;
}

void LaggedAdjacency::validate() const {
    if (k < 2 || max_lag < 1) throw ParameterError("adjacency requires K >= 2, L >= 1");
    if (count_true_offdiag() == 0) throw ParameterError("adjacency has no true off-diagonal edge");
    if (count_false_offdiag() == 0) throw ParameterError("adjacency has no false off-diagonal edge");
}

void LaggedAdjacency::save_csv(const std::filesystem::path& path) const {
    csv::Table table;
    table.header = {"effect", "cause", "lag", "is_edge"};
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                table.rows.push_back({std::to_string(i), std::to_string(j), std::to_string(tau),
                                      edge(i, j, tau) ? "1" : "0"});
    csv::write_file(path, table);
}

LaggedAdjacency LaggedAdjacency::load_csv(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    if (table.header != std::vector<std::string>{"effect", "cause", "lag", "is_edge"}) {
        throw IngestionError("unexpected adjacency header in " + path.string());
    }
    int k = 0, max_lag = 0;
    for (const auto& row : table.rows) {
        k = std::max(k, parse_int(row[0]) + 1);
        k = std::max(k, parse_int(row[1]) + 1);
        max_lag = std::max(max_lag, parse_int(row[2]));
    }
    LaggedAdjacency adj(k, max_lag);
    for (const auto& row : table.rows) {
        adj.set_edge(parse_int(row[0]), parse_int(row[1]), parse_int(row[2]), row[3] == "1");
    }
    return adj;
}

void ScoreMatrix::zero_diagonal() {
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int i = 0; i < k; ++i) set(i, i, tau, 0.0);
}

void ScoreMatrix::normalize_max() {
    double mx = 0.0;
    for (double v : scores) mx = std::max(mx, v);
    if (mx <= 0.0) throw DegenerateExtraction("score matrix is identically zero");
    for (double& v : scores) v /= mx;
    normalization = "max";
}

ScoreMatrix ScoreMatrix::collapse_static() const {
    ScoreMatrix out(k, 1);
    out.normalization = normalization;
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                out.set(i, j, 1, std::max(out.at(i, j, 1), at(i, j, tau)));
    return out;
}

void ScoreMatrix::validate() const {
    for (double v : scores) {
        if (!std::isfinite(v) || v < 0.0) throw ParameterError("score matrix has invalid entry");
    }
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int i = 0; i < k; ++i)
            if (at(i, i, tau) != 0.0) throw ParameterError("score matrix diagonal must be zero");
}

void ScoreMatrix::save_csv(const std::filesystem::path& path) const {
    csv::Table table;
    table.header = {"effect", "cause", "lag", "score"};
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                table.rows.push_back({std::to_string(i), std::to_string(j), std::to_string(tau),
                                      csv::format_double(at(i, j, tau))});
    csv::write_file(path, table);
}

ScoreMatrix ScoreMatrix::load_csv(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    if (table.header != std::vector<std::string>{"effect", "cause", "lag", "score"}) {
        throw IngestionError("unexpected score header in " + path.string());
    }
    int k = 0, max_lag = 0;
    for (const auto& row : table.rows) {
        k = std::max(k, parse_int(row[0]) + 1);
        k = std::max(k, parse_int(row[1]) + 1);
        max_lag = std::max(max_lag, parse_int(row[2]));
    }
    if (k < 2 || max_lag < 1) throw IngestionError("degenerate score CSV: " + path.string());
    ScoreMatrix s(k, max_lag);
    for (const auto& row : table.rows) {
        s.set(parse_int(row[0]), parse_int(row[1]), parse_int(row[2]),
              csv::parse_double(row[3]));
    }
    s.validate();
    return s;
}

}  // namespace causalbench
