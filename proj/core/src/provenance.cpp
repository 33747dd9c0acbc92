#include "causalbench/provenance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/evalstats.hpp"

namespace causalbench::provenance {

std::string edge_class_name(EdgeClass c) {
    switch (c) {
        case EdgeClass::causal: return "causal";
        case EdgeClass::definitional: return "definitional";
        case EdgeClass::proxy: return "proxy";
        case EdgeClass::soft: return "soft";
    }
    return "?";
}

EdgeClass parse_edge_class(const std::string& name) {
    if (name == "causal") return EdgeClass::causal;
    if (name == "definitional") return EdgeClass::definitional;
    if (name == "proxy") return EdgeClass::proxy;
    if (name == "soft") return EdgeClass::soft;
    throw IngestionError("unknown edge class: " + name);
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool is_missing(const std::string& cell) {
    if (cell.empty()) return true;
    std::string low;
    for (char c : cell) low += static_cast<char>(std::tolower(c));
    return low == "na" || low == "nan" || low == "null";
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open manifest " + path.string());
    DatasetManifest m;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw IngestionError("manifest line without ':': " + line);
        const std::string key = trim(line.substr(0, colon));
        const std::string value = trim(line.substr(colon + 1));
        if (key == "dataset_id") m.dataset_id = value;
        else if (key == "data") m.data_file = path.parent_path() / value;
        else if (key == "date_column") m.date_column = value;
        else if (key == "variables") m.variables = split_list(value);
        else if (key == "transform") m.transform = value;
        else if (key == "cards") m.cards_file = path.parent_path() / value;
        else if (key == "expected_k") m.expected_k = std::stoi(value);
        else if (key == "expected_t") m.expected_t = std::stol(value);
        else throw IngestionError("unknown manifest key: " + key);
    }
    if (m.dataset_id.empty()) throw IngestionError("manifest missing dataset_id");
    if (m.variables.size() < 2) throw IngestionError("manifest needs >= 2 variables");
    if (m.transform != "levels" && m.transform != "log_returns") {
        throw IngestionError("transform must be 'levels' or 'log_returns'");
    }
    return m;
}

int RealDataset::var_index(const std::string& name) const {
    for (size_t j = 0; j < series.var_names.size(); ++j) {
        if (series.var_names[j] == name) return static_cast<int>(j);
    }
    throw ParameterError("unknown variable: " + name);
}

std::vector<ProvenanceCard> load_cards(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    if (table.header != std::vector<std::string>{"source", "target", "class", "group",
                                                 "citation"}) {
        throw IngestionError("unexpected card header in " + path.string());
    }
    std::vector<ProvenanceCard> cards;
    for (const auto& row : table.rows) {
        ProvenanceCard c;
        c.source = row[0];
        c.target = row[1];
        c.edge_class = parse_edge_class(row[2]);
        c.group = row[3];
        c.citation = row[4];
        cards.push_back(std::move(c));
    }
    return cards;
}

RealDataset load_csv_dataset(const std::filesystem::path& csv_path,
                             const DatasetManifest& manifest) {
    auto table = csv::read_file(csv_path);

    std::vector<int> cols;
    for (const auto& name : manifest.variables) {
        auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) {
            throw IngestionError("column '" + name + "' not in " + csv_path.string());
        }
        cols.push_back(static_cast<int>(it - table.header.begin()));
    }
    if (cols.size() < 2) throw IngestionError("dataset needs >= 2 variables");

    RealDataset ds;
    ds.dataset_id = manifest.dataset_id;

    std::vector<Eigen::VectorXd> rows;
    for (const auto& row : table.rows) {
        Eigen::VectorXd v(cols.size());
        bool complete = true;
        for (size_t j = 0; j < cols.size(); ++j) {
            if (cols[j] >= static_cast<int>(row.size()) || is_missing(row[cols[j]])) {
                complete = false;
                break;
            }
            try {
                v(j) = csv::parse_double(row[cols[j]]);
            } catch (const IngestionError&) {
                complete = false;
                break;
            }
            if (!std::isfinite(v(j))) complete = false;
        }
        if (complete) rows.push_back(std::move(v));
        else ++ds.dropped_rows;
    }
    if (rows.size() < 2) throw IngestionError("dataset empty after alignment: " + csv_path.string());

    Eigen::MatrixXd values(rows.size(), cols.size());
    for (size_t r = 0; r < rows.size(); ++r) values.row(r) = rows[r].transpose();

    if (manifest.transform == "log_returns") {
        if ((values.array() <= 0.0).any()) {
            throw IngestionError("log_returns transform needs strictly positive prices");
        }
        Eigen::MatrixXd logs = values.array().log();
        values = logs.bottomRows(logs.rows() - 1) - logs.topRows(logs.rows() - 1);
    }

    ds.series.values = values;
    ds.series.var_names = manifest.variables;
    ds.series.validate();

    if (manifest.expected_k > 0 && manifest.expected_k != static_cast<int>(cols.size())) {
        ds.warnings += "K=" + std::to_string(cols.size()) + " differs from expected " +
                       std::to_string(manifest.expected_k) + "; ";
    }
    if (manifest.expected_t > 0 &&
        std::labs(manifest.expected_t - static_cast<long>(values.rows())) >
            manifest.expected_t / 10) {
        ds.warnings += "T=" + std::to_string(values.rows()) + " differs from expected " +
                       std::to_string(manifest.expected_t) + "; ";
    }

    if (!manifest.cards_file.empty()) {
        ds.cards = load_cards(manifest.cards_file);
        for (const auto& c : ds.cards) {
            ds.var_index(c.source);  // throws on unknown variables
            ds.var_index(c.target);
        }
    }
    return ds;
}

InclusionPolicy InclusionPolicy::default_policy() {
    return {{EdgeClass::causal, EdgeClass::proxy, EdgeClass::soft}, ""};
}

InclusionPolicy InclusionPolicy::full() {
    return {{EdgeClass::causal, EdgeClass::definitional, EdgeClass::proxy, EdgeClass::soft}, ""};
}

bool InclusionPolicy::includes(const ProvenanceCard& card) const {
    if (!excluded_group.empty() && card.group == excluded_group) return false;
    return std::find(included.begin(), included.end(), card.edge_class) != included.end();
}

std::string InclusionPolicy::describe() const {
    std::string s;
    for (const auto& c : included) {
        if (!s.empty()) s += "+";
        s += edge_class_name(c);
    }
    if (!excluded_group.empty()) s += "-group:" + excluded_group;
    return s;
}

LaggedAdjacency effective_truth(const RealDataset& dataset, const InclusionPolicy& policy) {
    const int k = static_cast<int>(dataset.series.k());
    LaggedAdjacency truth(k, 1);
    for (const auto& card : dataset.cards) {
        if (!policy.includes(card)) continue;
        truth.set_edge(dataset.var_index(card.target), dataset.var_index(card.source), 1);
    }
    if (truth.count_true_offdiag() == 0) {
        throw UndefinedTruth("policy '" + policy.describe() + "' leaves no positive pair");
    }
    const auto masked = excluded_pairs(dataset, policy);
    if (truth.count_false_offdiag() - static_cast<int>(masked.size()) <= 0) {
        throw UndefinedTruth("policy '" + policy.describe() + "' leaves no negative pair");
    }
    return truth;
}

std::vector<std::pair<int, int>> excluded_pairs(const RealDataset& dataset,
                                                const InclusionPolicy& policy) {
    std::set<std::pair<int, int>> included, excluded;
    for (const auto& card : dataset.cards) {
        const auto pair = std::make_pair(dataset.var_index(card.target),
                                         dataset.var_index(card.source));
        (policy.includes(card) ? included : excluded).insert(pair);
    }
    std::vector<std::pair<int, int>> out;
    for (const auto& p : excluded) {
        if (!included.count(p)) out.push_back(p);
    }
    return out;
}

double policy_auroc(const RealDataset& dataset, const InclusionPolicy& policy,
                    const ScoreMatrix& scores) {
    return evalstats::auroc_flat_lag(scores, effective_truth(dataset, policy),
                                     excluded_pairs(dataset, policy));
}

int AuditReport::rank_under(const std::string& policy, const std::string& method) const {
    for (const auto& v : variants) {
        if (v.policy != policy) continue;
        auto it = v.rank.find(method);
        return it == v.rank.end() ? 0 : it->second;
    }
    return 0;
}

AuditReport sensitivity_audit(const RealDataset& dataset,
                              const std::map<std::string, ScoreMatrix>& scores_by_method) {
    if (scores_by_method.size() < 2) {
        throw ParameterError("sensitivity_audit needs >= 2 methods");
    }

    std::vector<std::pair<std::string, InclusionPolicy>> policies;
    policies.emplace_back("full", InclusionPolicy::full());
    policies.emplace_back("default", InclusionPolicy::default_policy());
    std::set<std::string> groups;
    for (const auto& c : dataset.cards) {
        if (!c.group.empty()) groups.insert(c.group);
    }
    for (const auto& g : groups) {
        auto p = InclusionPolicy::full();
        p.excluded_group = g;
        policies.emplace_back("minus_group:" + g, p);
    }

    AuditReport report;
    report.dataset_id = dataset.dataset_id;
    report.cards = dataset.cards;
    for (const auto& [name, policy] : policies) {
        AuditRanking ranking;
        ranking.policy = name;
        try {
            for (const auto& [method, scores] : scores_by_method) {
                ranking.method_auroc.emplace_back(method, policy_auroc(dataset, policy, scores));
            }
            std::sort(ranking.method_auroc.begin(), ranking.method_auroc.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
            for (size_t r = 0; r < ranking.method_auroc.size(); ++r) {
                ranking.rank[ranking.method_auroc[r].first] = static_cast<int>(r + 1);
            }
        } catch (const UndefinedTruth&) {
            ranking.skipped = true;
        }
        report.variants.push_back(std::move(ranking));
    }
    return report;
}

std::string AuditReport::text() const {
    std::ostringstream os;
    os << "ground-truth sensitivity audit: " << dataset_id << "\n";
    for (const auto& v : variants) {
        os << "  policy " << v.policy << ":";
        if (v.skipped) {
            os << " skipped (undefined truth)\n";
            continue;
        }
        os << "\n";
        for (const auto& [method, a] : v.method_auroc) {
            os << "    " << v.rank.at(method) << ". " << method << "  auroc=" << a << "\n";
        }
    }
    os << "  cards:\n";
    for (const auto& c : cards) {
        os << "    " << c.source << " -> " << c.target << "  [" << edge_class_name(c.edge_class)
           << ", group=" << c.group << "]  " << c.citation << "\n";
    }
    return os.str();
}

void AuditReport::save_csv(const std::filesystem::path& path) const {
    csv::Table table;
    table.header = {"policy", "method", "auroc", "rank", "skipped"};
    for (const auto& v : variants) {
        if (v.skipped) {
            table.rows.push_back({v.policy, "", "", "", "1"});
            continue;
        }
        for (const auto& [method, a] : v.method_auroc) {
            table.rows.push_back({v.policy, method, csv::format_double(a),
                                  std::to_string(v.rank.at(method)), "0"});
        }
    }
    csv::write_file(path, table);
}

}  // namespace causalbench::provenance
