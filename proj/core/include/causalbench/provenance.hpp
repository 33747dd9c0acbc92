#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalbench/types.hpp"

namespace causalbench::provenance {

enum class EdgeClass { causal, definitional, proxy, soft };

std::string edge_class_name(EdgeClass c);
EdgeClass parse_edge_class(const std::string& name);

// One labeled ground-truth edge with its provenance.
struct ProvenanceCard {
    std::string source;
    std::string target;
    EdgeClass edge_class = EdgeClass::causal;
    std::string group;
    std::string citation;
};

// Plain structured text manifest: one `key: value` per line, '#' comments.
// Keys: dataset_id, data (CSV path), date_column, variables (comma
// separated), transform (levels | log_returns), cards (path), optional
// expected_k / expected_t. Paths are relative to the manifest file.
struct DatasetManifest {
    std::string dataset_id;
    std::filesystem::path data_file;
    std::string date_column;
    std::vector<std::string> variables;
    std::string transform = "levels";
    std::filesystem::path cards_file;
    int expected_k = 0;  // 0 = no expectation
    long expected_t = 0;

    static DatasetManifest load(const std::filesystem::path& path);
};

struct RealDataset {
    Series series;
    std::vector<ProvenanceCard> cards;
    std::string dataset_id;
    int dropped_rows = 0;
    std::string warnings;  // non-fatal findings (dim mismatch etc.)

    int var_index(const std::string& name) const;  // ParameterError if unknown
};

// Cards CSV: (source, target, class, group, citation), '#' comments allowed.
std::vector<ProvenanceCard> load_cards(const std::filesystem::path& path);

// Ingests the CSV named by the manifest: selects the declared variable
// columns, drops rows with any missing cell (logged in dropped_rows),
// applies the transform (log returns require positive prices), and attaches
// the card file. Dimension mismatches against expected_k/t only warn.
RealDataset load_csv_dataset(const std::filesystem::path& csv_path,
                             const DatasetManifest& manifest);

struct InclusionPolicy {
    std::vector<EdgeClass> included;  // classes kept as positives
    std::string excluded_group;       // optional leave-one-group-out

    static InclusionPolicy default_policy();  // everything except definitional
    static InclusionPolicy full();            // every class

    bool includes(const ProvenanceCard& card) const;
    std::string describe() const;
};

// Static (L=1) adjacency with positives = cards admitted by the policy.
// Throws UndefinedTruth when no positive or no negative pair remains.
LaggedAdjacency effective_truth(const RealDataset& dataset, const InclusionPolicy& policy);

// Ordered (effect, cause) pairs carded but NOT admitted by the policy.
// These leave the evaluation grid entirely instead of becoming negatives.
std::vector<std::pair<int, int>> excluded_pairs(const RealDataset& dataset,
                                                const InclusionPolicy& policy);

// AUROC of `scores` under the policy: positives from effective_truth,
// excluded cards masked out of the grid.
double policy_auroc(const RealDataset& dataset, const InclusionPolicy& policy,
                    const ScoreMatrix& scores);

struct AuditRanking {
    std::string policy;
    bool skipped = false;  // policy variant had undefined truth
    std::vector<std::pair<std::string, double>> method_auroc;  // sorted, best first
    std::map<std::string, int> rank;                           // 1 = best
};

struct AuditReport {
    std::string dataset_id;
    std::vector<AuditRanking> variants;  // full, default, minus each group
    std::vector<ProvenanceCard> cards;   // echoed with class and citation

    // Rank of `method` under the variant named `policy`; 0 when skipped.
    int rank_under(const std::string& policy, const std::string& method) const;

    std::string text() const;
    void save_csv(const std::filesystem::path& path) const;
};

// Re-evaluates every method's AUROC under each inclusion-policy variant:
// the full card set, the default policy (minus definitional), and leave-one-
// group-out for every group. Variants with undefined truth are marked
// skipped. Requires at least 2 methods.
AuditReport sensitivity_audit(const RealDataset& dataset,
                              const std::map<std::string, ScoreMatrix>& scores_by_method);

}  // namespace causalbench::provenance
