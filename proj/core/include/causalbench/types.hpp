#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace causalbench {

namespace intervene {
struct InterventionLog;  // defined in intervene.hpp
}

// A T×K multivariate series. Values are unitless; dt is 1.0 for discrete
// processes and the sampling interval for integrated ones.
struct Series {
    Eigen::MatrixXd values;  // T×K
    std::vector<std::string> var_names;
    double dt = 1.0;
    std::shared_ptr<const intervene::InterventionLog> intervention_log;  // optional

    Eigen::Index t() const { return values.rows(); }
    Eigen::Index k() const { return values.cols(); }

    // Throws ParameterError unless all entries are finite, T >= 2, K >= 2.
    void validate() const;

    // First n rows, same variable names. Used to slice observational arms.
    Series head(Eigen::Index n) const;

    void save_csv(const std::filesystem::path& path) const;
    static Series load_csv(const std::filesystem::path& path);
};

// Ground-truth boolean tensor over (effect i, cause j, lag tau), tau in 1..L.
// Self-edges are representable but excluded from every AUROC evaluation.
struct LaggedAdjacency {
    int k = 0;
    int max_lag = 1;
    std::vector<std::uint8_t> edges;  // indexed [((tau-1)*k + i)*k + j]

    LaggedAdjacency() = default;
    LaggedAdjacency(int k_, int max_lag_)
        : k(k_), max_lag(max_lag_), edges(static_cast<size_t>(k_) * k_ * max_lag_, 0) {}

    bool edge(int effect, int cause, int lag) const {
        return edges[index(effect, cause, lag)] != 0;
    }
    void set_edge(int effect, int cause, int lag, bool value = true) {
        edges[index(effect, cause, lag)] = value ? 1 : 0;
    }

    size_t index(int effect, int cause, int lag) const {
        return (static_cast<size_t>(lag - 1) * k + effect) * k + cause;
    }

    int count_true_offdiag() const;
    int count_false_offdiag() const;

    // Any-lag OR collapse to a static (L=1) adjacency.
    LaggedAdjacency collapse_static() const;

    // Throws ParameterError unless there is at least one true and one false
    // off-diagonal entry (AUROC is undefined otherwise).
    void validate() const;

    void save_csv(const std::filesystem::path& path) const;
    static LaggedAdjacency load_csv(const std::filesystem::path& path);
};

// Nonnegative edge-strength scores from any method. Diagonal is zero at
// every lag; after normalization the max entry is 1.
struct ScoreMatrix {
    int k = 0;
    int max_lag = 1;
    std::vector<double> scores;  // same layout as LaggedAdjacency::edges
    std::string normalization = "none";

    ScoreMatrix() = default;
    ScoreMatrix(int k_, int max_lag_)
        : k(k_), max_lag(max_lag_), scores(static_cast<size_t>(k_) * k_ * max_lag_, 0.0) {}

    double at(int effect, int cause, int lag) const {
        return scores[index(effect, cause, lag)];
    }
    void set(int effect, int cause, int lag, double v) {
        scores[index(effect, cause, lag)] = v;
    }
    size_t index(int effect, int cause, int lag) const {
        return (static_cast<size_t>(lag - 1) * k + effect) * k + cause;
    }

    void zero_diagonal();

    // Divides by the max entry. Throws DegenerateExtraction when the matrix
    // is identically zero (nothing to rank).
    void normalize_max();

    // Max over lags, keeping the strongest evidence per ordered pair.
    ScoreMatrix collapse_static() const;

    // Throws ParameterError on negative/non-finite scores or nonzero diagonal.
    void validate() const;

    void save_csv(const std::filesystem::path& path) const;
    static ScoreMatrix load_csv(const std::filesystem::path& path);
};

}  // namespace causalbench
