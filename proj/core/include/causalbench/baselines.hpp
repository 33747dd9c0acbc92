#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "causalbench/types.hpp"

namespace causalbench::baselines {

// Shared design-matrix builder. Row r of `targets` is x_{L+r}; the regressor
// block for lag tau occupies columns [(tau-1)K, tau*K), holding x_{L+r-tau}.
// Nothing after the target row ever enters its regressor row.
struct LaggedDesign {
    Eigen::MatrixXd targets;     // (T-L)×K
    Eigen::MatrixXd regressors;  // (T-L)×(K*L)
    int k = 0;
    int max_lag = 1;

    static LaggedDesign build(const Series& series, int max_lag);

    int column(int var, int lag) const { return (lag - 1) * k + var; }
    std::pair<int, int> var_lag(int column) const { return {column % k, column / k + 1}; }
};

struct TuningReport {
    std::vector<double> grid;
    std::vector<double> criterion;  // selection criterion per grid point
    std::vector<double> chosen;     // shared (size 1) or per equation (size K)
    std::string rule = "holdout-mse";
};

struct LinearFitResult {
    ScoreMatrix scores;
    double mse = std::numeric_limits<double>::quiet_NaN();
    TuningReport tuning;
    Eigen::MatrixXd coef;  // (K*L)×K, standardized units, column per equation
    std::string flags;
};

struct FitOptions {
    // Refit on all rows at the tuned hyperparameter before extracting scores.
    // Tuning and the reported MSE always use the 80/20 time-ordered split.
    bool score_on_full = false;
    // Diagnostics only: tune by AUROC against ground truth instead of
    // holdout MSE. Tags the TuningReport rule as "oracle-auroc".
    const LaggedAdjacency* oracle_truth = nullptr;
};

// Per-equation least squares; scores are |standardized coefficients|, MSE is
// measured on the held-out last 20% of design rows. Rank-deficient designs
// fall back to the minimum-norm solution and set a flag; condition numbers
// above 1e8 set "near_singular".
LinearFitResult fit_ols(const Series& series, int max_lag, const FitOptions& opts = {});

// Ridge with one penalty shared across equations, chosen on holdout MSE over
// a 20-point log grid scaled by the max-correlation of the design.
LinearFitResult fit_ridge(const Series& series, int max_lag,
                          const std::vector<double>& lambda_grid = {},
                          const FitOptions& opts = {});

// Per-equation L1 regression by cyclic coordinate descent to KKT tolerance
// 1e-6, penalty chosen per equation on holdout MSE. Throws ConvergenceError
// (with the residual KKT gap) after 1e4 sweeps.
LinearFitResult fit_lasso(const Series& series, int max_lag,
                          const std::vector<double>& lambda_grid = {},
                          const FitOptions& opts = {});

// Reduced-rank regression: the OLS coefficient matrix projected onto the top
// r right-singular directions of the fitted values; r chosen on holdout MSE.
LinearFitResult fit_rrr(const Series& series, int max_lag,
                        const std::vector<int>& rank_grid = {}, const FitOptions& opts = {});

// Bivariate Granger F-tests: score(i, j) = -log10(p) of the nested-model
// test of j's lags improving the AR(max_lag) fit of i, clipped at 300.
// Optional raw p-value matrix out-parameter for calibration checks.
ScoreMatrix granger_bivariate(const Series& series, int max_lag,
                              Eigen::MatrixXd* p_values = nullptr);

// Two-stage partial-correlation screen: stage 1 prunes candidate parents per
// target (condition sets up to size 3), stage 2 rescreens every surviving
// link conditioned on both endpoints' parents. score = 1 - p for tested
// links, 0 for pruned ones.
ScoreMatrix pcmci_lite(const Series& series, int max_lag, double alpha_pc = 0.05);

// --- lower-level pieces shared with tests -------------------------------

struct StandardizedSplit {
    Eigen::MatrixXd z_train, y_train;  // standardized regressors, centered targets
    Eigen::MatrixXd z_hold, y_hold;
    Eigen::VectorXd reg_mean, reg_scale, target_mean;
    std::string flags;
};

// Standardizes on the first `train_fraction` of design rows; the holdout is
// scaled with the training statistics. Constant columns get scale 1 and a
// "degenerate_column" flag.
StandardizedSplit standardize_split(const LaggedDesign& design, double train_fraction = 0.8);

struct OlsSolve {
    Eigen::MatrixXd coef;
    double condition = 0.0;
    Eigen::Index rank = 0;
};
// Minimum-norm least squares via SVD.
OlsSolve solve_least_squares(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y);

// Time-ordered split at `train_fraction` of the design rows. The second
// piece keeps max_lag context rows in front, so its design targets are
// exactly the held-out rows (no look-ahead either way).
std::pair<Series, Series> time_split(const Series& series, int max_lag, double train_fraction);

// Max KKT violation of the lasso objective (1/2n)||y - Z b||^2 + lambda |b|_1.
double lasso_kkt_violation(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& beta, double lambda);

}  // namespace causalbench::baselines
