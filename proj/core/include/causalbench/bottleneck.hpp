#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "causalbench/types.hpp"

namespace causalbench::bottleneck {

struct TrainConfig {
    double learning_rate = 1e-2;
    int epochs = 2000;
    std::uint64_t seed = 0;
};

// Two-factor linear predictor x_{t+1} ~ W_out W_in [x_t; ...; x_{t-L+1}],
// trained on next-step MSE plus an entrywise L1 penalty on both factors.
// Inputs are standardized per column at train time; the statistics are kept
// on the model so held-out predictions land back on the raw scale.
struct BottleneckModel {
    Eigen::MatrixXd w_in;   // d×(K·L), lag tau occupies columns [(tau-1)K, tau*K)
    Eigen::MatrixXd w_out;  // K×d
    int k = 0;
    int d = 0;
    int max_lag = 1;
    double lambda_sparse = 0.0;
    TrainConfig config;

    Eigen::VectorXd reg_mean, reg_scale, target_mean;

    std::vector<double> loss_history;  // loss before each update, then final
    bool tail_monotone = false;        // non-increasing over the last 10% of epochs
    ScoreMatrix init_scores;           // extraction at initialization (diagnostic)

    double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }

    // Flat CSV (matrix, row, col, value) covering both factors and the
    // standardization vectors.
    void save_csv(const std::filesystem::path& path) const;
};

struct LossGrad {
    double loss = 0.0;
    Eigen::MatrixXd g_in, g_out;
};

// Loss and analytic (sub)gradient at (w_in, w_out) on standardized data:
// ||y - z w_in^T w_out^T||^2 / (N*K) + lambda (|w_in|_1 + |w_out|_1).
LossGrad loss_and_gradient(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                           const Eigen::MatrixXd& w_in, const Eigen::MatrixXd& w_out,
                           double lambda);

// Full-batch Adam, deterministic in cfg.seed. Throws TrainingDivergence
// (naming the epoch) on non-finite loss, ParameterError on a series shorter
// than max_lag + 10 or d < 1.
BottleneckModel train(const Series& series, int d, int max_lag, double lambda_sparse,
                      TrainConfig cfg = {});

// S(tau) = |w_out w_in(tau)|, diagonal zeroed at every lag, whole tensor
// max-normalized. Throws DegenerateExtraction if everything is zero.
ScoreMatrix extract(const BottleneckModel& model);

// Mean squared next-step error on held-out rows (raw scale). The first
// max_lag rows of `heldout` serve as context only.
double fit_predict_mse(const BottleneckModel& model, const Series& heldout);

}  // namespace causalbench::bottleneck
