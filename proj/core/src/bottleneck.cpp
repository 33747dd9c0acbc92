#include "causalbench/bottleneck.hpp"

#include <cmath>

#include "causalbench/baselines.hpp"
#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/rng.hpp"

namespace causalbench::bottleneck {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kTailTol = 1e-6;

Eigen::MatrixXd sign_of(const Eigen::MatrixXd& m) {
    return m.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

ScoreMatrix raw_extract(const Eigen::MatrixXd& w_out, const Eigen::MatrixXd& w_in, int k,
                        int max_lag) {
    ScoreMatrix s(k, max_lag);
    for (int tau = 1; tau <= max_lag; ++tau) {
        const Eigen::MatrixXd prod = (w_out * w_in.middleCols((tau - 1) * k, k)).cwiseAbs();
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) s.set(i, j, tau, prod(i, j));
    }
    s.zero_diagonal();
    return s;
}

}  // namespace

LossGrad loss_and_gradient(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                           const Eigen::MatrixXd& w_in, const Eigen::MatrixXd& w_out,
                           double lambda) {
    const double n_cells = static_cast<double>(y.rows()) * static_cast<double>(y.cols());
    const Eigen::MatrixXd proj = z * w_in.transpose();           // N×d
    const Eigen::MatrixXd err = proj * w_out.transpose() - y;    // N×K

    LossGrad out;
    out.loss = err.squaredNorm() / n_cells +
               lambda * (w_in.cwiseAbs().sum() + w_out.cwiseAbs().sum());
    const double scale = 2.0 / n_cells;
    out.g_out = scale * (err.transpose() * proj) + lambda * sign_of(w_out);
    out.g_in = scale * (w_out.transpose() * (err.transpose() * z)) + lambda * sign_of(w_in);
    return out;
}

BottleneckModel train(const Series& series, int d, int max_lag, double lambda_sparse,
                      TrainConfig cfg) {
    if (d < 1) throw ParameterError("bottleneck width d must be >= 1");
    if (series.t() <= max_lag + 10) {
        throw ParameterError("series too short: need T > max_lag + 10");
    }

    const auto design = baselines::LaggedDesign::build(series, max_lag);
    auto std_all = baselines::standardize_split(design, 1.0);
    const Eigen::MatrixXd& z = std_all.z_train;
    const Eigen::MatrixXd& y = std_all.y_train;

    BottleneckModel model;
    model.k = design.k;
    model.d = d;
    model.max_lag = max_lag;
    model.lambda_sparse = lambda_sparse;
    model.config = cfg;
    model.reg_mean = std_all.reg_mean;
    model.reg_scale = std_all.reg_scale;
    model.target_mean = std_all.target_mean;

    const int p = design.k * max_lag;
    const double init_sd = 1.0 / std::sqrt(static_cast<double>(std::max(d, design.k)));
    Rng rng(cfg.seed);
    model.w_in.resize(d, p);
    model.w_out.resize(design.k, d);
    for (Eigen::Index i = 0; i < model.w_in.size(); ++i) {
        model.w_in.data()[i] = init_sd * rng.gaussian();
    }
    for (Eigen::Index i = 0; i < model.w_out.size(); ++i) {
        model.w_out.data()[i] = init_sd * rng.gaussian();
    }
    model.init_scores = raw_extract(model.w_out, model.w_in, design.k, max_lag);
    try {
        model.init_scores.normalize_max();
    } catch (const DegenerateExtraction&) {
        // all-zero init cannot happen with Gaussian draws; keep zeros if it does
    }

    Eigen::MatrixXd m_in = Eigen::MatrixXd::Zero(d, p), v_in = m_in;
    Eigen::MatrixXd m_out = Eigen::MatrixXd::Zero(design.k, d), v_out = m_out;

    model.loss_history.reserve(cfg.epochs + 1);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto lg = loss_and_gradient(z, y, model.w_in, model.w_out, lambda_sparse);
        if (!std::isfinite(lg.loss)) {
            throw TrainingDivergence("non-finite loss at epoch " + std::to_string(epoch));
        }
        model.loss_history.push_back(lg.loss);

        const double bc1 = 1.0 - std::pow(kBeta1, epoch);
        const double bc2 = 1.0 - std::pow(kBeta2, epoch);
        // cosine decay settles the late-stage dither of the adaptive steps
        const double lr = cfg.learning_rate * 0.5 *
                          (1.0 + std::cos(M_PI * (epoch - 1) / std::max(1, cfg.epochs)));
        auto adam = [&](Eigen::MatrixXd& w, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                        const Eigen::MatrixXd& g) {
            m = kBeta1 * m + (1.0 - kBeta1) * g;
            v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
            w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
        };
        adam(model.w_in, m_in, v_in, lg.g_in);
        adam(model.w_out, m_out, v_out, lg.g_out);
    }
    const double final_loss =
        loss_and_gradient(z, y, model.w_in, model.w_out, lambda_sparse).loss;
    if (!std::isfinite(final_loss)) {
        throw TrainingDivergence("non-finite loss at epoch " + std::to_string(cfg.epochs));
    }
    model.loss_history.push_back(final_loss);

    model.tail_monotone = true;
    const size_t tail_start =
        model.loss_history.size() - std::max<size_t>(2, model.loss_history.size() / 10);
    for (size_t e = tail_start; e + 1 < model.loss_history.size(); ++e) {
        const double allowed = kTailTol * std::max(1.0, std::abs(model.loss_history[e]));
        if (model.loss_history[e + 1] > model.loss_history[e] + allowed) {
            model.tail_monotone = false;
            break;
        }
    }
    return model;
}

ScoreMatrix extract(const BottleneckModel& model) {
    ScoreMatrix s = raw_extract(model.w_out, model.w_in, model.k, model.max_lag);
    s.normalize_max();
    return s;
}

double fit_predict_mse(const BottleneckModel& model, const Series& heldout) {
    if (heldout.k() != model.k) {
        throw ParameterError("fit_predict_mse: series has K=" + std::to_string(heldout.k()) +
                             ", model expects " + std::to_string(model.k));
    }
    if (heldout.t() <= model.max_lag + 1) {
        throw ParameterError("fit_predict_mse: heldout length must exceed max_lag + 1");
    }
    const auto design = baselines::LaggedDesign::build(heldout, model.max_lag);
    Eigen::MatrixXd z = (design.regressors.rowwise() - model.reg_mean.transpose())
                            .array()
                            .rowwise() /
                        model.reg_scale.transpose().array();
    const Eigen::MatrixXd pred =
        (z * model.w_in.transpose()) * model.w_out.transpose();
    const Eigen::MatrixXd err =
        (design.targets.rowwise() - model.target_mean.transpose()) - pred;
    return err.squaredNorm() / static_cast<double>(err.size());
}

void BottleneckModel::save_csv(const std::filesystem::path& path) const {
    csv::Table table;
    table.header = {"matrix", "row", "col", "value"};
    auto emit = [&](const std::string& name, const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                table.rows.push_back({name, std::to_string(r), std::to_string(c),
                                      csv::format_double(m(r, c))});
    };
    emit("w_in", w_in);
    emit("w_out", w_out);
    emit("reg_mean", reg_mean);
    emit("reg_scale", reg_scale);
    emit("target_mean", target_mean);
    csv::write_file(path, table);
}

}  // namespace causalbench::bottleneck
