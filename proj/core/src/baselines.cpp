#include "causalbench/baselines.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "causalbench/errors.hpp"
#include "causalbench/evalstats.hpp"

namespace causalbench::baselines {

namespace {

constexpr double kConditionFlagThreshold = 1e8;
constexpr double kKktTol = 1e-6;
constexpr int kMaxSweeps = 10000;
constexpr double kMinPValue = 1e-300;

std::vector<double> log_grid(double scale, double lo_exp, double hi_exp, int points) {
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
        const double e = lo_exp + (hi_exp - lo_exp) * i / (points - 1);
        grid[i] = scale * std::pow(10.0, e);
    }
    return grid;
}

void append_flag(std::string& flags, const std::string& flag) {
    if (flags.find(flag) != std::string::npos) return;
    if (!flags.empty()) flags += ';';
    flags += flag;
}

// |coef| mapped to (effect, cause, lag); diagonal zeroed, max-normalized.
// An all-zero coefficient matrix yields all-zero scores plus a flag instead
// of an error: a fully shrunk fit is a legitimate (if useless) answer.
ScoreMatrix scores_from_coef(const Eigen::MatrixXd& coef, int k, int max_lag,
                             std::string& flags) {
    ScoreMatrix s(k, max_lag);
    for (int tau = 1; tau <= max_lag; ++tau)
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < k; ++i)
                s.set(i, j, tau, std::abs(coef((tau - 1) * k + j, i)));
    s.zero_diagonal();
    try {
        s.normalize_max();
    } catch (const DegenerateExtraction&) {
        append_flag(flags, "degenerate_scores");
    }
    return s;
}

double holdout_mse(const StandardizedSplit& split, const Eigen::MatrixXd& coef) {
    if (split.z_hold.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::MatrixXd err = split.y_hold - split.z_hold * coef;
    return err.squaredNorm() / static_cast<double>(err.size());
}

double grid_score(const LinearFitResult& candidate, const FitOptions& opts, double mse) {
    // Returned value is minimized. Oracle mode maximizes AUROC.
    if (opts.oracle_truth == nullptr) return mse;
    return -evalstats::auroc_flat_lag(candidate.scores, *opts.oracle_truth);
}

}  // namespace

LaggedDesign LaggedDesign::build(const Series& series, int max_lag) {
    series.validate();
    if (max_lag < 1) throw ParameterError("max_lag must be >= 1");
    const auto t = series.t();
    const auto k = series.k();
    if (t - max_lag < 2) throw ParameterError("series too short for max_lag");

    LaggedDesign d;
    d.k = static_cast<int>(k);
    d.max_lag = max_lag;
    const auto rows = t - max_lag;
    d.targets.resize(rows, k);
    d.regressors.resize(rows, k * max_lag);
    for (Eigen::Index r = 0; r < rows; ++r) {
        d.targets.row(r) = series.values.row(max_lag + r);
        for (int tau = 1; tau <= max_lag; ++tau) {
            d.regressors.block(r, (tau - 1) * k, 1, k) = series.values.row(max_lag + r - tau);
        }
    }
    return d;
}

StandardizedSplit standardize_split(const LaggedDesign& design, double train_fraction) {
    const auto rows = design.regressors.rows();
    auto n_train = static_cast<Eigen::Index>(std::floor(train_fraction * rows));
    n_train = std::clamp<Eigen::Index>(n_train, 2, rows);

    StandardizedSplit s;
    const auto p = design.regressors.cols();
    const auto k = design.targets.cols();

    const Eigen::MatrixXd reg_train = design.regressors.topRows(n_train);
    const Eigen::MatrixXd tar_train = design.targets.topRows(n_train);

    s.reg_mean = reg_train.colwise().mean();
    s.reg_scale.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var =
            (reg_train.col(j).array() - s.reg_mean(j)).square().sum() / n_train;
        s.reg_scale(j) = std::sqrt(var);
        if (s.reg_scale(j) < 1e-12) {
            s.reg_scale(j) = 1.0;
            append_flag(s.flags, "degenerate_column");
        }
    }
    s.target_mean = tar_train.colwise().mean();

    auto standardize = [&](const Eigen::MatrixXd& reg, const Eigen::MatrixXd& tar,
                           Eigen::MatrixXd& z, Eigen::MatrixXd& y) {
        z = (reg.rowwise() - s.reg_mean.transpose()).array().rowwise() /
            s.reg_scale.transpose().array();
        y = tar.rowwise() - s.target_mean.transpose();
    };
    standardize(reg_train, tar_train, s.z_train, s.y_train);
    if (rows > n_train) {
        standardize(design.regressors.bottomRows(rows - n_train),
                    design.targets.bottomRows(rows - n_train), s.z_hold, s.y_hold);
    } else {
        s.z_hold.resize(0, p);
        s.y_hold.resize(0, k);
    }
    return s;
}

OlsSolve solve_least_squares(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double tol = smax * std::max(z.rows(), z.cols()) *
                       std::numeric_limits<double>::epsilon();

    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    Eigen::Index rank = 0;
    double smin = smax;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) {
            inv(i) = 1.0 / sv(i);
            smin = sv(i);
            ++rank;
        }
    }
    OlsSolve out;
    out.coef = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * y);
    out.rank = rank;
    out.condition = (rank > 0 && smin > 0.0) ? smax / smin
                                             : std::numeric_limits<double>::infinity();
    return out;
}

std::pair<Series, Series> time_split(const Series& series, int max_lag, double train_fraction) {
    const auto rows = series.t() - max_lag;
    if (rows < 4) throw ParameterError("time_split: series too short");
    auto n_train = static_cast<Eigen::Index>(std::floor(train_fraction * rows));
    n_train = std::clamp<Eigen::Index>(n_train, 2, rows - 1);

    Series train = series.head(max_lag + n_train);
    Series hold;
    hold.var_names = series.var_names;
    hold.dt = series.dt;
    hold.values = series.values.bottomRows(series.t() - n_train);
    return {std::move(train), std::move(hold)};
}

LinearFitResult fit_ols(const Series& series, int max_lag, const FitOptions& opts) {
    const auto design = LaggedDesign::build(series, max_lag);
    auto split = standardize_split(design);

    LinearFitResult res;
    res.flags = split.flags;
    const auto solve = solve_least_squares(split.z_train, split.y_train);
    if (solve.rank < split.z_train.cols()) append_flag(res.flags, "rank_deficient");
    if (solve.condition > kConditionFlagThreshold) append_flag(res.flags, "near_singular");

    res.mse = holdout_mse(split, solve.coef);
    res.coef = solve.coef;
    if (opts.score_on_full) {
        auto full = standardize_split(design, 1.0);
        res.coef = solve_least_squares(full.z_train, full.y_train).coef;
    }
    res.scores = scores_from_coef(res.coef, design.k, max_lag, res.flags);
    return res;
}

namespace {

// Ridge path through one SVD: B(lambda) = V diag(d/(d^2+n*lambda)) U^T Y.
struct RidgePath {
    Eigen::BDCSVD<Eigen::MatrixXd> svd;
    Eigen::MatrixXd uty;
    Eigen::Index n;

    RidgePath(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y)
        : svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV),
          uty(svd.matrixU().transpose() * y),
          n(z.rows()) {}

    Eigen::MatrixXd coef(double lambda) const {
        const auto& d = svd.singularValues();
        Eigen::VectorXd shrink(d.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            const double denom = d(i) * d(i) + static_cast<double>(n) * lambda;
            shrink(i) = denom > 0.0 ? d(i) / denom : 0.0;
        }
        return svd.matrixV() * shrink.asDiagonal() * uty;
    }
};

double max_correlation_scale(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y) {
    return (z.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(z.rows());
}

}  // namespace

LinearFitResult fit_ridge(const Series& series, int max_lag,
                          const std::vector<double>& lambda_grid, const FitOptions& opts) {
    const auto design = LaggedDesign::build(series, max_lag);
    auto split = standardize_split(design);

    std::vector<double> grid = lambda_grid;
    if (grid.empty()) {
        grid = log_grid(max_correlation_scale(split.z_train, split.y_train), -4.0, 1.0, 20);
    }

    RidgePath path(split.z_train, split.y_train);
    LinearFitResult res;
    res.flags = split.flags;
    res.tuning.grid = grid;
    res.tuning.rule = opts.oracle_truth ? "oracle-auroc" : "holdout-mse";

    double best = std::numeric_limits<double>::infinity();
    double best_lambda = grid.front();
    for (double lambda : grid) {
        const Eigen::MatrixXd b = path.coef(lambda);
        const double mse = holdout_mse(split, b);
        LinearFitResult cand;
        cand.coef = b;
        if (opts.oracle_truth) cand.scores = scores_from_coef(b, design.k, max_lag, cand.flags);
        const double crit = grid_score(cand, opts, mse);
        res.tuning.criterion.push_back(opts.oracle_truth ? -crit : crit);
        if (crit < best) {
            best = crit;
            best_lambda = lambda;
        }
    }
    res.tuning.chosen = {best_lambda};
    res.coef = path.coef(best_lambda);
    res.mse = holdout_mse(split, res.coef);
    if (opts.score_on_full) {
        auto full = standardize_split(design, 1.0);
        res.coef = RidgePath(full.z_train, full.y_train).coef(best_lambda);
    }
    res.scores = scores_from_coef(res.coef, design.k, max_lag, res.flags);
    return res;
}

namespace {

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// One equation's lasso problem in covariance form: sweeps cost O(p^2)
// instead of O(n p), and the Gram matrix is shared across equations.
struct LassoProblem {
    const Eigen::MatrixXd& q;  // Z^T Z / n, shared
    Eigen::VectorXd c;         // Z^T y / n
    double y_sq_n;             // ||y||^2 / n

    LassoProblem(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& z,
                 const Eigen::VectorXd& y)
        : q(gram),
          c(z.transpose() * y / static_cast<double>(z.rows())),
          y_sq_n(y.squaredNorm() / static_cast<double>(z.rows())) {}

    double kkt_violation(const Eigen::VectorXd& beta, double lambda) const {
        const Eigen::VectorXd g = q * beta - c;  // = -Z^T r / n
        double worst = 0.0;
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            const double v = beta(j) != 0.0
                                 ? std::abs(g(j) + lambda * (beta(j) > 0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(g(j)) - lambda);
            worst = std::max(worst, v);
        }
        return worst;
    }

    // duality gap of (1/2n)||y - Z b||^2 + lambda |b|_1 at beta; the dual
    // point is the residual scaled into the feasible box.
    double duality_gap(const Eigen::VectorXd& beta, double lambda) const {
        const Eigen::VectorXd g = q * beta - c;
        const double r_sq_n = std::max(0.0, y_sq_n - 2.0 * c.dot(beta) + beta.dot(q * beta));
        const double primal = 0.5 * r_sq_n + lambda * beta.lpNorm<1>();
        const double g_inf = g.lpNorm<Eigen::Infinity>();
        const double s = g_inf > lambda ? lambda / g_inf : 1.0;
        const double r_y_n = y_sq_n - c.dot(beta);  // y^T r / n
        const double dual = s * r_y_n - 0.5 * s * s * r_sq_n;
        return std::max(0.0, primal - dual);
    }
};

// Cyclic coordinate descent with covariance updates. Converged when the KKT
// violation reaches 1e-6 or the duality gap falls to 1e-6 of the target
// variance. At lambda = 0 the method is plain Gauss-Seidel, run to a
// tighter tolerance so it agrees with the SVD least-squares path to 1e-6.
Eigen::VectorXd coordinate_descent(const LassoProblem& prob, double lambda,
                                   Eigen::VectorXd beta) {
    const auto p = prob.c.size();
    const double kkt_tol = lambda == 0.0 ? 1e-9 : kKktTol;
    const double gap_tol = 1e-6 * std::max(prob.y_sq_n, 1e-12);

    Eigen::VectorXd qb = prob.q * beta;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double qjj = prob.q(j, j);
            if (qjj <= 0.0) continue;
            const double old = beta(j);
            const double rho = prob.c(j) - qb(j) + qjj * old;
            const double next = soft_threshold(rho, lambda) / qjj;
            if (next != old) {
                beta(j) = next;
                qb.noalias() += prob.q.col(j) * (next - old);
            }
        }
        if (prob.kkt_violation(beta, lambda) < kkt_tol) return beta;
        if (lambda > 0.0 && prob.duality_gap(beta, lambda) <= gap_tol) return beta;
    }
    throw ConvergenceError("lasso coordinate descent: duality gap " +
                           std::to_string(prob.duality_gap(beta, lambda)) + " after " +
                           std::to_string(kMaxSweeps) + " sweeps");
}

}  // namespace

double lasso_kkt_violation(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& beta, double lambda) {
    const auto n = static_cast<double>(z.rows());
    const Eigen::VectorXd g = z.transpose() * (y - z * beta) / n;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double v = beta(j) != 0.0 ? std::abs(g(j) - lambda * (beta(j) > 0 ? 1.0 : -1.0))
                                        : std::max(0.0, std::abs(g(j)) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

LinearFitResult fit_lasso(const Series& series, int max_lag,
                          const std::vector<double>& lambda_grid, const FitOptions& opts) {
    const auto design = LaggedDesign::build(series, max_lag);
    auto split = standardize_split(design);
    const auto k = design.targets.cols();
    const auto p = split.z_train.cols();

    // Relative grid (multiples of each equation's own lambda_max), descending
    // for warm starts.
    std::vector<double> rel = lambda_grid;
    if (rel.empty()) rel = log_grid(1.0, -4.0, 1.0, 20);
    std::sort(rel.begin(), rel.end(), std::greater<>());

    LinearFitResult res;
    res.flags = split.flags;
    res.tuning.grid = rel;
    res.tuning.rule = opts.oracle_truth ? "oracle-auroc" : "holdout-mse";
    res.tuning.criterion.assign(rel.size(), 0.0);
    res.coef = Eigen::MatrixXd::Zero(p, k);

    StandardizedSplit full;
    Eigen::MatrixXd gram_full;
    if (opts.score_on_full) {
        full = standardize_split(design, 1.0);
        gram_full = full.z_train.transpose() * full.z_train /
                    static_cast<double>(full.z_train.rows());
    }
    const Eigen::MatrixXd gram =
        split.z_train.transpose() * split.z_train / static_cast<double>(split.z_train.rows());

    std::vector<double> chosen(k, 0.0);
    double mse_sum = 0.0;
    for (Eigen::Index e = 0; e < k; ++e) {
        const Eigen::VectorXd y = split.y_train.col(e);
        const LassoProblem prob(gram, split.z_train, y);
        const double lam_max = prob.c.cwiseAbs().maxCoeff();

        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd best_beta = beta;
        double best_crit = std::numeric_limits<double>::infinity();
        for (size_t g = 0; g < rel.size(); ++g) {
            const double lambda = rel[g] * lam_max;
            beta = coordinate_descent(prob, lambda, beta);
            double hold = std::numeric_limits<double>::quiet_NaN();
            if (split.z_hold.rows() > 0) {
                hold = (split.y_hold.col(e) - split.z_hold * beta).squaredNorm() /
                       static_cast<double>(split.z_hold.rows());
            }
            res.tuning.criterion[g] += hold / static_cast<double>(k);
            if (hold < best_crit) {
                best_crit = hold;
                best_beta = beta;
                chosen[e] = lambda;
            }
        }
        mse_sum += best_crit;
        res.coef.col(e) = best_beta;
        if (opts.score_on_full) {
            const LassoProblem prob_full(gram_full, full.z_train, full.y_train.col(e));
            res.coef.col(e) = coordinate_descent(prob_full, chosen[e], best_beta);
        }
    }
    res.tuning.chosen = chosen;
    res.mse = mse_sum / static_cast<double>(k);

    if (opts.oracle_truth) {
        // Diagnostics mode: pick the single relative grid point with the best
        // whole-matrix AUROC, refitting all equations at that point.
        double best_auroc = -1.0;
        Eigen::MatrixXd best_coef = res.coef;
        std::vector<double> best_chosen = chosen;
        for (double relpt : rel) {
            Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(p, k);
            std::vector<double> lams(k);
            for (Eigen::Index e = 0; e < k; ++e) {
                const LassoProblem prob(gram, split.z_train, split.y_train.col(e));
                lams[e] = relpt * prob.c.cwiseAbs().maxCoeff();
                coef.col(e) = coordinate_descent(prob, lams[e], Eigen::VectorXd::Zero(p));
            }
            std::string tmp_flags;
            const auto scores = scores_from_coef(coef, design.k, max_lag, tmp_flags);
            double a;
            try {
                a = evalstats::auroc_flat_lag(scores, *opts.oracle_truth);
            } catch (const Error&) {
                continue;
            }
            if (a > best_auroc) {
                best_auroc = a;
                best_coef = coef;
                best_chosen = lams;
            }
        }
        res.coef = best_coef;
        res.tuning.chosen = best_chosen;
    }

    res.scores = scores_from_coef(res.coef, design.k, max_lag, res.flags);
    return res;
}

LinearFitResult fit_rrr(const Series& series, int max_lag, const std::vector<int>& rank_grid,
                        const FitOptions& opts) {
    const auto design = LaggedDesign::build(series, max_lag);
    auto split = standardize_split(design);
    const int k = design.k;

    std::vector<int> ranks = rank_grid;
    if (ranks.empty()) {
        for (int r = 1; r <= std::min(k, 8); ++r) ranks.push_back(r);
    }

    const auto ols = solve_least_squares(split.z_train, split.y_train);
    const Eigen::MatrixXd fitted = split.z_train * ols.coef;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(fitted, Eigen::ComputeThinV);
    const Eigen::MatrixXd v = svd.matrixV();  // K × min(n,K)

    auto project = [&](const Eigen::MatrixXd& b, int r) {
        const int rr = std::min<int>(r, static_cast<int>(v.cols()));
        const Eigen::MatrixXd vr = v.leftCols(rr);
        return Eigen::MatrixXd(b * (vr * vr.transpose()));
    };

    LinearFitResult res;
    res.flags = split.flags;
    if (ols.condition > kConditionFlagThreshold) append_flag(res.flags, "near_singular");
    res.tuning.rule = opts.oracle_truth ? "oracle-auroc" : "holdout-mse";

    double best = std::numeric_limits<double>::infinity();
    int best_rank = ranks.front();
    for (int r : ranks) {
        const Eigen::MatrixXd b = project(ols.coef, r);
        const double mse = holdout_mse(split, b);
        LinearFitResult cand;
        cand.coef = b;
        if (opts.oracle_truth) cand.scores = scores_from_coef(b, k, max_lag, cand.flags);
        const double crit = grid_score(cand, opts, mse);
        res.tuning.grid.push_back(static_cast<double>(r));
        res.tuning.criterion.push_back(opts.oracle_truth ? -crit : crit);
        if (crit < best) {
            best = crit;
            best_rank = r;
        }
    }
    res.tuning.chosen = {static_cast<double>(best_rank)};
    res.coef = project(ols.coef, best_rank);
    res.mse = holdout_mse(split, res.coef);
    if (opts.score_on_full) {
        auto full = standardize_split(design, 1.0);
        const auto ols_full = solve_least_squares(full.z_train, full.y_train);
        const Eigen::MatrixXd fitted_full = full.z_train * ols_full.coef;
        Eigen::BDCSVD<Eigen::MatrixXd> svd_full(fitted_full, Eigen::ComputeThinV);
        const Eigen::MatrixXd vf = svd_full.matrixV();
        const int rr = std::min<int>(best_rank, static_cast<int>(vf.cols()));
        res.coef = ols_full.coef * (vf.leftCols(rr) * vf.leftCols(rr).transpose());
    }
    res.scores = scores_from_coef(res.coef, k, max_lag, res.flags);
    return res;
}

namespace {

// Gram-based subset regression: RSS of target t on columns S (data centered).
struct GramRegression {
    Eigen::MatrixXd gram;       // p×p regressor inner products
    Eigen::MatrixXd cross;      // p×k regressor-target inner products
    Eigen::VectorXd target_ss;  // k target sums of squares

    double rss(const std::vector<int>& cols, int target) const {
        const int m = static_cast<int>(cols.size());
        Eigen::MatrixXd g(m, m);
        Eigen::VectorXd c(m);
        for (int a = 0; a < m; ++a) {
            c(a) = cross(cols[a], target);
            for (int b = 0; b < m; ++b) g(a, b) = gram(cols[a], cols[b]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
        Eigen::VectorXd beta;
        if (ldlt.info() == Eigen::Success) {
            beta = ldlt.solve(c);
        } else {
            beta = g.completeOrthogonalDecomposition().solve(c);
        }
        return std::max(0.0, target_ss(target) - beta.dot(c));
    }
};

}  // namespace

ScoreMatrix granger_bivariate(const Series& series, int max_lag, Eigen::MatrixXd* p_values) {
    const auto design = LaggedDesign::build(series, max_lag);
    const int k = design.k;
    const auto n = design.targets.rows();
    const int dof2 = static_cast<int>(n) - 2 * max_lag - 1;
    if (dof2 < 1) throw ParameterError("granger_bivariate: T - L must exceed 2L + 1");

    // Centering replaces the intercept; the intercept still counts in dof2.
    Eigen::MatrixXd reg = design.regressors.rowwise() -
                          design.regressors.colwise().mean();
    Eigen::MatrixXd tar = design.targets.rowwise() - design.targets.colwise().mean();

    GramRegression gr;
    gr.gram = reg.transpose() * reg;
    gr.cross = reg.transpose() * tar;
    gr.target_ss = tar.colwise().squaredNorm();

    boost::math::fisher_f fdist(max_lag, dof2);

    ScoreMatrix scores(k, 1);
    if (p_values) p_values->setOnes(k, k);
    for (int i = 0; i < k; ++i) {
        if (gr.target_ss(i) < 1e-12) continue;  // degenerate variance: scores stay 0
        std::vector<int> own;
        for (int tau = 1; tau <= max_lag; ++tau) own.push_back(design.column(i, tau));
        const double rss_r = gr.rss(own, i);
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            std::vector<int> both = own;
            for (int tau = 1; tau <= max_lag; ++tau) both.push_back(design.column(j, tau));
            const double rss_u = gr.rss(both, i);
            double p;
            if (rss_u <= 0.0) {
                p = kMinPValue;
            } else {
                const double f =
                    std::max(0.0, (rss_r - rss_u) / max_lag) / (rss_u / dof2);
                p = std::isfinite(f)
                        ? boost::math::cdf(boost::math::complement(fdist, f))
                        : 0.0;
                p = std::max(p, kMinPValue);
            }
            if (p_values) (*p_values)(i, j) = p;
            scores.set(i, j, 1, -std::log10(p));
        }
    }
    scores.zero_diagonal();
    double mx = *std::max_element(scores.scores.begin(), scores.scores.end());
    if (mx > 0.0) scores.normalize_max();
    return scores;
}

namespace {

struct PartialCorrEngine {
    Eigen::MatrixXd cov;  // joint covariance of [targets, lagged regressors]
    long n = 0;

    // Returns the partial correlation of a and b given conds, or nullopt if
    // the condition Gram is singular.
    std::optional<double> partial(int a, int b, const std::vector<int>& conds) const {
        double saa = cov(a, a), sbb = cov(b, b), sab = cov(a, b);
        if (!conds.empty()) {
            const int m = static_cast<int>(conds.size());
            Eigen::MatrixXd scc(m, m);
            Eigen::VectorXd sca(m), scb(m);
            for (int u = 0; u < m; ++u) {
                sca(u) = cov(conds[u], a);
                scb(u) = cov(conds[u], b);
                for (int v = 0; v < m; ++v) scc(u, v) = cov(conds[u], conds[v]);
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(scc);
            if (ldlt.info() != Eigen::Success) return std::nullopt;
            const Eigen::VectorXd wa = ldlt.solve(sca);
            const Eigen::VectorXd wb = ldlt.solve(scb);
            // Guard against a numerically singular factorization.
            if ((scc * wa - sca).norm() > 1e-6 * (1.0 + sca.norm())) return std::nullopt;
            saa -= sca.dot(wa);
            sbb -= scb.dot(wb);
            sab -= sca.dot(wb);
        }
        if (saa <= 1e-14 || sbb <= 1e-14) return std::nullopt;
        double r = sab / std::sqrt(saa * sbb);
        return std::clamp(r, -0.9999999999, 0.9999999999);
    }

    double p_value(double r, int n_cond) const {
        const double dof = static_cast<double>(n) - 2.0 - n_cond;
        if (dof < 1.0) return 1.0;
        const double tstat = r * std::sqrt(dof / (1.0 - r * r));
        boost::math::students_t dist(dof);
        double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(tstat)));
        return std::clamp(p, kMinPValue, 1.0);
    }
};

struct Candidate {
    int column;  // index into the covariance block
    int var;
    int lag;
    double strength = 0.0;
};

}  // namespace

ScoreMatrix pcmci_lite(const Series& series, int max_lag, double alpha_pc) {
    if (!(alpha_pc > 0.0 && alpha_pc < 1.0)) throw ParameterError("alpha_pc must be in (0,1)");
    const int ext_lag = 2 * max_lag;  // room for time-shifted parents of the cause
    const auto design = LaggedDesign::build(series, ext_lag);
    const int k = design.k;
    const auto n = design.targets.rows();
    if (n <= 3 * max_lag + 1) throw ParameterError("pcmci_lite: series too short");

    // cov over [targets | lagged regressors]; column c of the regressor block
    // sits at index k + c.
    Eigen::MatrixXd all(n, k + design.regressors.cols());
    all << design.targets, design.regressors;
    all.rowwise() -= all.colwise().mean().eval();

    PartialCorrEngine engine;
    engine.cov = all.transpose() * all / static_cast<double>(n);
    engine.n = n;

    auto col_index = [&](int var, int lag) { return k + design.column(var, lag); };
    constexpr int kMaxCond = 3;

    // Tests a link with drop-weakest retries when the condition set is
    // numerically singular.
    auto robust_partial = [&](int a, int b, std::vector<int> conds) {
        while (true) {
            auto r = engine.partial(a, b, conds);
            if (r.has_value()) return std::make_pair(*r, static_cast<int>(conds.size()));
            if (conds.empty()) return std::make_pair(0.0, 0);
            conds.pop_back();  // conds are kept sorted strongest-first
        }
    };

    // Stage 1: per-target iterative parent screening.
    std::vector<std::vector<Candidate>> parents(k);
    for (int i = 0; i < k; ++i) {
        std::vector<Candidate> cands;
        for (int tau = 1; tau <= max_lag; ++tau) {
            for (int j = 0; j < k; ++j) {
                cands.push_back({col_index(j, tau), j, tau, 0.0});
            }
        }
        for (int q = 0; q <= kMaxCond; ++q) {
            if (q > 0 && static_cast<int>(cands.size()) - 1 < q) break;
            std::vector<char> keep(cands.size(), 1);
            // strongest-first order for deterministic condition choice
            std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
                if (a.strength != b.strength) return a.strength > b.strength;
                return a.column < b.column;
            });
            for (size_t c = 0; c < cands.size(); ++c) {
                std::vector<int> conds;
                for (size_t o = 0; o < cands.size() && static_cast<int>(conds.size()) < q; ++o) {
                    if (o != c) conds.push_back(cands[o].column);
                }
                auto [r, used] = robust_partial(i, cands[c].column, conds);
                if (engine.p_value(r, used) > alpha_pc) {
                    keep[c] = 0;
                } else {
                    cands[c].strength = std::abs(r);
                }
            }
            std::vector<Candidate> next;
            for (size_t c = 0; c < cands.size(); ++c) {
                if (keep[c]) next.push_back(cands[c]);
            }
            cands = std::move(next);
            if (cands.empty()) break;
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.strength != b.strength) return a.strength > b.strength;
            return a.column < b.column;
        });
        parents[i] = std::move(cands);
    }

    // Stage 2: momentary-style recheck conditioned on both endpoints' parents.
    ScoreMatrix scores(k, max_lag);
    for (int i = 0; i < k; ++i) {
        for (const auto& link : parents[i]) {
            const int j = link.var;
            const int tau = link.lag;
            std::vector<int> conds;
            int taken = 0;
            for (const auto& p : parents[i]) {
                if (p.column == link.column) continue;
                if (taken++ >= kMaxCond) break;
                conds.push_back(p.column);
            }
            taken = 0;
            for (const auto& p : parents[j]) {
                if (taken >= kMaxCond) break;
                const int shifted = p.lag + tau;
                if (shifted > ext_lag) continue;
                const int cc = col_index(p.var, shifted);
                if (cc == link.column) continue;
                if (std::find(conds.begin(), conds.end(), cc) == conds.end()) {
                    conds.push_back(cc);
                    ++taken;
                }
            }
            auto [r, used] = robust_partial(i, link.column, conds);
            const double p = engine.p_value(r, used);
            if (i != j) scores.set(i, j, tau, 1.0 - p);
        }
    }
    scores.zero_diagonal();
    double mx = *std::max_element(scores.scores.begin(), scores.scores.end());
    if (mx > 0.0) scores.normalize_max();
    return scores;
}

}  // namespace causalbench::baselines
