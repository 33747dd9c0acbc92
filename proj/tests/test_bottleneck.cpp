#include <doctest.h>

#include <random>

#include "causalbench/baselines.hpp"
#include "causalbench/bottleneck.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/evalstats.hpp"
#include "causalbench/rng.hpp"
#include "causalbench/synthgen.hpp"

using namespace causalbench;
using namespace causalbench::bottleneck;

namespace {

// Closed-form least squares on the standardized design, independent of the
// trained path: the oracle for the trained model's fit quality.
double ols_train_mse(const Series& series, int max_lag) {
    const auto design = baselines::LaggedDesign::build(series, max_lag);
    auto s = baselines::standardize_split(design, 1.0);
    Eigen::MatrixXd b =
        (s.z_train.transpose() * s.z_train)
            .ldlt()
            .solve(s.z_train.transpose() * s.y_train);
    const Eigen::MatrixXd err = s.y_train - s.z_train * b;
    return err.squaredNorm() / static_cast<double>(err.size());
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(71);
    const int n = 30, k = 4, d = 3, p = 8;
    Eigen::MatrixXd z(n, p), y(n, k), w_in(d, p), w_out(k, d);
    for (auto* m : {&z, &y}) {
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.gaussian();
    }
    // keep weights away from zero so the L1 subgradient is a real gradient
    for (auto* m : {&w_in, &w_out}) {
        for (Eigen::Index i = 0; i < m->size(); ++i) {
            const double g = rng.gaussian();
            m->data()[i] = (g >= 0 ? 0.2 : -0.2) + 0.3 * g;
        }
    }

    for (double lambda : {0.0, 0.01}) {
        const auto lg = loss_and_gradient(z, y, w_in, w_out, lambda);
        const double h = 1e-6;
        double worst = 0.0;
        auto check_block = [&](Eigen::MatrixXd& w, const Eigen::MatrixXd& g) {
            for (Eigen::Index i = 0; i < w.size(); ++i) {
                const double saved = w.data()[i];
                w.data()[i] = saved + h;
                const double up = loss_and_gradient(z, y, w_in, w_out, lambda).loss;
                w.data()[i] = saved - h;
                const double dn = loss_and_gradient(z, y, w_in, w_out, lambda).loss;
                w.data()[i] = saved;
                const double fd = (up - dn) / (2.0 * h);
                const double rel = std::abs(fd - g.data()[i]) /
                                   std::max(1e-8, std::abs(g.data()[i]));
                worst = std::max(worst, rel);
            }
        };
        check_block(w_in, lg.g_in);
        check_block(w_out, lg.g_out);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("training approaches the OLS optimum on the chain VAR") {
    auto [series, truth] = synthgen::gen_var_chain(5, 400, 5);
    TrainConfig cfg;
    cfg.epochs = 3000;
    cfg.seed = 1;
    auto model = train(series, 5, 1, 0.0, cfg);
    const double ols = ols_train_mse(series, 1);
    CHECK(model.final_loss() <= ols * 1.05);
    CHECK(model.final_loss() >= ols * (1.0 - 1e-6));  // OLS is the optimum
    CHECK(model.tail_monotone);
    (void)truth;
}

TEST_CASE("extraction on the trained chain model recovers the chain") {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [series, truth] = synthgen::gen_var_chain(5, 400, 100 + seed);
        TrainConfig cfg;
        cfg.seed = seed;
        auto model = train(series, 5, 1, 0.0, cfg);
        sum += evalstats::auroc_flat_lag(extract(model), truth);
    }
    CHECK(sum / 10.0 >= 0.99);
}

TEST_CASE("d=1 model trains and the pre-absolute product has rank 1") {
    auto [series, truth] = synthgen::gen_var_chain(5, 300, 6);
    TrainConfig cfg;
    cfg.epochs = 500;
    auto model = train(series, 1, 1, 0.0, cfg);
    const Eigen::MatrixXd product = model.w_out * model.w_in;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(product);
    CHECK(svd.singularValues()(0) > 0.0);
    CHECK(svd.singularValues()(1) < 1e-12 * svd.singularValues()(0));
    CHECK_NOTHROW(extract(model));
    (void)truth;
}

TEST_CASE("extraction identities forced by the definitions") {
    BottleneckModel m;
    m.k = 3;
    m.d = 3;
    m.max_lag = 1;
    m.w_out = Eigen::MatrixXd::Identity(3, 3);
    m.w_in = Eigen::MatrixXd::Identity(3, 3);
    // |I I| = I, diagonal zeroed -> nothing left to normalize
    CHECK_THROWS_AS(extract(m), DegenerateExtraction);

    m.w_in = Eigen::MatrixXd::Zero(3, 3);
    m.w_in(0, 1) = 3.0;
    const auto s = extract(m);
    CHECK(s.at(0, 1, 1) == doctest::Approx(1.0));
    int nonzero = 0;
    for (double v : s.scores) nonzero += (v != 0.0);
    CHECK(nonzero == 1);
}

TEST_CASE("extraction is invariant to an invertible change of basis") {
    Rng rng(9);
    BottleneckModel m;
    m.k = 4;
    m.d = 4;
    m.max_lag = 2;
    m.w_out.resize(4, 4);
    m.w_in.resize(4, 8);
    for (auto* w : {&m.w_out, &m.w_in}) {
        for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = rng.gaussian();
    }
    Eigen::MatrixXd a(4, 4);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
    a += 5.0 * Eigen::MatrixXd::Identity(4, 4);  // comfortably invertible

    BottleneckModel rotated = m;
    rotated.w_out = m.w_out * a;
    rotated.w_in = a.inverse() * m.w_in;
    const auto s0 = extract(m);
    const auto s1 = extract(rotated);
    for (size_t i = 0; i < s0.scores.size(); ++i) {
        CHECK(s1.scores[i] == doctest::Approx(s0.scores[i]).epsilon(1e-9));
    }
}

TEST_CASE("training is deterministic in the seed") {
    auto [series, truth] = synthgen::gen_var_random(4, 200, 1, 0.3, 7);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.seed = 99;
    auto a = train(series, 4, 1, 1e-3, cfg);
    auto b = train(series, 4, 1, 1e-3, cfg);
    CHECK((a.w_in.array() == b.w_in.array()).all());
    CHECK((a.w_out.array() == b.w_out.array()).all());
    cfg.seed = 100;
    auto c = train(series, 4, 1, 1e-3, cfg);
    CHECK_FALSE((a.w_in.array() == c.w_in.array()).all());
    (void)truth;
}

TEST_CASE("stronger sparsity penalty does not densify w_in") {
    int violations = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto [series, truth] = synthgen::gen_var_random(5, 300, 1, 0.3, 200 + seed);
        TrainConfig cfg;
        cfg.epochs = 1500;
        cfg.seed = seed;
        auto lo = train(series, 5, 1, 1e-3, cfg);
        auto hi = train(series, 5, 1, 1e-2, cfg);
        auto count_big = [](const Eigen::MatrixXd& w) {
            int n = 0;
            for (Eigen::Index i = 0; i < w.size(); ++i) n += std::abs(w.data()[i]) > 1e-3;
            return n;
        };
        const int allowed = static_cast<int>(0.05 * lo.w_in.size());
        if (count_big(hi.w_in) > count_big(lo.w_in) + allowed) ++violations;
        (void)truth;
    }
    CHECK(violations == 0);
}

TEST_CASE("fit_predict_mse on the training data tracks the OLS oracle") {
    auto [series, truth] = synthgen::gen_var_chain(5, 400, 8);
    TrainConfig cfg;
    cfg.epochs = 3000;
    auto model = train(series, 5, 1, 0.0, cfg);
    const double mse = fit_predict_mse(model, series);
    CHECK(mse <= ols_train_mse(series, 1) * 1.05);
    (void)truth;
}

TEST_CASE("fit_predict_mse closed form on a constant held-out series") {
    auto [series, truth] = synthgen::gen_var_random(4, 200, 1, 0.3, 9);
    TrainConfig cfg;
    cfg.epochs = 200;
    auto model = train(series, 4, 1, 0.0, cfg);

    Series constant;
    constant.values = Eigen::MatrixXd::Constant(20, 4, 2.5);
    constant.var_names = series.var_names;

    // prediction is the same for every row; bias^2 is the whole error
    Eigen::VectorXd z = (Eigen::VectorXd::Constant(4, 2.5) - model.reg_mean).cwiseQuotient(
        model.reg_scale);
    Eigen::VectorXd pred = model.w_out * (model.w_in * z);
    Eigen::VectorXd bias = Eigen::VectorXd::Constant(4, 2.5) - model.target_mean - pred;
    const double expected = bias.squaredNorm() / 4.0;
    CHECK(fit_predict_mse(model, constant) == doctest::Approx(expected).epsilon(1e-10));
    (void)truth;
}

TEST_CASE("parameter and divergence errors") {
    auto [series, truth] = synthgen::gen_var_random(4, 100, 1, 0.3, 10);
    CHECK_THROWS_AS(train(series, 0, 1, 0.0), ParameterError);
    Series tiny;
    tiny.values = Eigen::MatrixXd::Zero(8, 4);
    CHECK_THROWS_AS(train(tiny, 4, 1, 0.0), ParameterError);

    TrainConfig wild;
    wild.learning_rate = 1e200;  // one step overflows the forward pass
    wild.epochs = 400;
    CHECK_THROWS_AS(train(series, 4, 1, 0.0, wild), TrainingDivergence);

    auto model = train(series, 4, 1, 0.0, TrainConfig{.learning_rate = 1e-2, .epochs = 100});
    Series wrong_k;
    wrong_k.values = Eigen::MatrixXd::Zero(30, 3);
    CHECK_THROWS_AS(fit_predict_mse(model, wrong_k), ParameterError);
    Series too_short;
    too_short.values = Eigen::MatrixXd::Zero(2, 4);
    CHECK_THROWS_AS(fit_predict_mse(model, too_short), ParameterError);
    (void)truth;
}

TEST_CASE("init diagnostics are recorded") {
    auto [series, truth] = synthgen::gen_var_chain(5, 200, 11);
    TrainConfig cfg;
    cfg.epochs = 50;
    auto model = train(series, 5, 1, 0.0, cfg);
    CHECK(model.init_scores.k == 5);
    CHECK(model.loss_history.size() == 51);
    // training reduced the loss from initialization
    CHECK(model.final_loss() < model.loss_history.front());
    (void)truth;
}

TEST_CASE("lagged variant partitions w_in into per-lag blocks") {
    auto [series, truth] = synthgen::gen_var_random(4, 300, 3, 0.2, 12);
    TrainConfig cfg;
    cfg.epochs = 300;
    auto model = train(series, 4, 3, 0.0, cfg);
    CHECK(model.w_in.cols() == 12);
    const auto scores = extract(model);
    CHECK(scores.max_lag == 3);
    CHECK_NOTHROW(scores.validate());
    (void)truth;
}
