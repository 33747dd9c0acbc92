#include <doctest.h>

#include <cmath>
#include <random>

#include "causalbench/errors.hpp"
#include "causalbench/evalstats.hpp"

using namespace causalbench;
using namespace causalbench::evalstats;

namespace {

// Independent oracle: O(P*N) comparison over all (positive, negative) pairs.
double auroc_bruteforce(const std::vector<double>& scores,
                        const std::vector<std::uint8_t>& labels) {
    double wins = 0.0;
    long pairs = 0;
    for (size_t p = 0; p < scores.size(); ++p) {
        if (!labels[p]) continue;
        for (size_t n = 0; n < scores.size(); ++n) {
            if (labels[n]) continue;
            ++pairs;
            if (scores[p] > scores[n]) wins += 1.0;
            else if (scores[p] == scores[n]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auroc equals the pairwise oracle on random grids (with ties)") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> level(0, 5);  // coarse levels force ties
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 29);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        bool any_pos = false, any_neg = false;
        for (int i = 0; i < n; ++i) {
            scores[i] = level(rng) / 5.0;
            labels[i] = unif(rng) < 0.4 ? 1 : 0;
            (labels[i] ? any_pos : any_neg) = true;
        }
        if (!any_pos || !any_neg) continue;
        CHECK(auroc(scores, labels) == doctest::Approx(auroc_bruteforce(scores, labels))
                                           .epsilon(1e-12));
    }
}

TEST_CASE("auroc frozen values from the pairwise oracle") {
    // k=3, one true edge (0,1). Perfect separation first.
    ScoreMatrix s(3, 1);
    LaggedAdjacency truth(3, 1);
    truth.set_edge(0, 1, 1);
    s.set(0, 1, 1, 0.9);
    s.set(1, 0, 1, 0.3);
    s.set(0, 2, 1, 0.3);
    s.set(2, 0, 1, 0.1);
    s.set(1, 2, 1, 0.5);
    s.set(2, 1, 1, 0.2);
    CHECK(auroc_flat_lag(s, truth) == doctest::Approx(1.0));

    // True edge at 0.3: one negative above (0.9), one tie (0.3), three below.
    // Oracle: (3 + 0.5) / 5 = 0.7.
    ScoreMatrix s2(3, 1);
    s2.set(0, 1, 1, 0.3);
    s2.set(1, 0, 1, 0.9);
    s2.set(0, 2, 1, 0.3);
    s2.set(2, 0, 1, 0.25);
    s2.set(1, 2, 1, 0.2);
    s2.set(2, 1, 1, 0.1);
    std::vector<double> flat{0.3, 0.9, 0.3, 0.25, 0.2, 0.1};
    std::vector<std::uint8_t> lab{1, 0, 0, 0, 0, 0};
    CHECK(auroc_bruteforce(flat, lab) == doctest::Approx(0.7));
    CHECK(auroc_flat_lag(s2, truth) == doctest::Approx(0.7));
}

TEST_CASE("auroc tie and degenerate behavior") {
    ScoreMatrix s(3, 1);  // all scores equal -> 0.5 exactly by mid-rank
    LaggedAdjacency truth(3, 1);
    truth.set_edge(0, 1, 1);
    CHECK(auroc_flat_lag(s, truth) == 0.5);

    LaggedAdjacency all_true(3, 1);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) all_true.set_edge(i, j, 1);
    CHECK_THROWS_AS(auroc_flat_lag(s, all_true), UndefinedAuroc);
    CHECK_THROWS_AS(auroc_flat_lag(s, LaggedAdjacency(3, 1)), UndefinedAuroc);
}

TEST_CASE("auroc scores identical to truth give 1.0") {
    std::mt19937_64 rng(7);
    LaggedAdjacency truth(4, 2);
    truth.set_edge(0, 1, 1);
    truth.set_edge(3, 2, 2);
    truth.set_edge(1, 3, 1);
    ScoreMatrix s(4, 2);
    for (int tau = 1; tau <= 2; ++tau)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) s.set(i, j, tau, truth.edge(i, j, tau) ? 1.0 : 0.0);
    CHECK(auroc_flat_lag(s, truth) == doctest::Approx(1.0));
    (void)rng;
}

TEST_CASE("auroc invariant under strictly increasing transforms") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        ScoreMatrix s(5, 1);
        LaggedAdjacency truth(5, 1);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                if (i == j) continue;
                s.set(i, j, 1, unif(rng));
                truth.set_edge(i, j, 1, unif(rng) < 0.3);
            }
        }
        if (truth.count_true_offdiag() == 0 || truth.count_false_offdiag() == 0) continue;
        const double base = auroc_flat_lag(s, truth);
        ScoreMatrix expd = s, affine = s;
        for (auto& v : expd.scores) v = std::exp(v) - 1.0;  // keep nonnegative
        for (auto& v : affine.scores) v = 3.0 * v;
        for (int i = 0; i < 5; ++i) {
            expd.set(i, i, 1, 0.0);
            affine.set(i, i, 1, 0.0);
        }
        CHECK(auroc_flat_lag(expd, truth) == doctest::Approx(base).epsilon(1e-12));
        CHECK(auroc_flat_lag(affine, truth) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("auroc collapses lag depth mismatches") {
    // lagged scores vs static truth: max over lags decides the ranking
    ScoreMatrix s(3, 2);
    s.set(0, 1, 1, 0.2);
    s.set(0, 1, 2, 0.9);
    s.set(1, 0, 1, 0.5);
    LaggedAdjacency truth(3, 1);
    truth.set_edge(0, 1, 1);
    const double a = auroc_flat_lag(s, truth);
    CHECK(a == doctest::Approx(1.0));  // 0.9 beats every negative

    // static scores vs lagged truth: any-lag OR collapse
    ScoreMatrix st(3, 1);
    st.set(0, 1, 1, 1.0);
    LaggedAdjacency lt(3, 3);
    lt.set_edge(0, 1, 3);
    CHECK(auroc_flat_lag(st, lt) == doctest::Approx(1.0));
}

TEST_CASE("paired_test closed forms and degenerate flag") {
    std::vector<double> all_pos(10, 0.05);
    auto r = paired_test(all_pos);
    CHECK(r.ttest_degenerate);
    CHECK(r.p_sign == doctest::Approx(2.0 * std::pow(0.5, 10)));
    CHECK(r.mean_delta == doctest::Approx(0.05));

    std::vector<double> alternating;
    for (int i = 0; i < 10; ++i) alternating.push_back(i % 2 ? 0.05 : -0.05);
    auto r2 = paired_test(alternating);
    CHECK(r2.mean_delta == doctest::Approx(0.0));
    CHECK(r2.p_ttest == doctest::Approx(1.0));
    CHECK(r2.p_sign == doctest::Approx(1.0));

    CHECK_THROWS_AS(paired_test({0.1, 0.2}), ParameterError);
}

TEST_CASE("paired_test is antisymmetric under delta negation") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.01, 0.05);
    std::vector<double> deltas;
    for (int i = 0; i < 12; ++i) deltas.push_back(normal(rng));
    auto a = paired_test(deltas);
    for (auto& d : deltas) d = -d;
    auto b = paired_test(deltas);
    CHECK(b.mean_delta == doctest::Approx(-a.mean_delta));
    CHECK(b.p_ttest == doctest::Approx(a.p_ttest));
    CHECK(b.p_sign == doctest::Approx(a.p_sign));
}

TEST_CASE("paired_test Monte-Carlo power at the reported regime") {
    // deltas ~ N(0.03, 0.01^2), n = 15: p < 1e-4 should hold essentially always.
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> normal(0.03, 0.01);
    int hits = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> deltas;
        for (int i = 0; i < 15; ++i) deltas.push_back(normal(rng));
        if (paired_test(deltas).p_ttest < 1e-4) ++hits;
    }
    CHECK(static_cast<double>(hits) / trials >= 0.97);
}

namespace {
RunRecord rec(const std::string& cell, const std::string& method, double auroc_v, double mse_v) {
    RunRecord r;
    r.stage = "test";
    r.cell = cell;
    r.method = method;
    r.auroc = auroc_v;
    r.mse = mse_v;
    return r;
}
}  // namespace

TEST_CASE("win_rate_table strict wins, ties, and missing cells") {
    std::vector<RunRecord> records;
    records.push_back(rec("c1", "ref", 0.9, 1.0));
    records.push_back(rec("c1", "a", 0.8, 2.0));
    records.push_back(rec("c2", "ref", 0.7, 1.0));
    records.push_back(rec("c2", "a", 0.7, 0.5));

    auto table = win_rate_table(records, "ref", "auroc");
    CHECK(table.rows.size() == 2);
    CHECK(table.win_rate == doctest::Approx(0.5));   // wins c1, ties c2
    CHECK(table.tie_rate == doctest::Approx(0.5));
    CHECK(table.loss_rate == doctest::Approx(0.0));
    CHECK(table.win_rate + table.tie_rate + table.loss_rate == doctest::Approx(1.0));
    CHECK(table.mean_delta == doctest::Approx(0.05));

    auto mse_table = win_rate_table(records, "ref", "mse");
    CHECK(mse_table.win_rate == doctest::Approx(0.5));  // wins c1 (1 < 2), loses c2

    records.push_back(rec("c3", "a", 0.5, 1.0));  // reference missing in c3
    CHECK_THROWS_AS(win_rate_table(records, "ref", "auroc"), IncompleteGrid);
}

TEST_CASE("win_rate_table: reference sweeping every cell") {
    std::vector<RunRecord> records;
    for (int c = 0; c < 5; ++c) {
        records.push_back(rec("c" + std::to_string(c), "ref", 0.9, 1.0));
        records.push_back(rec("c" + std::to_string(c), "a", 0.6, 2.0));
        records.push_back(rec("c" + std::to_string(c), "b", 0.7, 3.0));
    }
    auto table = win_rate_table(records, "ref", "auroc");
    CHECK(table.win_rate == doctest::Approx(1.0));
    CHECK(table.mean_delta == doctest::Approx(0.2));
    CHECK(table.best_competitor_tally.at("b") == 5);
}

TEST_CASE("ledger save/load round-trip") {
    std::vector<RunRecord> records;
    auto r = rec("cell with space", "m1", 0.75, std::numeric_limits<double>::quiet_NaN());
    r.seed = 3;
    r.arm = "combined";
    r.flags = "warn:something, with comma";
    r.wall_time = 1.5;
    records.push_back(r);
    const auto path = std::filesystem::temp_directory_path() / "causalbench_tests" /
                      "ledger.csv";
    std::filesystem::create_directories(path.parent_path());
    save_ledger(path, records);
    auto back = load_ledger(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].cell == r.cell);
    CHECK(back[0].seed == 3);
    CHECK(back[0].auroc == 0.75);
    CHECK(!back[0].has_mse());
    CHECK(back[0].flags == r.flags);
}
