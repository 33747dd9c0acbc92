#include <doctest.h>

#include <fstream>
#include <set>

#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/rng.hpp"
#include "causalbench/stages.hpp"

using namespace causalbench;
using namespace causalbench::harness;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "causalbench_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ExperimentPlan mini_plan(const std::filesystem::path& out) {
    ExperimentPlan plan;
    plan.stage = "f1";
    plan.base_seed = 4242;
    plan.n_seeds = 2;
    plan.methods = {"ols"};
    plan.out_dir = out;
    PlanCell cell;
    cell.id = "chain";
    cell.gen.family = synthgen::Family::var_chain;
    cell.gen.k = 4;
    cell.gen.t = 120;
    cell.method_lag = 1;
    plan.cells = {cell};
    return plan;
}

std::string fingerprint(const std::vector<evalstats::RunRecord>& records) {
    std::string fp;
    for (const auto& r : records) {
        fp += r.stage + "|" + r.cell + "|" + std::to_string(r.seed) + "|" + r.method + "|" +
              r.arm + "|" + csv::format_double(r.auroc) + "|" +
              (r.has_mse() ? csv::format_double(r.mse) : "-") + "|" + r.flags + "\n";
    }
    return fp;
}

}  // namespace

TEST_CASE("seed derivation separates roles and indices") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t cell = 0; cell < 20; ++cell) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            for (const auto* role : {"gen", "train:a", "train:b"}) {
                seen.insert(derive_seed(123, "f2", cell, seed, role));
            }
        }
    }
    CHECK(seen.size() == 20 * 20 * 3);
    CHECK(derive_seed(1, "f1", 0, 0, "gen") != derive_seed(2, "f1", 0, 0, "gen"));
    CHECK(derive_seed(1, "f1", 0, 0, "gen") != derive_seed(1, "f2", 0, 0, "gen"));
}

TEST_CASE("registry registration rules") {
    auto reg = MethodRegistry::builtins();
    for (const auto* name : {"bottleneck", "ols", "ridge", "lasso", "rrr", "granger",
                             "pcmci_lite"}) {
        CHECK(reg.has(name));
    }
    CHECK_THROWS_AS(reg.add("ols", nullptr), RegistrationError);
    CHECK_THROWS_AS(reg.get("nope"), RegistrationError);

    reg.add("constant", [](const Series& s, const MethodContext&) {
        MethodResult res;
        res.scores = ScoreMatrix(static_cast<int>(s.k()), 1);
        for (auto& v : res.scores.scores) v = 0.5;
        res.scores.zero_diagonal();
        return res;
    });
    CHECK(reg.has("constant"));
    CHECK_THROWS_AS(reg.add("constant", nullptr), RegistrationError);
}

TEST_CASE("file-backed methods validate at registration, not at run time") {
    auto dir = fresh_dir("file_backed");
    {
        std::ofstream bad(dir / "bad.csv");
        bad << "effect,cause,lag,score\n0,1,one,0.5\n";
    }
    auto reg = MethodRegistry::builtins();
    CHECK_THROWS_AS(reg.add_file_backed("external", dir / "bad.csv"), RegistrationError);
    CHECK_THROWS_AS(reg.add_file_backed("external", dir / "missing.csv"), RegistrationError);

    ScoreMatrix s(3, 1);
    s.set(0, 1, 1, 1.0);
    s.save_csv(dir / "good.csv");
    reg.add_file_backed("external", dir / "good.csv");
    Series dummy;
    dummy.values = Eigen::MatrixXd::Zero(10, 3);
    const auto res = reg.get("external")(dummy, MethodContext{});
    CHECK(res.scores.at(0, 1, 1) == 1.0);
    CHECK(res.flags == "file_backed");
}

TEST_CASE("a constant-score method lands at AUROC 0.5 exactly") {
    auto reg = MethodRegistry::builtins();
    reg.add("constant", [](const Series& s, const MethodContext&) {
        MethodResult res;
        res.scores = ScoreMatrix(static_cast<int>(s.k()), 1);
        for (auto& v : res.scores.scores) v = 0.7;
        res.scores.zero_diagonal();
        return res;
    });
    auto plan = mini_plan(fresh_dir("constant_method"));
    plan.methods = {"constant"};
    StageOptions opts;
    opts.quiet = true;
    const auto result = run_stage(plan, reg, opts);
    REQUIRE(result.records.size() == 2);
    for (const auto& r : result.records) CHECK(r.auroc == 0.5);
}

TEST_CASE("plan validation fails fast without side effects") {
    auto out = std::filesystem::temp_directory_path() / "causalbench_tests" /
               "never_created";
    std::filesystem::remove_all(out);

    auto plan = mini_plan(out);
    plan.n_seeds = 0;
    CHECK_THROWS_AS(plan.validate(), PlanError);
    auto reg = MethodRegistry::builtins();
    CHECK_THROWS_AS(run_stage(plan, reg, {}), PlanError);
    CHECK_FALSE(std::filesystem::exists(out));

    plan = mini_plan(out);
    plan.methods = {"unknown_method"};
    CHECK_THROWS_AS(run_stage(plan, reg, {}), RegistrationError);
    CHECK_FALSE(std::filesystem::exists(out));

    plan = mini_plan(out);
    plan.cells.push_back(plan.cells.front());  // duplicate id
    CHECK_THROWS_AS(plan.validate(), PlanError);

    plan = mini_plan(out);
    plan.stage = "f9";
    CHECK_THROWS_AS(plan.validate(), PlanError);
}

TEST_CASE("plan files round-trip") {
    auto dir = fresh_dir("plan_roundtrip");
    for (const std::string stage : {"f1", "f2", "f4", "survives"}) {
        auto plan = ExperimentPlan::default_plan(stage, dir / "out");
        const auto path = dir / (stage + "_plan.txt");
        plan.save(path);
        const auto back = ExperimentPlan::load(path);
        CHECK(back.stage == plan.stage);
        CHECK(back.base_seed == plan.base_seed);
        CHECK(back.n_seeds == plan.n_seeds);
        CHECK(back.methods == plan.methods);
        CHECK(back.d_grid == plan.d_grid);
        CHECK(back.lambda_grid == plan.lambda_grid);
        REQUIRE(back.cells.size() == plan.cells.size());
        for (size_t i = 0; i < back.cells.size(); ++i) {
            CHECK(back.cells[i].id == plan.cells[i].id);
            CHECK(back.cells[i].kind == plan.cells[i].kind);
            CHECK(back.cells[i].gen.family == plan.cells[i].gen.family);
            CHECK(back.cells[i].gen.t == plan.cells[i].gen.t);
            CHECK(back.cells[i].method_lag == plan.cells[i].method_lag);
            CHECK(back.cells[i].arms == plan.cells[i].arms);
        }
    }
}

TEST_CASE("end-to-end determinism of a mini plan across runs and thread counts") {
    auto reg = MethodRegistry::builtins();
    StageOptions serial;
    serial.quiet = true;
    serial.jobs = 1;
    StageOptions parallel;
    parallel.quiet = true;
    parallel.jobs = 3;

    auto plan_a = mini_plan(fresh_dir("determinism_a"));
    auto plan_b = mini_plan(fresh_dir("determinism_b"));
    const auto run_a = run_stage(plan_a, reg, serial);
    const auto run_b = run_stage(plan_b, reg, parallel);
    CHECK(fingerprint(run_a.records) == fingerprint(run_b.records));
    CHECK(run_a.failures == 0);
    CHECK_FALSE(run_a.seed_collision);

    // rerunning in place reproduces the ledger rows byte for byte
    const auto again = run_stage(plan_a, reg, serial);
    CHECK(fingerprint(run_a.records) == fingerprint(again.records));
}

TEST_CASE("arms stages record every (method, arm, seed) combination") {
    ExperimentPlan plan;
    plan.stage = "f4";
    plan.base_seed = 7;
    plan.n_seeds = 3;
    plan.methods = {"ols"};
    plan.out_dir = fresh_dir("arms_mini");
    PlanCell cell;
    cell.id = "forcing_mini";
    cell.kind = CellKind::arms;
    cell.gen.family = synthgen::Family::var_random;
    cell.gen.k = 4;
    cell.gen.density = 0.3;
    cell.gen.t = 60;
    cell.t_obs = 60;
    cell.scheme.kind = intervene::Kind::random_forcing;
    cell.scheme.episode_len = 10;
    cell.method_lag = 1;
    cell.arms = {"obs", "combined", "obs_big"};
    plan.cells = {cell};

    auto reg = MethodRegistry::builtins();
    StageOptions opts;
    opts.quiet = true;
    const auto result = run_stage(plan, reg, opts);
    CHECK(result.records.size() == 9);  // 3 arms x 3 seeds
    std::set<std::string> arms_seen;
    for (const auto& r : result.records) {
        arms_seen.insert(r.arm);
        CHECK(std::isfinite(r.auroc));
    }
    CHECK(arms_seen == std::set<std::string>{"obs", "combined", "obs_big"});
    CHECK(std::filesystem::exists(plan.out_dir / "f4_gaps.txt"));
}

TEST_CASE("emit_reports refuses an empty or incomplete ledger") {
    auto plan = mini_plan(fresh_dir("reports_empty"));
    CHECK_THROWS_AS(emit_reports({}, plan), IncompleteGrid);

    evalstats::RunRecord r;
    r.stage = "f1";
    r.cell = "chain";
    r.seed = 0;
    r.method = "ols";
    r.arm = "-";
    r.auroc = 0.9;
    CHECK_THROWS_AS(emit_reports({r}, plan), IncompleteGrid);  // seed 1 missing
}

TEST_CASE("stage failures are recorded, not fatal") {
    auto reg = MethodRegistry::builtins();
    reg.add("flaky", [](const Series&, const MethodContext&) -> MethodResult {
        throw ParameterError("deliberate failure");
    });
    auto plan = mini_plan(fresh_dir("flaky"));
    plan.methods = {"ols", "flaky"};
    StageOptions opts;
    opts.quiet = true;
    const auto result = run_stage(plan, reg, opts);
    CHECK(result.failures == 2);  // flaky fails on both seeds
    int error_rows = 0;
    for (const auto& r : result.records) {
        if (r.flags.rfind("error:", 0) == 0) ++error_rows;
    }
    CHECK(error_rows == 2);
    CHECK(std::filesystem::exists(result.ledger_path));
}
