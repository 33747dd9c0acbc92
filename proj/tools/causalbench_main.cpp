// causalbench CLI: generate datasets, run falsification stages, emit reports,
// and audit ground-truth sensitivity on real datasets.
//
// Exit codes: 0 success, 1 cell failures at run time, 2 invalid plan/usage.

#include <CLI11.hpp>
#include <iostream>

#include "causalbench/baselines.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/provenance.hpp"
#include "causalbench/stages.hpp"

using namespace causalbench;

namespace {

int run_one_stage(const harness::ExperimentPlan& plan, const harness::StageOptions& opts) {
    auto registry = harness::MethodRegistry::builtins();
    auto result = harness::run_stage(plan, registry, opts);
    std::cout << "stage " << plan.stage << ": " << result.records.size() << " records, "
              << result.failures << " failures\n";
    std::cout << "  ledger: " << result.ledger_path.string() << "\n";
    for (const auto& f : result.report_files) std::cout << "  report: " << f.string() << "\n";
    return result.failures > 0 ? 1 : 0;
}

harness::ExperimentPlan resolve_plan(const std::string& stage, const std::string& plan_file,
                                     const std::string& out_root, int seeds,
                                     std::uint64_t base_seed) {
    harness::ExperimentPlan plan;
    if (!plan_file.empty()) {
        plan = harness::ExperimentPlan::load(plan_file);
        if (!stage.empty() && plan.stage != stage) {
            throw PlanError("plan file is for stage " + plan.stage + ", requested " + stage);
        }
    } else {
        plan = harness::ExperimentPlan::default_plan(
            stage, out_root.empty() ? std::filesystem::path{} : std::filesystem::path(out_root));
    }
    if (seeds > 0) plan.n_seeds = seeds;
    if (base_seed != 0) plan.base_seed = base_seed;
    plan.validate();
    return plan;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale falsification benchmark for prediction-readout causal discovery"};
    app.require_subcommand(1);

    // --- gen -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate one synthetic dataset as CSV");
    std::string gen_family = "var_random", gen_out = "dataset";
    int gen_k = 10, gen_lag = 1;
    long gen_t = 300;
    double gen_density = 0.1, gen_alpha = 0.0, gen_forcing = 10.0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--family", gen_family,
                    "var_chain | var_random | regime_switch | lorenz96 | causeme_nonlinear");
    gen->add_option("--k", gen_k, "variables");
    gen->add_option("--t", gen_t, "time steps");
    gen->add_option("--lag", gen_lag, "generator max lag");
    gen->add_option("--density", gen_density, "edge probability");
    gen->add_option("--alpha", gen_alpha, "nonlinearity in [0,1]");
    gen->add_option("--forcing", gen_forcing, "lorenz96 forcing F");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output prefix (<out>_series.csv, <out>_truth.csv)");

    // --- run / report ------------------------------------------------------
    auto* run = app.add_subcommand("run", "run one falsification stage");
    std::string run_stage_name, run_plan, run_out;
    int run_seeds = 0, run_jobs = 0;
    std::uint64_t run_base_seed = 0;
    bool run_quiet = false;
    run->add_option("stage", run_stage_name, "f1 | f2 | f3 | f4 | f5 | survives")->required();
    run->add_option("--plan", run_plan, "plan file (default: built-in desk-scale plan)");
    run->add_option("--out", run_out, "output root (default $CAUSALBENCH_OUT or ./out)");
    run->add_option("--seeds", run_seeds, "override seed count");
    run->add_option("--base-seed", run_base_seed, "override base seed");
    run->add_option("--jobs", run_jobs, "worker threads (default: hardware)");
    run->add_flag("--quiet", run_quiet, "suppress per-job progress");

    auto* report = app.add_subcommand("report", "re-emit reports from a stage ledger");
    std::string rep_stage_name, rep_plan, rep_out;
    report->add_option("stage", rep_stage_name, "stage name")->required();
    report->add_option("--plan", rep_plan, "plan file (default: <out>/<stage>/plan.txt)");
    report->add_option("--out", rep_out, "output root");

    // --- audit -------------------------------------------------------------
    auto* audit = app.add_subcommand("audit", "ground-truth sensitivity audit on a dataset");
    std::string audit_manifest, audit_out;
    int audit_lag = 5;
    std::vector<std::string> audit_methods = {"granger", "lasso", "ridge", "pcmci_lite",
                                              "bottleneck"};
    audit->add_option("--manifest", audit_manifest, "dataset manifest")->required();
    audit->add_option("--max-lag", audit_lag, "method max lag");
    audit->add_option("--methods", audit_methods, "methods to score")->delimiter(',');
    audit->add_option("--out", audit_out, "output directory (default: audit_out)");

    // --- all -----------------------------------------------------------------
    auto* all = app.add_subcommand("all", "run every stage with the default plans");
    std::string all_out;
    int all_jobs = 0;
    bool all_quiet = false;
    all->add_option("--out", all_out, "output root");
    all->add_option("--jobs", all_jobs, "worker threads");
    all->add_flag("--quiet", all_quiet, "suppress per-job progress");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            synthgen::GeneratorSpec spec;
            spec.family = synthgen::parse_family(gen_family);
            spec.k = gen_k;
            spec.t = gen_t;
            spec.max_lag = gen_lag;
            spec.density = gen_density;
            spec.nonlinearity = gen_alpha;
            spec.forcing_f = gen_forcing;
            spec.seed = gen_seed;
            auto [series, truth] = synthgen::generate(spec);
            series.save_csv(gen_out + "_series.csv");
            truth.save_csv(gen_out + "_truth.csv");
            std::cout << "wrote " << gen_out << "_series.csv (" << series.t() << "x"
                      << series.k() << ") and " << gen_out << "_truth.csv ("
                      << truth.count_true_offdiag() << " true off-diagonal edges)\n";
            return 0;
        }

        if (run->parsed()) {
            auto plan = resolve_plan(run_stage_name, run_plan, run_out, run_seeds,
                                     run_base_seed);
            plan.save(plan.out_dir / "plan.txt");
            harness::StageOptions opts;
            opts.jobs = run_jobs;
            opts.quiet = run_quiet;
            return run_one_stage(plan, opts);
        }

        if (report->parsed()) {
            harness::ExperimentPlan plan;
            if (!rep_plan.empty()) {
                plan = harness::ExperimentPlan::load(rep_plan);
            } else {
                const auto root = rep_out.empty() ? harness::default_out_root()
                                                  : std::filesystem::path(rep_out);
                plan = harness::ExperimentPlan::load(root / rep_stage_name / "plan.txt");
            }
            const auto records = evalstats::load_ledger(plan.out_dir / "ledger.csv");
            auto files = harness::emit_reports(records, plan);
            for (const auto& f : files) std::cout << "report: " << f.string() << "\n";
            return 0;
        }

        if (audit->parsed()) {
            const auto manifest = provenance::DatasetManifest::load(audit_manifest);
            auto dataset = provenance::load_csv_dataset(manifest.data_file, manifest);
            if (!dataset.warnings.empty()) {
                std::cerr << "warnings: " << dataset.warnings << "\n";
            }
            auto registry = harness::MethodRegistry::builtins();
            std::map<std::string, ScoreMatrix> scores;
            for (const auto& m : audit_methods) {
                harness::MethodContext ctx;
                ctx.max_lag = audit_lag;
                ctx.seed = 0;
                scores.emplace(m, registry.get(m)(dataset.series, ctx).scores);
            }
            auto report_out = provenance::sensitivity_audit(dataset, scores);
            const std::filesystem::path dir = audit_out.empty() ? "audit_out" : audit_out;
            std::filesystem::create_directories(dir);
            report_out.save_csv(dir / (dataset.dataset_id + "_audit.csv"));
            std::cout << report_out.text();
            return 0;
        }

        if (all->parsed()) {
            int worst = 0;
            for (const std::string stage : {"f1", "f2", "f3", "f4", "f5", "survives"}) {
                auto plan = harness::ExperimentPlan::default_plan(
                    stage, all_out.empty() ? std::filesystem::path{} : std::filesystem::path(all_out));
                plan.save(plan.out_dir / "plan.txt");
                harness::StageOptions opts;
                opts.jobs = all_jobs;
                opts.quiet = all_quiet;
                worst = std::max(worst, run_one_stage(plan, opts));
            }
            return worst;
        }
    } catch (const PlanError& e) {
        std::cerr << "invalid plan: " << e.what() << "\n";
        return 2;
    } catch (const RegistrationError& e) {
        std::cerr << "invalid plan: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
