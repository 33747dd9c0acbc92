#include "causalbench/stages.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "causalbench/baselines.hpp"
#include "causalbench/bottleneck.hpp"
#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/provenance.hpp"
#include "causalbench/rng.hpp"

namespace causalbench::harness {

namespace {

using evalstats::RunRecord;

struct JobResult {
    std::vector<RunRecord> records;
    int failures = 0;
    std::vector<std::filesystem::path> files;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunRecord base_record(const ExperimentPlan& plan, const PlanCell& cell, int seed_idx,
                      const std::string& method, const std::string& arm) {
    RunRecord r;
    r.stage = plan.stage;
    r.cell = cell.id;
    r.seed = static_cast<std::uint64_t>(seed_idx);
    r.method = method;
    r.arm = arm;
    return r;
}

// One scored run: method on series against truth.
RunRecord score_one(const ExperimentPlan& plan, const PlanCell& cell, int seed_idx,
                    const std::string& method, const std::string& arm, const Series& series,
                    const LaggedAdjacency& truth, const MethodRegistry& registry,
                    std::uint64_t cell_index, bool score_on_full,
                    ScoreMatrix* scores_out = nullptr,
                    const std::vector<std::pair<int, int>>* excluded = nullptr) {
    RunRecord rec = base_record(plan, cell, seed_idx, method, arm);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        MethodContext ctx;
        ctx.max_lag = cell.lag_for(method);
        ctx.seed = derive_seed(plan.base_seed, plan.stage, cell_index,
                               static_cast<std::uint64_t>(seed_idx), "train:" + method);
        ctx.score_on_full = score_on_full;
        auto res = registry.get(method)(series, ctx);
        rec.auroc = excluded ? evalstats::auroc_flat_lag(res.scores, truth, *excluded)
                             : evalstats::auroc_flat_lag(res.scores, truth);
        rec.mse = res.mse;
        rec.flags = res.flags;
        if (scores_out) *scores_out = res.scores;
    } catch (const Error& e) {
        rec.flags = std::string("error:") + e.what();
    }
    rec.wall_time = seconds_since(t0);
    return rec;
}

JobResult run_synth_job(const ExperimentPlan& plan, const PlanCell& cell,
                        std::uint64_t cell_index, int seed_idx,
                        const MethodRegistry& registry) {
    JobResult out;
    synthgen::GeneratorSpec spec = cell.gen;
    spec.seed = derive_seed(plan.base_seed, plan.stage, cell_index,
                            static_cast<std::uint64_t>(seed_idx), "gen");

    std::vector<std::string> methods = plan.methods;
    if (plan.stage == "survives") {
        for (int d : plan.d_grid) {
            for (double lam : plan.lambda_grid) methods.push_back(bottleneck_grid_name(d, lam));
        }
    }

    Series series;
    LaggedAdjacency truth;
    try {
        std::tie(series, truth) = synthgen::generate(spec);
    } catch (const Error& e) {
        for (const auto& m : methods) {
            auto rec = base_record(plan, cell, seed_idx, m, "-");
            rec.flags = std::string("error:") + e.what();
            out.records.push_back(std::move(rec));
            ++out.failures;
        }
        return out;
    }

    for (const auto& method : methods) {
        RunRecord rec;
        if (method.rfind("bottleneck_d", 0) == 0) {
            // survives grid cell, run directly with the grid hyperparameters
            rec = base_record(plan, cell, seed_idx, method, "-");
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const auto d_pos = method.find("_d") + 2;
                const auto l_pos = method.find("_l");
                const int d = std::stoi(method.substr(d_pos, l_pos - d_pos));
                const double lam = csv::parse_double(method.substr(l_pos + 2));
                bottleneck::TrainConfig cfg;
                cfg.seed = derive_seed(plan.base_seed, plan.stage, cell_index,
                                       static_cast<std::uint64_t>(seed_idx), "train:" + method);
                auto [train_part, hold_part] =
                    baselines::time_split(series, cell.method_lag, 0.8);
                auto model = bottleneck::train(train_part, d, cell.method_lag, lam, cfg);
                rec.auroc = evalstats::auroc_flat_lag(bottleneck::extract(model), truth);
                rec.mse = bottleneck::fit_predict_mse(model, hold_part);
                if (!model.tail_monotone) rec.flags = "nonmonotone_tail";
            } catch (const Error& e) {
                rec.flags = std::string("error:") + e.what();
                ++out.failures;
            }
            rec.wall_time = seconds_since(t0);
        } else {
            rec = score_one(plan, cell, seed_idx, method, "-", series, truth, registry,
                            cell_index, false);
            if (rec.flags.rfind("error:", 0) == 0) ++out.failures;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

JobResult run_arms_job(const ExperimentPlan& plan, const PlanCell& cell,
                       std::uint64_t cell_index, int seed_idx,
                       const MethodRegistry& registry) {
    JobResult out;
    const std::uint64_t gen_seed = derive_seed(plan.base_seed, plan.stage, cell_index,
                                               static_cast<std::uint64_t>(seed_idx), "gen");
    intervene::ArmSet arms;
    try {
        arms = intervene::build_arms(cell.gen, cell.scheme, cell.t_obs, gen_seed);
    } catch (const Error& e) {
        for (const auto& m : plan.methods) {
            for (const auto& arm : cell.arms) {
                auto rec = base_record(plan, cell, seed_idx, m, arm);
                rec.flags = std::string("error:") + e.what();
                out.records.push_back(std::move(rec));
                ++out.failures;
            }
        }
        return out;
    }

    for (const auto& method : plan.methods) {
        for (const auto& arm : cell.arms) {
            const Series& series = arm == "obs"      ? arms.obs
                                   : arm == "combined" ? arms.combined
                                                       : arms.obs_big;
            auto rec = score_one(plan, cell, seed_idx, method, arm, series, arms.truth,
                                 registry, cell_index, /*score_on_full=*/true);
            if (rec.flags.rfind("error:", 0) == 0) ++out.failures;
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

JobResult run_real_job(const ExperimentPlan& plan, const PlanCell& cell,
                       std::uint64_t cell_index, int seed_idx,
                       const MethodRegistry& registry) {
    JobResult out;
    provenance::RealDataset dataset;
    LaggedAdjacency truth;
    std::vector<std::pair<int, int>> masked;
    try {
        const auto manifest = provenance::DatasetManifest::load(cell.manifest);
        dataset = provenance::load_csv_dataset(manifest.data_file, manifest);
        const auto policy = provenance::InclusionPolicy::default_policy();
        truth = provenance::effective_truth(dataset, policy);
        masked = provenance::excluded_pairs(dataset, policy);
    } catch (const Error& e) {
        for (const auto& m : plan.methods) {
            auto rec = base_record(plan, cell, seed_idx, m, "-");
            rec.flags = std::string("error:") + e.what();
            out.records.push_back(std::move(rec));
            ++out.failures;
        }
        return out;
    }

    std::map<std::string, ScoreMatrix> audit_scores;
    for (const auto& method : plan.methods) {
        ScoreMatrix scores;
        auto rec = score_one(plan, cell, seed_idx, method, "-", dataset.series, truth, registry,
                             cell_index, false, &scores, &masked);
        if (rec.flags.rfind("error:", 0) == 0) ++out.failures;
        else if (seed_idx == 0) audit_scores.emplace(method, std::move(scores));
        if (!dataset.warnings.empty()) {
            if (!rec.flags.empty()) rec.flags += ';';
            rec.flags += "warn:" + dataset.warnings;
        }
        out.records.push_back(std::move(rec));
    }

    // Ground-truth sensitivity audit on the first seed's scores.
    if (seed_idx == 0 && audit_scores.size() >= 2 && !dataset.cards.empty()) {
        try {
            const auto report = provenance::sensitivity_audit(dataset, audit_scores);
            const auto csv_path = plan.out_dir / (cell.id + "_audit.csv");
            report.save_csv(csv_path);
            std::ofstream txt(plan.out_dir / (cell.id + "_audit.txt"));
            txt << report.text();
            out.files.push_back(csv_path);
            out.files.push_back(plan.out_dir / (cell.id + "_audit.txt"));
            for (const auto& [name, scores] : audit_scores) {
                const auto p = plan.out_dir / (cell.id + "_scores_" + name + ".csv");
                scores.save_csv(p);
                out.files.push_back(p);
            }
        } catch (const Error& e) {
            std::cerr << "[" << plan.stage << "] audit failed for " << cell.id << ": "
                      << e.what() << "\n";
        }
    }
    return out;
}

}  // namespace

std::string bottleneck_grid_name(int d, double lambda) {
    return "bottleneck_d" + std::to_string(d) + "_l" + csv::format_double(lambda);
}

StageResult run_stage(const ExperimentPlan& plan_in, const MethodRegistry& registry,
                      const StageOptions& opts) {
    plan_in.validate();
    for (const auto& m : plan_in.methods) registry.get(m);  // fail fast on unknown methods

    // Real cells with missing files degrade to a warning, not a failure.
    ExperimentPlan plan = plan_in;
    plan.cells.clear();
    for (const auto& cell : plan_in.cells) {
        if (cell.kind == CellKind::real) {
            if (!std::filesystem::exists(cell.manifest)) {
                std::cerr << "[" << plan.stage << "] skipping cell " << cell.id
                          << ": manifest not found: " << cell.manifest.string() << "\n";
                continue;
            }
            try {
                const auto manifest = provenance::DatasetManifest::load(cell.manifest);
                if (!std::filesystem::exists(manifest.data_file)) {
                    std::cerr << "[" << plan.stage << "] skipping cell " << cell.id
                              << ": data file not found: " << manifest.data_file.string()
                              << "\n";
                    continue;
                }
            } catch (const Error& e) {
                std::cerr << "[" << plan.stage << "] skipping cell " << cell.id << ": "
                          << e.what() << "\n";
                continue;
            }
        }
        plan.cells.push_back(cell);
    }
    if (plan.cells.empty()) throw PlanError("no runnable cells in stage " + plan.stage);

    StageResult result;

    // Seed-role injectivity check over the whole plan.
    {
        std::set<std::uint64_t> seen;
        std::size_t total = 0;
        auto probe = [&](std::uint64_t s) {
            ++total;
            seen.insert(s);
        };
        for (std::uint64_t ci = 0; ci < plan.cells.size(); ++ci) {
            for (int si = 0; si < plan.n_seeds; ++si) {
                probe(derive_seed(plan.base_seed, plan.stage, ci, si, "gen"));
                probe(SeedMixer(derive_seed(plan.base_seed, plan.stage, ci, si, "gen"))
                          .mix("intervention")
                          .value());
                for (const auto& m : plan.methods) {
                    probe(derive_seed(plan.base_seed, plan.stage, ci, si, "train:" + m));
                }
            }
        }
        result.seed_collision = seen.size() != total;
        if (result.seed_collision) {
            std::cerr << "[" << plan.stage << "] warning: derived-seed collision detected\n";
        }
    }

    std::filesystem::create_directories(plan.out_dir);

    struct Job {
        const PlanCell* cell;
        std::uint64_t cell_index;
        int seed_idx;
    };
    std::vector<Job> jobs;
    for (std::uint64_t ci = 0; ci < plan.cells.size(); ++ci) {
        for (int si = 0; si < plan.n_seeds; ++si) jobs.push_back({&plan.cells[ci], ci, si});
    }

    std::vector<JobResult> outputs(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) break;
            const auto& job = jobs[idx];
            const auto t0 = std::chrono::steady_clock::now();
            switch (job.cell->kind) {
                case CellKind::synth:
                    outputs[idx] = run_synth_job(plan, *job.cell, job.cell_index, job.seed_idx,
                                                 registry);
                    break;
                case CellKind::arms:
                    outputs[idx] = run_arms_job(plan, *job.cell, job.cell_index, job.seed_idx,
                                                registry);
                    break;
                case CellKind::real:
                    outputs[idx] = run_real_job(plan, *job.cell, job.cell_index, job.seed_idx,
                                                registry);
                    break;
            }
            if (!opts.quiet) {
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "[" << plan.stage << "] " << job.cell->id << " seed "
                          << job.seed_idx << " done in " << seconds_since(t0) << "s\n";
            }
        }
    };

    unsigned n_threads = opts.jobs > 0 ? static_cast<unsigned>(opts.jobs)
                                       : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(jobs.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (auto& out : outputs) {
        result.failures += out.failures;
        for (auto& r : out.records) result.records.push_back(std::move(r));
        for (auto& f : out.files) result.report_files.push_back(std::move(f));
    }

    // Canonical order: parallelism never changes the ledger.
    std::sort(result.records.begin(), result.records.end(),
              [](const RunRecord& a, const RunRecord& b) {
                  return std::tie(a.cell, a.seed, a.method, a.arm) <
                         std::tie(b.cell, b.seed, b.method, b.arm);
              });

    result.ledger_path = plan.out_dir / "ledger.csv";
    evalstats::save_ledger(result.ledger_path, result.records);

    auto reports = emit_reports(result.records, plan);
    for (auto& f : reports) result.report_files.push_back(std::move(f));
    return result;
}

}  // namespace causalbench::harness
