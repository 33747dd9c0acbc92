#include "causalbench/registry.hpp"

#include "causalbench/baselines.hpp"
#include "causalbench/errors.hpp"

namespace causalbench::harness {

void MethodRegistry::add(const std::string& name, MethodFn fn) {
    if (methods_.count(name)) throw RegistrationError("method already registered: " + name);
    if (!fn) throw RegistrationError("method " + name + " has no scorer");
    methods_.emplace(name, std::move(fn));
}

void MethodRegistry::add_file_backed(const std::string& name,
                                     const std::filesystem::path& scores_csv) {
    ScoreMatrix scores;
    try {
        scores = ScoreMatrix::load_csv(scores_csv);  // validates now, not at run time
    } catch (const Error& e) {
        throw RegistrationError("file-backed method " + name + ": " + e.what());
    }
    add(name, [scores](const Series&, const MethodContext&) {
        MethodResult res;
        res.scores = scores;
        res.flags = "file_backed";
        return res;
    });
}

bool MethodRegistry::has(const std::string& name) const { return methods_.count(name) > 0; }

const MethodFn& MethodRegistry::get(const std::string& name) const {
    auto it = methods_.find(name);
    if (it == methods_.end()) throw RegistrationError("unknown method: " + name);
    return it->second;
}

std::vector<std::string> MethodRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(methods_.size());
    for (const auto& [name, fn] : methods_) out.push_back(name);
    return out;
}

namespace {

MethodResult from_linear_fit(baselines::LinearFitResult fit) {
    MethodResult res;
    res.scores = std::move(fit.scores);
    res.mse = fit.mse;
    res.flags = fit.flags;
    return res;
}

}  // namespace

MethodRegistry MethodRegistry::builtins(const BottleneckDefaults& defaults) {
    MethodRegistry reg;

    reg.add("bottleneck", [defaults](const Series& series, const MethodContext& ctx) {
        const int d = defaults.d > 0 ? defaults.d : static_cast<int>(series.k());
        bottleneck::TrainConfig cfg = defaults.train;
        cfg.seed = ctx.seed;
        MethodResult res;
        if (ctx.score_on_full) {
            auto model = bottleneck::train(series, d, ctx.max_lag, defaults.lambda_sparse, cfg);
            res.scores = bottleneck::extract(model);
            if (!model.tail_monotone) res.flags = "nonmonotone_tail";
        } else {
            auto [train_part, hold_part] = baselines::time_split(series, ctx.max_lag, 0.8);
            auto model =
                bottleneck::train(train_part, d, ctx.max_lag, defaults.lambda_sparse, cfg);
            res.scores = bottleneck::extract(model);
            res.mse = bottleneck::fit_predict_mse(model, hold_part);
            if (!model.tail_monotone) res.flags = "nonmonotone_tail";
        }
        return res;
    });

    reg.add("ols", [](const Series& series, const MethodContext& ctx) {
        baselines::FitOptions opts;
        opts.score_on_full = ctx.score_on_full;
        return from_linear_fit(baselines::fit_ols(series, ctx.max_lag, opts));
    });
    reg.add("ridge", [](const Series& series, const MethodContext& ctx) {
        baselines::FitOptions opts;
        opts.score_on_full = ctx.score_on_full;
        return from_linear_fit(baselines::fit_ridge(series, ctx.max_lag, {}, opts));
    });
    reg.add("lasso", [](const Series& series, const MethodContext& ctx) {
        baselines::FitOptions opts;
        opts.score_on_full = ctx.score_on_full;
        return from_linear_fit(baselines::fit_lasso(series, ctx.max_lag, {}, opts));
    });
    reg.add("rrr", [](const Series& series, const MethodContext& ctx) {
        baselines::FitOptions opts;
        opts.score_on_full = ctx.score_on_full;
        return from_linear_fit(baselines::fit_rrr(series, ctx.max_lag, {}, opts));
    });
    reg.add("granger", [](const Series& series, const MethodContext& ctx) {
        MethodResult res;
        res.scores = baselines::granger_bivariate(series, ctx.max_lag);
        return res;
    });
    reg.add("pcmci_lite", [](const Series& series, const MethodContext& ctx) {
        MethodResult res;
        res.scores = baselines::pcmci_lite(series, ctx.max_lag);
        return res;
    });
    return reg;
}

}  // namespace causalbench::harness
