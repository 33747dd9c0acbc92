#include "causalbench/plan.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"

namespace causalbench::harness {

namespace {

const std::set<std::string> kStages = {"f1", "f2", "f3", "f4", "f5", "survives"};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

PlanCell parse_cell(const std::string& body) {
    PlanCell cell;
    bool has_scheme = false, is_real = false;
    for (const auto& token : split(body, ' ')) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw PlanError("cell token without '=': " + token);
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "id") cell.id = value;
        else if (key == "group") cell.group = value;
        else if (key == "family") cell.gen.family = synthgen::parse_family(value);
        else if (key == "k") cell.gen.k = std::stoi(value);
        else if (key == "t") cell.gen.t = std::stol(value);
        else if (key == "lag") cell.gen.max_lag = std::stoi(value);
        else if (key == "density") cell.gen.density = csv::parse_double(value);
        else if (key == "alpha") cell.gen.nonlinearity = csv::parse_double(value);
        else if (key == "F") cell.gen.forcing_f = csv::parse_double(value);
        else if (key == "method_lag") cell.method_lag = std::stoi(value);
        else if (key == "lag_override") {
            for (const auto& item : split(value, ',')) {
                const auto sep = item.find(':');
                if (sep == std::string::npos) {
                    throw PlanError("lag_override entries look like method:lag");
                }
                cell.lag_overrides[item.substr(0, sep)] = std::stoi(item.substr(sep + 1));
            }
        } else if (key == "scheme") {
            cell.scheme.kind = intervene::parse_kind(value);
            has_scheme = true;
        } else if (key == "scale") cell.scheme.scale = csv::parse_double(value);
        else if (key == "episode_len") cell.scheme.episode_len = std::stoi(value);
        else if (key == "t_obs") cell.t_obs = std::stol(value);
        else if (key == "arms") cell.arms = split(value, ',');
        else if (key == "manifest") {
            cell.manifest = value;
            is_real = true;
        } else throw PlanError("unknown cell key: " + key);
    }
    if (is_real) cell.kind = CellKind::real;
    else if (has_scheme) cell.kind = CellKind::arms;
    else cell.kind = CellKind::synth;
    if (cell.kind == CellKind::arms && cell.arms.empty()) {
        cell.arms = {"obs", "combined", "obs_big"};
    }
    return cell;
}

std::string cell_to_text(const PlanCell& cell) {
    std::ostringstream os;
    os << "id=" << cell.id;
    if (!cell.group.empty()) os << " group=" << cell.group;
    if (cell.kind == CellKind::real) {
        os << " manifest=" << cell.manifest.string() << " method_lag=" << cell.method_lag;
        return os.str();
    }
    os << " family=" << synthgen::family_name(cell.gen.family) << " k=" << cell.gen.k
       << " t=" << cell.gen.t;
    if (cell.gen.family == synthgen::Family::var_random ||
        cell.gen.family == synthgen::Family::causeme_nonlinear) {
        os << " lag=" << cell.gen.max_lag << " density=" << csv::format_double(cell.gen.density);
    }
    if (cell.gen.family == synthgen::Family::causeme_nonlinear) {
        os << " alpha=" << csv::format_double(cell.gen.nonlinearity);
    }
    if (cell.gen.family == synthgen::Family::lorenz96) {
        os << " F=" << csv::format_double(cell.gen.forcing_f);
    }
    os << " method_lag=" << cell.method_lag;
    if (!cell.lag_overrides.empty()) {
        os << " lag_override=";
        bool first = true;
        for (const auto& [method, lag] : cell.lag_overrides) {
            if (!first) os << ',';
            os << method << ':' << lag;
            first = false;
        }
    }
    if (cell.kind == CellKind::arms) {
        os << " scheme=" << intervene::kind_name(cell.scheme.kind)
           << " scale=" << csv::format_double(cell.scheme.scale)
           << " episode_len=" << cell.scheme.episode_len << " t_obs=" << cell.t_obs << " arms=";
        for (size_t i = 0; i < cell.arms.size(); ++i) {
            if (i) os << ',';
            os << cell.arms[i];
        }
    }
    return os.str();
}

}  // namespace

std::filesystem::path default_out_root() {
    if (const char* env = std::getenv("CAUSALBENCH_OUT"); env && *env) return env;
    return "out";
}

void ExperimentPlan::validate() const {
    if (!kStages.count(stage)) throw PlanError("unknown stage: " + stage);
    if (n_seeds < 1) throw PlanError("seeds must be >= 1");
    if (methods.empty()) throw PlanError("plan has no methods");
    std::set<std::string> mseen(methods.begin(), methods.end());
    if (mseen.size() != methods.size()) throw PlanError("duplicate method in plan");
    if (cells.empty()) throw PlanError("plan has no cells");
    if (out_dir.empty()) throw PlanError("plan has no output directory");

    std::set<std::string> ids;
    for (const auto& cell : cells) {
        if (cell.id.empty()) throw PlanError("cell without id");
        if (!ids.insert(cell.id).second) throw PlanError("duplicate cell id: " + cell.id);
        switch (cell.kind) {
            case CellKind::synth:
                cell.gen.validate();
                break;
            case CellKind::arms:
                cell.gen.validate();
                cell.scheme.validate(cell.gen.k);
                if (cell.t_obs < 50) throw PlanError("arms cell needs t_obs >= 50: " + cell.id);
                for (const auto& a : cell.arms) {
                    if (a != "obs" && a != "combined" && a != "obs_big") {
                        throw PlanError("unknown arm '" + a + "' in cell " + cell.id);
                    }
                }
                break;
            case CellKind::real:
                if (cell.manifest.empty()) throw PlanError("real cell without manifest");
                break;
        }
        if (cell.method_lag < 1) throw PlanError("method_lag must be >= 1: " + cell.id);
        for (const auto& [method, lag] : cell.lag_overrides) {
            if (lag < 1) throw PlanError("lag_override must be >= 1: " + cell.id + "/" + method);
        }
    }
    if (stage == "survives" && (d_grid.empty() || lambda_grid.empty())) {
        throw PlanError("survives stage needs d_grid and lambda_grid");
    }
}

ExperimentPlan ExperimentPlan::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PlanError("cannot open plan " + path.string());
    ExperimentPlan plan;
    plan.out_dir.clear();
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw PlanError("plan line without ':': " + line);
        const std::string key = trim(line.substr(0, colon));
        const std::string value = trim(line.substr(colon + 1));
        if (key == "stage") plan.stage = value;
        else if (key == "base_seed") plan.base_seed = std::stoull(value);
        else if (key == "seeds") plan.n_seeds = std::stoi(value);
        else if (key == "methods") plan.methods = split(value, ',');
        else if (key == "out") plan.out_dir = value;
        else if (key == "d_grid") {
            for (const auto& v : split(value, ',')) plan.d_grid.push_back(std::stoi(v));
        } else if (key == "lambda_grid") {
            for (const auto& v : split(value, ',')) {
                plan.lambda_grid.push_back(csv::parse_double(v));
            }
        } else if (key == "cell") plan.cells.push_back(parse_cell(value));
        else throw PlanError("unknown plan key: " + key);
    }
    if (plan.out_dir.empty()) plan.out_dir = default_out_root() / plan.stage;
    plan.validate();
    return plan;
}

void ExperimentPlan::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write plan " + path.string());
    out << "stage: " << stage << "\n";
    out << "base_seed: " << base_seed << "\n";
    out << "seeds: " << n_seeds << "\n";
    out << "methods: ";
    for (size_t i = 0; i < methods.size(); ++i) out << (i ? ", " : "") << methods[i];
    out << "\n";
    out << "out: " << out_dir.string() << "\n";
    if (!d_grid.empty()) {
        out << "d_grid: ";
        for (size_t i = 0; i < d_grid.size(); ++i) out << (i ? ", " : "") << d_grid[i];
        out << "\n";
    }
    if (!lambda_grid.empty()) {
        out << "lambda_grid: ";
        for (size_t i = 0; i < lambda_grid.size(); ++i) {
            out << (i ? ", " : "") << csv::format_double(lambda_grid[i]);
        }
        out << "\n";
    }
    for (const auto& cell : cells) out << "cell: " << cell_to_text(cell) << "\n";
}

namespace {

PlanCell synth_cell(const std::string& id, synthgen::Family family, int k, long t, int gen_lag,
                    double density, double alpha, int method_lag,
                    const std::string& group = "") {
    PlanCell cell;
    cell.id = id;
    cell.group = group;
    cell.kind = CellKind::synth;
    cell.gen.family = family;
    cell.gen.k = k;
    cell.gen.t = t;
    cell.gen.max_lag = gen_lag;
    cell.gen.density = density;
    cell.gen.nonlinearity = alpha;
    cell.method_lag = method_lag;
    return cell;
}

PlanCell arms_cell(const std::string& id, int k, long t_obs, double density,
                   intervene::Kind kind, std::vector<std::string> arms) {
    PlanCell cell;
    cell.id = id;
    cell.kind = CellKind::arms;
    cell.gen.family = synthgen::Family::var_random;
    cell.gen.k = k;
    cell.gen.max_lag = 1;
    cell.gen.density = density;
    cell.t_obs = t_obs;
    cell.gen.t = t_obs;  // final length set by build_arms
    cell.scheme.kind = kind;
    cell.scheme.scale = 2.0;
    cell.scheme.episode_len = 50;
    cell.method_lag = 1;
    cell.arms = std::move(arms);
    return cell;
}

}  // namespace

ExperimentPlan ExperimentPlan::default_plan(const std::string& stage,
                                            const std::filesystem::path& out_root) {
    const auto root = out_root.empty() ? default_out_root() : out_root;
    ExperimentPlan plan;
    plan.stage = stage;
    plan.out_dir = root / stage;

    using synthgen::Family;
    if (stage == "f1") {
        plan.n_seeds = 10;
        plan.methods = {"bottleneck", "ols"};
        plan.cells = {
            synth_cell("chain_k5", Family::var_chain, 5, 400, 1, 0.1, 0.0, 1),
            synth_cell("random_k10", Family::var_random, 10, 300, 1, 0.1, 0.0, 1),
            synth_cell("regime_k3", Family::regime_switch, 3, 400, 1, 0.1, 0.0, 1),
            synth_cell("lorenz_k10", Family::lorenz96, 10, 600, 1, 0.1, 0.0, 1),
        };
    } else if (stage == "f2") {
        plan.n_seeds = 3;
        plan.methods = {"bottleneck", "ols", "ridge", "lasso", "rrr"};
        for (int k : {10, 20}) {
            for (long t : {150L, 300L}) {
                for (double density : {0.04, 0.08, 0.15}) {
                    for (int gen_lag : {1, 2, 4, 8}) {
                        std::ostringstream id;
                        id << "K" << k << "_T" << t << "_d" << density << "_L" << gen_lag;
                        plan.cells.push_back(synth_cell(id.str(), Family::var_random, k, t,
                                                        gen_lag, density, 0.0, 8, "grid"));
                    }
                }
            }
        }
        for (int k : {5, 10, 20}) {
            std::ostringstream id;
            id << "causeme_K" << k;
            plan.cells.push_back(synth_cell(id.str(), Family::causeme_nonlinear, k, 300, 1, 0.1,
                                            0.3, 1, "causeme_sweep"));
        }
    } else if (stage == "f3") {
        plan.n_seeds = 5;
        plan.methods = {"granger", "lasso", "ridge", "pcmci_lite", "bottleneck"};
        // classical methods and the ground truth live on the sampled lag-1
        // grid; the lagged bottleneck variant runs its own multi-lag stack
        PlanCell lorenz = synth_cell("lorenz96", Family::lorenz96, 10, 1500, 1, 0.1, 0.0, 1);
        lorenz.lag_overrides["bottleneck"] = 4;
        plan.cells = {lorenz};
        for (const auto& name : {"climate", "finance"}) {
            PlanCell cell;
            cell.id = name;
            cell.kind = CellKind::real;
            cell.manifest = std::filesystem::path("data") / (std::string(name) + "_manifest.txt");
            cell.method_lag = 5;
            plan.cells.push_back(cell);
        }
    } else if (stage == "f4") {
        plan.n_seeds = 15;
        plan.methods = {"bottleneck"};
        for (int k : {10, 20, 30}) {
            plan.cells.push_back(arms_cell("forcing_K" + std::to_string(k), k, 300, 0.1,
                                           intervene::Kind::random_forcing,
                                           {"obs", "combined", "obs_big"}));
        }
        for (int k : {10, 20, 30}) {
            for (long t : {150L, 300L, 600L, 1200L}) {
                plan.cells.push_back(arms_cell("clamp_K" + std::to_string(k) + "_T" +
                                                   std::to_string(t),
                                               k, t, 0.1, intervene::Kind::do_clamp,
                                               {"combined", "obs_big"}));
                plan.cells.push_back(arms_cell("soft_K" + std::to_string(k) + "_T" +
                                                   std::to_string(t),
                                               k, t, 0.1, intervene::Kind::soft_noise,
                                               {"combined", "obs_big"}));
            }
        }
    } else if (stage == "f5") {
        plan.n_seeds = 10;
        plan.methods = {"bottleneck", "lasso", "granger", "pcmci_lite"};
        for (int k : {10, 20, 30}) {
            plan.cells.push_back(arms_cell("forcing_K" + std::to_string(k), k, 300, 0.1,
                                           intervene::Kind::random_forcing,
                                           {"obs", "combined", "obs_big"}));
        }
    } else if (stage == "survives") {
        plan.n_seeds = 10;
        plan.methods = {"lasso", "rrr"};
        plan.d_grid = {10, 20, 40};
        plan.lambda_grid = {0.0, 1e-3, 1e-2};
        plan.cells = {
            synth_cell("alpha03", Family::causeme_nonlinear, 20, 300, 1, 0.1, 0.3, 1),
            synth_cell("alpha00", Family::causeme_nonlinear, 20, 300, 1, 0.1, 0.0, 1),
        };
    } else {
        throw PlanError("unknown stage: " + stage);
    }
    plan.validate();
    return plan;
}

}  // namespace causalbench::harness
