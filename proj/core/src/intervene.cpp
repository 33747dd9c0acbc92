#include "causalbench/intervene.hpp"

#include <algorithm>
#include <cmath>

#include "causalbench/csv.hpp"
#include "causalbench/errors.hpp"
#include "causalbench/rng.hpp"

namespace causalbench::intervene {

std::string kind_name(Kind kind) {
    switch (kind) {
        case Kind::do_clamp: return "do_clamp";
        case Kind::soft_noise: return "soft_noise";
        case Kind::random_forcing: return "random_forcing";
    }
    return "?";
}

Kind parse_kind(const std::string& name) {
    if (name == "do_clamp") return Kind::do_clamp;
    if (name == "soft_noise") return Kind::soft_noise;
    if (name == "random_forcing") return Kind::random_forcing;
    throw ParameterError("unknown intervention kind: " + name);
}

void InterventionScheme::validate(int k) const {
    if (!(scale > 0.0)) throw ParameterError("intervention scale must be > 0");
    if (episode_len < 1) throw ParameterError("episode_len must be >= 1");
    if (!order.empty()) {
        if (static_cast<int>(order.size()) != k) {
            throw ParameterError("episode order must cover every variable exactly once");
        }
        std::vector<char> seen(k, 0);
        for (int v : order) {
            if (v < 0 || v >= k || seen[v]) {
                throw ParameterError("episode order must be a permutation of 0..K-1");
            }
            seen[v] = 1;
        }
    }
}

void InterventionLog::save_csv(const std::filesystem::path& path) const {
    csv::Table table;
    table.header = {"t", "var", "kind", "value"};
    for (const auto& e : entries) {
        table.rows.push_back({std::to_string(e.t), std::to_string(e.var), kind_name(e.kind),
                              csv::format_double(e.value)});
    }
    csv::write_file(path, table);
}

namespace {

// Applies consecutive per-variable episodes starting at row `start`.
// Observational standard deviations come from the realized prefix rows; the
// episode constants and noise draw from a stream the generator never reads.
class EpisodeModifier : public synthgen::StepModifier {
  public:
    EpisodeModifier(const InterventionScheme& scheme, int k, long start, std::uint64_t seed,
                    InterventionLog* log)
        : scheme_(scheme), k_(k), start_(start), rng_(seed), log_(log),
          sum_(Eigen::VectorXd::Zero(k)), sumsq_(Eigen::VectorXd::Zero(k)) {
        order_.resize(k);
        if (scheme.order.empty()) {
            for (int i = 0; i < k; ++i) order_[i] = i;
        } else {
            order_ = scheme.order;
        }
    }

    void apply(long t, Eigen::VectorXd& x) override {
        if (t < start_) {
            sum_ += x;
            sumsq_ += x.cwiseProduct(x);
            return;
        }
        const long idx = (t - start_) / scheme_.episode_len;
        if (idx >= static_cast<long>(order_.size())) return;
        const int var = order_[idx];

        if (idx != current_episode_) {
            current_episode_ = idx;
            const double sd = prefix_sd(var);
            if (scheme_.kind == Kind::do_clamp) {
                const double sign = rng_.uniform() < 0.5 ? -1.0 : 1.0;
                episode_value_ = sign * scheme_.scale * sd;
            } else {
                episode_value_ = scheme_.scale * sd;  // noise sd for soft / forcing scale
            }
        }

        switch (scheme_.kind) {
            case Kind::do_clamp:
                x(var) = episode_value_;
                log_->entries.push_back({t, var, Kind::do_clamp, episode_value_});
                break;
            case Kind::soft_noise:
                x(var) += episode_value_ * rng_.gaussian();
                log_->entries.push_back({t, var, Kind::soft_noise, episode_value_});
                break;
            case Kind::random_forcing:
                x(var) = episode_value_ * rng_.gaussian();
                log_->entries.push_back({t, var, Kind::random_forcing, x(var)});
                break;
        }
    }

  private:
    double prefix_sd(int var) const {
        const double n = static_cast<double>(start_);
        const double mean = sum_(var) / n;
        const double var_hat = std::max(0.0, sumsq_(var) / n - mean * mean);
        return std::sqrt(var_hat);
    }

    InterventionScheme scheme_;
    int k_;
    long start_;
    Rng rng_;
    InterventionLog* log_;
    std::vector<int> order_;
    long current_episode_ = -1;
    double episode_value_ = 0.0;
    Eigen::VectorXd sum_, sumsq_;
};

}  // namespace

std::tuple<Series, LaggedAdjacency, InterventionLog> simulate_with_interventions(
    const synthgen::GeneratorSpec& spec_in, const InterventionScheme& scheme,
    std::uint64_t seed) {
    synthgen::GeneratorSpec spec = spec_in;
    spec.seed = seed;
    spec.validate();
    scheme.validate(spec.k);

    const long block = static_cast<long>(spec.k) * scheme.episode_len;
    const long start = spec.t - block;
    if (start < 10) {
        throw ParameterError("intervened run needs >= 10 observational rows before episodes");
    }

    auto model = synthgen::accept_structure(spec);
    InterventionLog log;
    EpisodeModifier modifier(scheme, spec.k, start,
                             SeedMixer(seed).mix("intervention").value(), &log);
    Series series = synthgen::simulate(model, spec.t, &modifier);
    auto log_ptr = std::make_shared<InterventionLog>(log);
    series.intervention_log = log_ptr;
    return {std::move(series), model.truth, std::move(log)};
}

ArmSet build_arms(const synthgen::GeneratorSpec& spec_in, const InterventionScheme& scheme,
                  long t_obs, std::uint64_t seed) {
    if (t_obs < 50) throw ParameterError("build_arms requires t_obs >= 50");
    synthgen::GeneratorSpec spec = spec_in;
    spec.seed = seed;
    scheme.validate(spec.k);
    spec.t = t_obs + static_cast<long>(spec.k) * scheme.episode_len;
    spec.validate();

    auto model = synthgen::accept_structure(spec);

    ArmSet arms;
    arms.t_obs = t_obs;
    arms.episode_len = scheme.episode_len;
    arms.truth = model.truth;
    arms.obs_big = synthgen::simulate(model, spec.t);

    auto log = std::make_shared<InterventionLog>();
    EpisodeModifier modifier(scheme, spec.k, t_obs,
                             SeedMixer(seed).mix("intervention").value(), log.get());
    arms.combined = synthgen::simulate(model, spec.t, &modifier);
    arms.combined.intervention_log = log;
    arms.log = log;
    arms.obs = arms.obs_big.head(t_obs);
    return arms;
}

void ArmSet::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    obs.save_csv(dir / "obs.csv");
    combined.save_csv(dir / "combined.csv");
    obs_big.save_csv(dir / "obs_big.csv");
    if (log) log->save_csv(dir / "interventions.csv");

    csv::Table manifest;
    manifest.header = {"role", "file", "rows"};
    manifest.rows.push_back({"obs", "obs.csv", std::to_string(obs.t())});
    manifest.rows.push_back({"combined", "combined.csv", std::to_string(combined.t())});
    manifest.rows.push_back({"obs_big", "obs_big.csv", std::to_string(obs_big.t())});
    csv::write_file(dir / "arms_manifest.csv", manifest);
}

}  // namespace causalbench::intervene
