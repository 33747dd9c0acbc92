#include "causalbench/synthgen.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "causalbench/errors.hpp"
#include "causalbench/rng.hpp"

namespace causalbench::synthgen {

namespace {

constexpr double kLinearGuard = 1e6;   // overflow guard for structural recursions
constexpr double kLorenzGuard = 1e8;
constexpr double kTargetRadius = 0.9;  // companion spectral radius after rescale
constexpr int kMaxAttempts = 100;

// regime_switch internals: shared support density and coefficient ranges
constexpr double kRegimeSupportDensity = 0.35;
constexpr double kRegimeDiagLo = 0.3, kRegimeDiagHi = 0.6;
constexpr double kRegimeOffLo = 0.3, kRegimeOffHi = 0.8;

std::vector<std::string> default_names(int k) {
    std::vector<std::string> names;
    names.reserve(k);
    for (int j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

// Contracts an unstable draw to spectral radius `target`. Draws already at or
// below the target keep their coefficients: scaling a nearly nilpotent draw
// UP would manufacture large, delicately cancelling coefficients whose
// subsystems turn explosive once an intervention clamps a variable.
void rescale_companion(std::vector<Eigen::MatrixXd>& coef, double target) {
    const double rho = companion_spectral_radius(coef);
    if (rho <= target) return;
    const double s = target / rho;
    double s_pow = 1.0;
    for (auto& a : coef) {
        s_pow *= s;  // lag tau scales by s^tau so every companion eigenvalue scales by s
        a *= s_pow;
    }
}

// Draws the coefficient tensors and ground truth for one attempt.
// Returns false when the support came out empty (caller redraws).
bool draw_structure(const GeneratorSpec& spec, std::uint64_t attempt, StructuralModel& model) {
    model.family = spec.family;
    model.k = spec.k;
    model.alpha = spec.nonlinearity;
    model.forcing_f = spec.forcing_f;
    model.innovations_seed = SeedMixer(spec.seed).mix("innovations").value();
    Rng rng(SeedMixer(spec.seed).mix("structure").mix(attempt).value());

    switch (spec.family) {
        case Family::var_chain: {
            model.max_lag = 1;
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(spec.k, spec.k);
            model.truth = LaggedAdjacency(spec.k, 1);
            for (int i = 0; i < spec.k; ++i) {
                a(i, i) = 0.5;
                model.truth.set_edge(i, i, 1);
            }
            for (int i = 0; i + 1 < spec.k; ++i) {
                a(i + 1, i) = 0.5;
                model.truth.set_edge(i + 1, i, 1);
            }
            model.coef = {a};
            return true;
        }
        case Family::var_random:
        case Family::causeme_nonlinear: {
            model.max_lag = spec.max_lag;
            model.truth = LaggedAdjacency(spec.k, spec.max_lag);
            model.coef.assign(spec.max_lag, Eigen::MatrixXd::Zero(spec.k, spec.k));
            int n_edges = 0;
            for (int tau = 1; tau <= spec.max_lag; ++tau) {
                for (int i = 0; i < spec.k; ++i) {
                    for (int j = 0; j < spec.k; ++j) {
                        if (i == j) continue;
                        const bool edge = rng.uniform() < spec.density;
                        const double c = rng.signed_uniform(0.2, 0.8);
                        if (edge) {
                            model.coef[tau - 1](i, j) = c;
                            model.truth.set_edge(i, j, tau);
                            ++n_edges;
                        }
                    }
                }
            }
            if (n_edges == 0) return false;
            rescale_companion(model.coef, kTargetRadius);
            return true;
        }
        case Family::regime_switch: {
            model.max_lag = 1;
            model.truth = LaggedAdjacency(spec.k, 1);
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(spec.k, spec.k);
            Eigen::MatrixXd b = Eigen::MatrixXd::Zero(spec.k, spec.k);
            int n_edges = 0;
            for (int i = 0; i < spec.k; ++i) {
                // self-memory in both regimes, positive for stability
                a(i, i) = kRegimeDiagLo + (kRegimeDiagHi - kRegimeDiagLo) * rng.uniform();
                b(i, i) = kRegimeDiagLo + (kRegimeDiagHi - kRegimeDiagLo) * rng.uniform();
                model.truth.set_edge(i, i, 1);
                for (int j = 0; j < spec.k; ++j) {
                    if (i == j) continue;
                    const bool edge = rng.uniform() < kRegimeSupportDensity;
                    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                    const double mag_a = kRegimeOffLo + (kRegimeOffHi - kRegimeOffLo) * rng.uniform();
                    const double mag_b = kRegimeOffLo + (kRegimeOffHi - kRegimeOffLo) * rng.uniform();
                    if (edge) {
                        // shared sign so the pooled-series signal does not cancel
                        a(i, j) = sign * mag_a;
                        b(i, j) = sign * mag_b;
                        model.truth.set_edge(i, j, 1);
                        ++n_edges;
                    }
                }
            }
            if (n_edges == 0) return false;
            model.coef = {a};
            model.coef_b = {b};
            rescale_companion(model.coef, kTargetRadius);
            rescale_companion(model.coef_b, kTargetRadius);
            model.switch_prob = 0.02;
            return true;
        }
        case Family::lorenz96: {
            model.max_lag = 1;
            model.truth = LaggedAdjacency(spec.k, 1);
            for (int i = 0; i < spec.k; ++i) {
                model.truth.set_edge(i, i, 1);
                model.truth.set_edge(i, (i + 1) % spec.k, 1);
                model.truth.set_edge(i, (i - 1 + spec.k) % spec.k, 1);
                model.truth.set_edge(i, (i - 2 + spec.k) % spec.k, 1);
            }
            return true;
        }
    }
    throw ParameterError("unknown generator family");
}

Series simulate_linear(const StructuralModel& model, long t, StepModifier* modifier) {
    const int k = model.k;
    const int lags = model.max_lag;
    Rng innov(model.innovations_seed);

    Series out;
    out.values.resize(t, k);
    out.var_names = default_names(k);
    out.dt = 1.0;

    // history ring: hist[(step - tau) % lags] is x_{step - tau}
    std::vector<Eigen::VectorXd> hist(lags, Eigen::VectorXd::Zero(k));
    Eigen::VectorXd x(k), phi_row(k);
    int regime = 0;

    const long total = model.var_burnin + t;
    for (long step = 0; step < total; ++step) {
        if (model.family == Family::regime_switch) {
            if (innov.uniform() < model.switch_prob) regime = 1 - regime;
        }
        for (int j = 0; j < k; ++j) x(j) = innov.gaussian();

        const auto& coef = (regime == 0) ? model.coef : model.coef_b;
        for (int tau = 1; tau <= lags; ++tau) {
            const Eigen::VectorXd& past = hist[((step - tau) % lags + lags) % lags];
            if (model.alpha == 0.0) {
                x.noalias() += coef[tau - 1] * past;
            } else {
                for (int j = 0; j < k; ++j) phi_row(j) = phi_alpha(past(j), model.alpha);
                x.noalias() += coef[tau - 1] * phi_row;
            }
        }

        const long rec = step - model.var_burnin;
        if (rec >= 0 && modifier != nullptr) modifier->apply(rec, x);

        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kLinearGuard) {
            throw IntegrationBlowup("non-finite or overflowing state at step " +
                                    std::to_string(step));
        }
        if (rec >= 0) out.values.row(rec) = x.transpose();
        hist[step % lags] = x;
    }
    return out;
}

void lorenz_derivative(const Eigen::VectorXd& x, double f, Eigen::VectorXd& dx) {
    const int k = static_cast<int>(x.size());
    for (int i = 0; i < k; ++i) {
        const double xp1 = x((i + 1) % k);
        const double xm1 = x((i - 1 + k) % k);
        const double xm2 = x((i - 2 + k) % k);
        dx(i) = (xp1 - xm2) * xm1 - x(i) + f;
    }
}

void rk4_step(Eigen::VectorXd& x, double h, double f, Eigen::VectorXd& k1, Eigen::VectorXd& k2,
              Eigen::VectorXd& k3, Eigen::VectorXd& k4, Eigen::VectorXd& tmp) {
    lorenz_derivative(x, f, k1);
    tmp = x + 0.5 * h * k1;
    lorenz_derivative(tmp, f, k2);
    tmp = x + 0.5 * h * k2;
    lorenz_derivative(tmp, f, k3);
    tmp = x + h * k3;
    lorenz_derivative(tmp, f, k4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Series simulate_lorenz(const StructuralModel& model, long t, StepModifier* modifier) {
    const int k = model.k;
    Rng innov(model.innovations_seed);

    Eigen::VectorXd x(k);
    if (model.lorenz_x0.size() == k) {
        x = model.lorenz_x0;
    } else {
        for (int j = 0; j < k; ++j) x(j) = model.forcing_f + 0.5 * innov.gaussian();
    }

    Eigen::VectorXd k1(k), k2(k), k3(k), k4(k), tmp(k);
    long internal_step = 0;
    auto advance = [&](int steps) {
        for (int s = 0; s < steps; ++s) {
            rk4_step(x, model.lorenz_h, model.forcing_f, k1, k2, k3, k4, tmp);
            ++internal_step;
            if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kLorenzGuard) {
                throw IntegrationBlowup("lorenz96 blow-up at internal step " +
                                        std::to_string(internal_step));
            }
        }
    };

    advance(model.lorenz_burnin);

    Series out;
    out.values.resize(t, k);
    out.var_names = default_names(k);
    out.dt = model.lorenz_h * model.lorenz_substeps;
    for (long rec = 0; rec < t; ++rec) {
        if (modifier != nullptr) modifier->apply(rec, x);
        out.values.row(rec) = x.transpose();
        if (rec + 1 < t) advance(model.lorenz_substeps);
    }
    return out;
}

}  // namespace

std::string family_name(Family family) {
    switch (family) {
        case Family::var_chain: return "var_chain";
        case Family::var_random: return "var_random";
        case Family::regime_switch: return "regime_switch";
        case Family::lorenz96: return "lorenz96";
        case Family::causeme_nonlinear: return "causeme_nonlinear";
    }
    return "?";
}

Family parse_family(const std::string& name) {
    if (name == "var_chain") return Family::var_chain;
    if (name == "var_random") return Family::var_random;
    if (name == "regime_switch") return Family::regime_switch;
    if (name == "lorenz96") return Family::lorenz96;
    if (name == "causeme_nonlinear") return Family::causeme_nonlinear;
    throw ParameterError("unknown generator family: " + name);
}

void GeneratorSpec::validate() const {
    if (k < 2) throw ParameterError("generator requires k >= 2");
    if (t < 2) throw ParameterError("generator requires t >= 2");
    if (max_lag < 1) throw ParameterError("generator requires max_lag >= 1");
    switch (family) {
        case Family::var_chain:
            if (t < 20) throw ParameterError("var_chain requires t >= 20");
            break;
        case Family::var_random:
        case Family::causeme_nonlinear:
            if (!(density > 0.0 && density <= 1.0)) {
                throw ParameterError("density must lie in (0, 1]");
            }
            if (family == Family::causeme_nonlinear &&
                !(nonlinearity >= 0.0 && nonlinearity <= 1.0)) {
                throw ParameterError("nonlinearity must lie in [0, 1]");
            }
            break;
        case Family::regime_switch:
            break;
        case Family::lorenz96:
            if (k < 4) throw ParameterError("lorenz96 requires k >= 4 (cyclic neighbors)");
            if (!std::isfinite(forcing_f)) throw ParameterError("forcing_f must be finite");
            break;
    }
}

std::string GeneratorSpec::describe() const {
    std::ostringstream os;
    os << family_name(family) << " k=" << k << " t=" << t;
    switch (family) {
        case Family::var_chain:
        case Family::regime_switch: break;
        case Family::var_random:
            os << " lag=" << max_lag << " density=" << density;
            break;
        case Family::causeme_nonlinear:
            os << " lag=" << max_lag << " density=" << density << " alpha=" << nonlinearity;
            break;
        case Family::lorenz96:
            os << " F=" << forcing_f;
            break;
    }
    return os.str();
}

double phi_alpha(double u, double alpha) {
    if (alpha == 0.0) return u;
    return (1.0 - alpha) * u + alpha * std::tanh(2.0 * u);
}

double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& coef) {
    const int lags = static_cast<int>(coef.size());
    const int k = static_cast<int>(coef.front().rows());
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(k * lags, k * lags);
    for (int tau = 0; tau < lags; ++tau) {
        companion.block(0, tau * k, k, k) = coef[tau];
    }
    for (int tau = 1; tau < lags; ++tau) {
        companion.block(tau * k, (tau - 1) * k, k, k).setIdentity();
    }
    return companion.eigenvalues().cwiseAbs().maxCoeff();
}

StructuralModel accept_structure(const GeneratorSpec& spec) {
    spec.validate();
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        StructuralModel model;
        if (!draw_structure(spec, attempt, model)) continue;  // zero-edge support
        try {
            simulate(model, spec.t);  // stability probe on the plain run
            return model;
        } catch (const IntegrationBlowup&) {
            if (spec.family == Family::lorenz96 || spec.family == Family::var_chain) {
                throw;  // deterministic structure, a redraw cannot help
            }
        }
    }
    throw Error("no stable, non-degenerate structure after " + std::to_string(kMaxAttempts) +
                " attempts for " + spec.describe());
}

Series simulate(const StructuralModel& model, long t, StepModifier* modifier) {
    if (model.family == Family::lorenz96) return simulate_lorenz(model, t, modifier);
    return simulate_linear(model, t, modifier);
}

std::pair<Series, LaggedAdjacency> generate(const GeneratorSpec& spec) {
    StructuralModel model = accept_structure(spec);
    Series series = simulate(model, spec.t);
    return {std::move(series), model.truth};
}

std::pair<Series, LaggedAdjacency> gen_var_chain(int k, long t, std::uint64_t seed) {
    GeneratorSpec spec;
    spec.family = Family::var_chain;
    spec.k = k;
    spec.t = t;
    spec.seed = seed;
    return generate(spec);
}

std::pair<Series, LaggedAdjacency> gen_var_random(int k, long t, int max_lag, double density,
                                                  std::uint64_t seed) {
    GeneratorSpec spec;
    spec.family = Family::var_random;
    spec.k = k;
    spec.t = t;
    spec.max_lag = max_lag;
    spec.density = density;
    spec.seed = seed;
    return generate(spec);
}

std::pair<Series, LaggedAdjacency> gen_regime_switch(int k, long t, std::uint64_t seed) {
    GeneratorSpec spec;
    spec.family = Family::regime_switch;
    spec.k = k;
    spec.t = t;
    spec.seed = seed;
    return generate(spec);
}

std::pair<Series, LaggedAdjacency> gen_lorenz96(int k, long t, double forcing_f,
                                                std::uint64_t seed) {
    GeneratorSpec spec;
    spec.family = Family::lorenz96;
    spec.k = k;
    spec.t = t;
    spec.forcing_f = forcing_f;
    spec.seed = seed;
    return generate(spec);
}

std::pair<Series, LaggedAdjacency> gen_causeme_nonlinear(int k, long t, int max_lag,
                                                         double density, double alpha,
                                                         std::uint64_t seed) {
    GeneratorSpec spec;
    spec.family = Family::causeme_nonlinear;
    spec.k = k;
    spec.t = t;
    spec.max_lag = max_lag;
    spec.density = density;
    spec.nonlinearity = alpha;
    spec.seed = seed;
    return generate(spec);
}

}  // namespace causalbench::synthgen
