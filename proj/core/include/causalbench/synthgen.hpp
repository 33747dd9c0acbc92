#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "causalbench/types.hpp"

namespace causalbench::synthgen {

enum class Family { var_chain, var_random, regime_switch, lorenz96, causeme_nonlinear };

std::string family_name(Family family);
Family parse_family(const std::string& name);

struct GeneratorSpec {
    Family family = Family::var_random;
    int k = 10;
    long t = 300;
    int max_lag = 1;
    double density = 0.1;      // edge probability per off-diagonal (i, j, tau)
    double nonlinearity = 0.0; // alpha in [0, 1], causeme_nonlinear only
    double forcing_f = 10.0;   // lorenz96 only
    std::uint64_t seed = 0;

    void validate() const;
    std::string describe() const;  // compact cell id, e.g. "var_random k=10 t=300 ..."
};

// The realized structural equations for one accepted draw. Linear-family
// steps are x_t = sum_tau A_tau phi(x_{t-tau}) + eps_t with phi the alpha
// interpolation below; regime_switch alternates between coef and coef_b on a
// 2-state symmetric Markov chain; lorenz96 integrates the cyclic ODE.
struct StructuralModel {
    Family family = Family::var_random;
    int k = 0;
    int max_lag = 1;
    double alpha = 0.0;
    std::vector<Eigen::MatrixXd> coef;    // per lag, K×K, (i, j) = weight of x_j -> x_i
    std::vector<Eigen::MatrixXd> coef_b;  // second regime (regime_switch only)
    double switch_prob = 0.02;
    double forcing_f = 10.0;
    std::uint64_t innovations_seed = 0;

    // lorenz96 integration settings
    double lorenz_h = 0.01;
    int lorenz_substeps = 10;  // sampling interval = h * substeps
    int lorenz_burnin = 1000;  // internal steps discarded
    Eigen::VectorXd lorenz_x0;  // empty = F + N(0, 0.5) from the innovations stream

    int var_burnin = 200;  // recorded-grid steps discarded for VAR families

    LaggedAdjacency truth;
};

// Edits realized rows during simulation; the intervention semantics live in
// module intervene. Dynamics continue from the edited values.
class StepModifier {
  public:
    virtual ~StepModifier() = default;
    virtual void apply(long t, Eigen::VectorXd& x_t) = 0;
};

// phi_alpha(u) = (1 - alpha) * u + alpha * tanh(2u). Exactly the identity at
// alpha = 0; bounded slope keeps every alpha > 0 process stable.
double phi_alpha(double u, double alpha);

// Draws a structure for the spec, redrawing on a zero-edge support or an
// unstable probe trajectory, up to 100 attempts. Deterministic in spec.seed.
StructuralModel accept_structure(const GeneratorSpec& spec);

// Simulates `t` recorded steps. The innovations stream is a pure function of
// the model's innovations_seed and is never consumed by a StepModifier, so
// modified and plain runs share the realized path outside modified cells.
// Throws IntegrationBlowup (naming the step) on non-finite state.
Series simulate(const StructuralModel& model, long t, StepModifier* modifier = nullptr);

std::pair<Series, LaggedAdjacency> generate(const GeneratorSpec& spec);

std::pair<Series, LaggedAdjacency> gen_var_chain(int k, long t, std::uint64_t seed);
std::pair<Series, LaggedAdjacency> gen_var_random(int k, long t, int max_lag, double density,
                                                  std::uint64_t seed);
std::pair<Series, LaggedAdjacency> gen_regime_switch(int k, long t, std::uint64_t seed);
std::pair<Series, LaggedAdjacency> gen_lorenz96(int k, long t, double forcing_f,
                                                std::uint64_t seed);
std::pair<Series, LaggedAdjacency> gen_causeme_nonlinear(int k, long t, int max_lag,
                                                         double density, double alpha,
                                                         std::uint64_t seed);

// Spectral radius of the stacked VAR companion matrix.
double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& coef);

}  // namespace causalbench::synthgen
