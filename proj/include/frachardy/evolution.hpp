#pragma once

#include "frachardy/radial.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace frachardy {

enum class PotentialKind {
    regularized, ///< 1 / (r^{ps} + 1/n)
    minimum,     ///< min(n, r^{-ps})
    exact        ///< r^{-ps}
};

struct PotentialSpec {
    PotentialKind kind = PotentialKind::exact;
    double n = 0.0;
};

double potential_value(const Params& params, const PotentialSpec& spec, double r);

/// ω_N ∫ φ_j a(r) r^{N-1} dr for every hat function φ_j.
std::vector<double> potential_weights(const Params& params, const RadialGrid& grid, const PotentialSpec& spec);

enum class Scheme { explicit_euler, semi_implicit };

struct EvolutionConfig {
    Scheme scheme = Scheme::semi_implicit;
    double tau = 1e-3;
    double t_end = 1.0;
    PotentialSpec potential{};
    std::optional<double> source_q;
    double lambda = 0.0;
    /// Largest accepted relative change per node and step.
    double safety = 0.2;
    /// Weight regularization relative to max|u| for the frozen p-Laplacian coefficients.
    double eps_reg = 1e-12;
    double inner_tol = 1e-10;
    int inner_max_iters = 200;
    double tau_max = std::numeric_limits<double>::infinity();
    /// Values below floor * max|u| are compared against that level in the step control.
    double floor = 1e-3;
    /// Diagnostics row interval in t; 0 records every accepted step.
    double output_interval = 0.0;
    long max_steps = 2000000;
    /// A run stops when max u exceeds this value.
    double blowup_cap = 1e12;
    /// Exponent of the second monitored Lebesgue norm; NaN selects N(2-p)/(ps) for p < 2 and 2 otherwise.
    double lnu_exponent = std::numeric_limits<double>::quiet_NaN();
    /// Below this fraction of max u0 the state is set to zero and the run jumps to t_end (no lagged source).
    double extinction_level = 1e-30;
    /// Constant step tau without change control (used by picard_outer so levels share time stamps).
    bool fixed_step = false;
    /// Nodal density of a fixed nonnegative source, added as m_j f_j; empty for none.
    std::vector<double> forcing;
    /// Keep every accepted state in the result (needed for lagged sources).
    bool keep_trajectory = false;
};

void validate(const EvolutionConfig& config);

struct Diagnostics {
    double t = 0.0;
    double l2 = 0.0;
    double lnu = 0.0;
    double seminorm_p = 0.0;
    double hardy_term = 0.0;
    double max_u = 0.0;
    double tau = 0.0;
};

struct EvolutionState {
    double t = 0.0;
    RadialFunction u;
    long steps = 0;
    double tau = 0.0;
    Diagnostics diag{};
};

/// Sampled trajectory, linearly interpolated in t and held constant past its end.
struct Trajectory {
    std::vector<double> t;
    std::vector<std::vector<double>> v;
    std::vector<double> at(double time) const;
};

/// Precomputed per-grid data of the lumped system m u' = -op(u) + λ h u^{p-1} + m u^q + m f.
class EvolutionSystem {
public:
    EvolutionSystem(const Params& params, const RadialGrid& grid, const EvolutionConfig& config);

    const Params& params() const { return params_; }
    const RadialGrid& grid() const { return grid_; }
    const std::vector<double>& mass() const { return mass_; }
    const std::vector<double>& potential() const { return potential_; }
    const GagliardoForm& form() const { return *form_; }

    /// Source terms at state v; `lagged` replaces v inside the potential term when given.
    std::vector<double> sources(const std::vector<double>& v, const std::vector<double>* lagged) const;
    /// Diagonal derivative of the sources with respect to v (the lagged part counts as constant).
    std::vector<double> source_slopes(const std::vector<double>& v, const std::vector<double>* lagged) const;
    /// Right-hand side -op(v) + sources, per unit mass.
    std::vector<double> rate(const std::vector<double>& v, const std::vector<double>* lagged) const;
    Diagnostics diagnostics(double t, const std::vector<double>& v, double tau) const;

private:
    Params params_;
    RadialGrid grid_;
    EvolutionConfig config_;
    std::vector<double> mass_;
    std::vector<double> potential_;
    std::shared_ptr<const GagliardoForm> form_;
    double lnu_;
};

/// Step size at which the largest relative rate |rate_j| / v_j changes v by safety / 2 (capped by tau).
double initial_step(const EvolutionSystem& system, const std::vector<double>& v, double tau, double safety);

/// One accepted step; τ in the returned state is the suggestion for the next step.
EvolutionState step(const Params& params, const EvolutionState& state, const EvolutionConfig& config);
EvolutionState step(const EvolutionSystem& system, const EvolutionState& state, const EvolutionConfig& config,
                    const Trajectory* lagged = nullptr);

using Observer = std::function<bool(const EvolutionState&)>;

struct EvolutionResult {
    std::vector<Diagnostics> rows;
    EvolutionState final_state;
    bool stopped_by_observer = false;
    bool blew_up = false;
    bool extinct = false;
    double extinction_time = 0.0;
    Trajectory trajectory;
};

EvolutionResult evolve(const Params& params, const RadialFunction& u0, const EvolutionConfig& config,
                       const std::vector<Observer>& observers = {});
EvolutionResult evolve(const EvolutionSystem& system, const RadialFunction& u0, const EvolutionConfig& config,
                       const std::vector<Observer>& observers = {}, const Trajectory* lagged = nullptr);

/// Lagged iteration in the truncation level: level n is driven by λ a_n (u_{n-1})^{p-1}, with the
/// previous level's trajectory and u_{-1} ≡ 0. Uses the potential kind of `config` and a fixed step tau.
std::vector<EvolutionState> picard_outer(const Params& params, const RadialFunction& u0,
                                         const EvolutionConfig& config, const std::vector<double>& n_levels);

struct SteadyResult {
    RadialFunction w;
    std::vector<Diagnostics> rows;
    double residual = 0.0;
    bool converged = false;
};

/// Evolves from a tiny positive seed until the relative change rate falls below 1e-8.
/// Throws NonConvergence when t_end is reached first.
SteadyResult steady_state(const Params& params, const RadialGrid& grid, const EvolutionConfig& config,
                          const std::vector<Observer>& observers = {});
/// Weighted relative residual of op(w) = λ a w^{p-1} + w^q.
double steady_residual(const EvolutionSystem& system, const std::vector<double>& w);

void write_diagnostics_csv(const std::vector<Diagnostics>& rows, const std::string& path);

} // namespace frachardy
