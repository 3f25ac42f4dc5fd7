#include "frachardy/evolution.hpp"

#include "frachardy/csv.hpp"
#include "frachardy/errors.hpp"
#include "frachardy/quad.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace frachardy {

namespace {

constexpr int kMaxHalvings = 20;
constexpr double kGrow = 1.5;

FormSpec operator_spec(const Params& params) {
    FormSpec spec;
    spec.q = params.p;
    spec.mu = params.mu();
    return spec;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// ∫_lo^hi a(r) r^{N-1} (rising or falling hat) dr on a piece where a is smooth
void hat_piece(const Params& params, const PotentialSpec& spec, double lo, double hi, double c_lo, double c_hi,
               double& left, double& right) {
    const auto& rule = quad::gauss_legendre(16);
    const double h = c_hi - c_lo, half = 0.5 * (hi - lo);
    for (int i = 0; i < 16; ++i) {
        double r = 0.5 * (lo + hi) + half * rule.x[i];
        double w = half * rule.w[i] * potential_value(params, spec, r) * std::pow(r, params.N - 1);
        right += w * (r - c_lo) / h;
        left += w * (c_hi - r) / h;
    }
}

} // namespace

double potential_value(const Params& params, const PotentialSpec& spec, double r) {
    const double ps = params.ps;
    switch (spec.kind) {
    case PotentialKind::regularized: return 1.0 / (std::pow(r, ps) + 1.0 / spec.n);
    case PotentialKind::minimum: return std::min(spec.n, std::pow(r, -ps));
    case PotentialKind::exact: break;
    }
    return std::pow(r, -ps);
}

std::vector<double> potential_weights(const Params& params, const RadialGrid& grid, const PotentialSpec& spec) {
    if (spec.kind != PotentialKind::exact && !(spec.n > 0.0))
        throw InvalidParams("truncation level must be positive");
    const int M = grid.M, N = params.N;
    const double ps = params.ps, r0 = grid.r[0];
    std::vector<double> h(M, 0.0);
    // cell (0, r_1], where the profile is constant
    switch (spec.kind) {
    case PotentialKind::exact: h[0] = std::pow(r0, N - ps) / (N - ps); break;
    case PotentialKind::minimum: {
        double rc = std::pow(spec.n, -1.0 / ps);
        if (rc >= r0)
            h[0] = spec.n * std::pow(r0, N) / N;
        else
            h[0] = spec.n * std::pow(rc, N) / N + (std::pow(r0, N - ps) - std::pow(rc, N - ps)) / (N - ps);
        break;
    }
    case PotentialKind::regularized: {
        auto nodes = quad::geometric_nodes(0.0, r0, N - 1 + ps, 0.0, 16, 1e-15);
        for (std::size_t i = 0; i < nodes.x.size(); ++i)
            h[0] += nodes.w[i] * potential_value(params, spec, nodes.x[i]) * std::pow(nodes.x[i], N - 1);
        break;
    }
    }
    for (int c = 1; c < M; ++c) {
        double lo = grid.r[c - 1], hi = grid.r[c];
        double rc = spec.kind == PotentialKind::minimum ? std::pow(spec.n, -1.0 / ps) : 0.0;
        if (rc > lo && rc < hi) {
            hat_piece(params, spec, lo, rc, lo, hi, h[c - 1], h[c]);
            hat_piece(params, spec, rc, hi, lo, hi, h[c - 1], h[c]);
        } else {
            hat_piece(params, spec, lo, hi, lo, hi, h[c - 1], h[c]);
        }
    }
    for (double& x : h) x *= params.omega_N;
    return h;
}

void validate(const EvolutionConfig& config) {
    if (!(config.tau > 0.0)) throw InvalidParams("tau must be positive");
    if (!(config.safety > 0.0 && config.safety < 1.0)) throw InvalidParams("safety must lie in (0, 1)");
    if (!(config.t_end >= 0.0)) throw InvalidParams("t_end must be nonnegative");
    if (!(config.eps_reg >= 0.0)) throw InvalidParams("eps_reg must be nonnegative");
    if (!(config.inner_tol > 0.0) || config.inner_max_iters < 1) throw InvalidParams("invalid inner solver settings");
    if (!(config.extinction_level >= 0.0 && config.extinction_level < 1.0))
        throw InvalidParams("extinction level must lie in [0, 1)");
    if (config.source_q && !(*config.source_q > 0.0)) throw InvalidParams("source exponent must be positive");
    if (config.potential.kind != PotentialKind::exact && !(config.potential.n > 0.0))
        throw InvalidParams("truncation level must be positive");
}

std::vector<double> Trajectory::at(double time) const {
    if (t.empty()) throw InvalidProfile("empty trajectory");
    if (time <= t.front()) return v.front();
    if (time >= t.back()) return v.back();
    auto it = std::upper_bound(t.begin(), t.end(), time);
    std::size_t k = static_cast<std::size_t>(it - t.begin());
    double a = (time - t[k - 1]) / (t[k] - t[k - 1]);
    std::vector<double> out(v[k].size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (1.0 - a) * v[k - 1][j] + a * v[k][j];
    return out;
}

EvolutionSystem::EvolutionSystem(const Params& params, const RadialGrid& grid, const EvolutionConfig& config)
    : params_(params), grid_(grid), config_(config) {
    validate(config);
    mass_ = lumped_mass(params, grid);
    potential_ = potential_weights(params, grid, config.potential);
    form_ = gagliardo_form(params, grid, operator_spec(params));
    if (!config.forcing.empty() && config.forcing.size() != static_cast<std::size_t>(grid.M))
        throw InvalidProfile("forcing size mismatch");
    lnu_ = config.lnu_exponent;
    if (std::isnan(lnu_)) lnu_ = params.p < 2.0 ? params.N * (2.0 - params.p) / params.ps : 2.0;
}

std::vector<double> EvolutionSystem::sources(const std::vector<double>& v, const std::vector<double>* lagged) const {
    const int M = grid_.M;
    const double p = params_.p, lam = config_.lambda;
    const std::vector<double>& w = lagged ? *lagged : v;
    std::vector<double> s(M, 0.0);
    for (int j = 0; j + 1 < M; ++j) {
        if (lam != 0.0) s[j] += lam * potential_[j] * std::pow(std::max(w[j], 0.0), p - 1.0);
        if (config_.source_q) s[j] += mass_[j] * std::pow(std::max(v[j], 0.0), *config_.source_q);
        if (!config_.forcing.empty()) s[j] += mass_[j] * config_.forcing[j];
    }
    return s;
}

std::vector<double> EvolutionSystem::rate(const std::vector<double>& v, const std::vector<double>* lagged) const {
    auto g = form_->gradient(v);
    auto s = sources(v, lagged);
    const int M = grid_.M;
    std::vector<double> out(M, 0.0);
    for (int j = 0; j + 1 < M; ++j) out[j] = (s[j] - g[j] / (2.0 * params_.p)) / mass_[j];
    return out;
}

std::vector<double> EvolutionSystem::source_slopes(const std::vector<double>& v,
                                                  const std::vector<double>* lagged) const {
    const int M = grid_.M;
    const double p = params_.p, lam = config_.lambda;
    // slopes are taken no lower than this level, where u^{p-2} and u^{q-1} may be unbounded
    const double low = 1e-8 * max_abs(v);
    std::vector<double> d(M, 0.0);
    for (int j = 0; j + 1 < M; ++j) {
        double x = std::max(v[j], low);
        if (x <= 0.0) continue;
        if (lam != 0.0 && !lagged) d[j] += lam * potential_[j] * (p - 1.0) * std::pow(x, p - 2.0);
        if (config_.source_q) d[j] += mass_[j] * *config_.source_q * std::pow(x, *config_.source_q - 1.0);
    }
    return d;
}

Diagnostics EvolutionSystem::diagnostics(double t, const std::vector<double>& v, double tau) const {
    Diagnostics d;
    d.t = t;
    d.tau = tau;
    double l2 = 0.0, ln = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        l2 += mass_[j] * v[j] * v[j];
        ln += mass_[j] * std::pow(std::abs(v[j]), lnu_);
    }
    d.l2 = std::sqrt(l2);
    d.lnu = std::pow(ln, 1.0 / lnu_);
    d.seminorm_p = form_->value(v);
    d.hardy_term = hardy_term(params_, RadialFunction{grid_, v}, params_.p);
    d.max_u = max_abs(v);
    return d;
}

namespace {

// per-node change control: |Δu_j| <= safety * max(|u_j|, floor * max|u|)
bool change_ok(const std::vector<double>& u, const std::vector<double>& un, const EvolutionConfig& config,
               double& worst) {
    const double level = config.floor * max_abs(u);
    worst = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        if (!std::isfinite(un[j])) return false;
        double d = std::abs(un[j] - u[j]);
        if (d == 0.0) continue;
        double ref = std::max(std::abs(u[j]), level);
        if (ref == 0.0) {
            worst = std::numeric_limits<double>::infinity();
            continue;
        }
        worst = std::max(worst, d / ref);
    }
    return worst <= config.safety;
}

bool explicit_update(const EvolutionSystem& sys, const std::vector<double>& u, double tau,
                     const std::vector<double>* lagged, std::vector<double>& un) {
    auto r = sys.rate(u, lagged);
    un.resize(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) un[j] = std::max(0.0, u[j] + tau * r[j]);
    un.back() = 0.0;
    return true;
}

// Damped Newton on m (x - u)/τ + op(x) - sources(x) = 0 with a merit line search; a Kačanov step
// (weights and sources frozen at the iterate) replaces a Newton direction that fails to decrease the merit.
bool implicit_update(const EvolutionSystem& sys, const std::vector<double>& u, double tau,
                     const std::vector<double>* lagged, const EvolutionConfig& config, std::vector<double>& un,
                     int& iterations) {
    const int M = sys.grid().M, F = M - 1;
    const auto& m = sys.mass();
    const double p = sys.params().p;
    auto residual = [&](const std::vector<double>& x, std::vector<double>& res) {
        auto g = sys.form().gradient(x);
        auto s = sys.sources(x, lagged);
        res.assign(M, 0.0);
        double merit = 0.0;
        for (int i = 0; i < F; ++i) {
            res[i] = m[i] * (x[i] - u[i]) / tau + g[i] / (2.0 * p) - s[i];
            merit += res[i] * res[i] / m[i];
        }
        return merit;
    };
    std::vector<double> x = u, res, A, trial, trial_res;
    double merit = residual(x, res);
    Eigen::MatrixXd J(F, F);
    Eigen::VectorXd rhs(F);
    for (iterations = 1; iterations <= config.inner_max_iters; ++iterations) {
        double scale = max_abs(x);
        sys.form().frozen_matrix(x, config.eps_reg * (scale > 0.0 ? scale : 1.0), A);
        auto slope = sys.source_slopes(x, lagged);
        for (int i = 0; i < F; ++i) {
            for (int j = 0; j < F; ++j) J(i, j) = 0.5 * (p - 1.0) * A[static_cast<std::size_t>(i) * M + j];
            J(i, i) += m[i] / tau - slope[i];
            rhs(i) = -res[i];
        }
        Eigen::VectorXd d = J.ldlt().solve(rhs);
        bool accepted = false;
        double trial_merit = 0.0;
        if (d.allFinite()) {
            for (double alpha = 1.0; alpha > 1e-3; alpha *= 0.5) {
                trial = x;
                for (int i = 0; i < F; ++i) trial[i] = std::max(0.0, x[i] + alpha * d(i));
                trial_merit = residual(trial, trial_res);
                if (trial_merit < merit) {
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted) {
            auto s = sys.sources(x, lagged);
            for (int i = 0; i < F; ++i) {
                for (int j = 0; j < F; ++j) J(i, j) = 0.5 * A[static_cast<std::size_t>(i) * M + j];
                J(i, i) += m[i] / tau;
                rhs(i) = m[i] * u[i] / tau + s[i];
            }
            Eigen::LLT<Eigen::MatrixXd> llt(J);
            if (llt.info() != Eigen::Success) return false;
            Eigen::VectorXd y = llt.solve(rhs);
            if (!y.allFinite()) return false;
            trial = x;
            for (int i = 0; i < F; ++i) trial[i] = std::max(0.0, y(i));
            trial_merit = residual(trial, trial_res);
        }
        double diff = 0.0;
        for (int i = 0; i < F; ++i) diff = std::max(diff, std::abs(trial[i] - x[i]));
        x.swap(trial);
        res.swap(trial_res);
        merit = trial_merit;
        if (diff <= config.inner_tol * std::max(max_abs(x), 1e-300)) {
            un = std::move(x);
            return true;
        }
    }
    return false;
}

EvolutionState step_impl(const EvolutionSystem& sys, const EvolutionState& state, const EvolutionConfig& config,
                         const Trajectory* lagged, double tau_cap) {
    double tau = std::min(state.tau > 0.0 ? state.tau : config.tau, tau_cap);
    if (config.fixed_step) {
        tau = std::min(config.tau, tau_cap);
        std::vector<double> lag;
        if (lagged) lag = lagged->at(config.scheme == Scheme::explicit_euler ? state.t : state.t + tau);
        const std::vector<double>* lp = lagged ? &lag : nullptr;
        std::vector<double> un;
        int its = 0;
        if (config.scheme == Scheme::explicit_euler)
            explicit_update(sys, state.u.v, tau, lp, un);
        else if (!implicit_update(sys, state.u.v, tau, lp, config, un, its))
            throw InnerDivergence("implicit fixed point did not converge");
        for (double x : un)
            if (!std::isfinite(x)) throw StepFailure("non-finite state with fixed step");
        EvolutionState next;
        next.t = state.t + tau;
        next.u = RadialFunction{state.u.grid, std::move(un)};
        next.steps = state.steps + 1;
        next.tau = config.tau;
        next.diag = state.diag;
        next.diag.t = next.t;
        next.diag.tau = tau;
        return next;
    }
    bool inner_failed = false;
    std::vector<double> un;
    for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, tau *= 0.5) {
        double t_eval = config.scheme == Scheme::explicit_euler ? state.t : state.t + tau;
        std::vector<double> lag;
        if (lagged) lag = lagged->at(t_eval);
        const std::vector<double>* lp = lagged ? &lag : nullptr;
        int its = 0;
        bool ok = config.scheme == Scheme::explicit_euler ? explicit_update(sys, state.u.v, tau, lp, un)
                                                           : implicit_update(sys, state.u.v, tau, lp, config, un, its);
        inner_failed = !ok;
        if (!ok) continue;
        double worst = 0.0;
        if (!change_ok(state.u.v, un, config, worst)) continue;
        EvolutionState next;
        next.t = state.t + tau;
        next.u = RadialFunction{state.u.grid, std::move(un)};
        next.steps = state.steps + 1;
        double grow = (attempt == 0 && worst < 0.5 * config.safety) ? kGrow : 1.0;
        double base = attempt == 0 ? std::max(tau, state.tau) : tau;
        next.tau = std::min(config.tau_max, base * grow);
        next.diag = state.diag;
        next.diag.t = next.t;
        next.diag.tau = tau;
        return next;
    }
    if (inner_failed) throw InnerDivergence("implicit fixed point did not converge after step halvings");
    throw StepFailure("time step rejected after " + std::to_string(kMaxHalvings) + " halvings");
}

void record(const EvolutionSystem& sys, EvolutionState& state, std::vector<Diagnostics>& rows) {
    state.diag = sys.diagnostics(state.t, state.u.v, state.diag.tau);
    rows.push_back(state.diag);
}

} // namespace

EvolutionState step(const EvolutionSystem& system, const EvolutionState& state, const EvolutionConfig& config,
                    const Trajectory* lagged) {
    validate(config);
    return step_impl(system, state, config, lagged, std::numeric_limits<double>::infinity());
}

EvolutionState step(const Params& params, const EvolutionState& state, const EvolutionConfig& config) {
    EvolutionSystem sys(params, state.u.grid, config);
    return step(sys, state, config);
}

double initial_step(const EvolutionSystem& system, const std::vector<double>& v, double tau, double safety) {
    auto rt = system.rate(v, nullptr);
    double fastest = 0.0;
    for (std::size_t j = 0; j + 1 < rt.size(); ++j)
        if (v[j] > 0.0) fastest = std::max(fastest, std::abs(rt[j]) / v[j]);
    return fastest > 0.0 ? std::min(tau, 0.5 * safety / fastest) : tau;
}

EvolutionResult evolve(const EvolutionSystem& sys, const RadialFunction& u0, const EvolutionConfig& config,
                       const std::vector<Observer>& observers, const Trajectory* lagged) {
    validate(config);
    if (u0.v.size() != static_cast<std::size_t>(sys.grid().M)) throw InvalidProfile("profile size mismatch");
    for (double x : u0.v)
        if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidProfile("initial data must be finite and nonnegative");
    EvolutionResult res;
    EvolutionState state;
    state.u = u0;
    state.u.v.back() = 0.0; // Dirichlet node at R
    state.tau = config.tau;
    state.diag.tau = config.tau;
    record(sys, state, res.rows);
    if (config.keep_trajectory) {
        res.trajectory.t.push_back(0.0);
        res.trajectory.v.push_back(state.u.v);
    }
    double next_out = config.output_interval;
    const double t_end = config.t_end;
    const double extinct_below = config.extinction_level * max_abs(state.u.v);
    while (state.t < t_end * (1.0 - 1e-14)) {
        if (state.steps >= config.max_steps) throw StepFailure("step budget exhausted");
        double remaining = t_end - state.t;
        state = step_impl(sys, state, config, lagged, remaining);
        // zero is a fixed point without a lagged source; relative step control cannot follow the decay
        if (!lagged && config.forcing.empty() && !res.extinct && max_abs(state.u.v) <= extinct_below) {
            res.extinct = true;
            res.extinction_time = state.t;
            std::fill(state.u.v.begin(), state.u.v.end(), 0.0);
            state.t = t_end;
        }
        if (t_end - state.t < 1e-14 * t_end) state.t = t_end;
        if (config.keep_trajectory) {
            res.trajectory.t.push_back(state.t);
            res.trajectory.v.push_back(state.u.v);
        }
        bool last = state.t >= t_end;
        double umax = max_abs(state.u.v);
        bool blown = !(umax <= config.blowup_cap);
        if (config.output_interval <= 0.0 || state.t >= next_out || last || blown) {
            record(sys, state, res.rows);
            while (config.output_interval > 0.0 && next_out <= state.t) next_out += config.output_interval;
        } else {
            state.diag.max_u = umax;
        }
        if (blown) {
            res.blew_up = true;
            break;
        }
        bool stop = false;
        for (const auto& obs : observers) stop = obs(state) || stop;
        if (stop) {
            res.stopped_by_observer = true;
            if (res.rows.back().t != state.t) record(sys, state, res.rows);
            break;
        }
    }
    res.final_state = state;
    return res;
}

EvolutionResult evolve(const Params& params, const RadialFunction& u0, const EvolutionConfig& config,
                       const std::vector<Observer>& observers) {
    EvolutionSystem sys(params, u0.grid, config);
    return evolve(sys, u0, config, observers);
}

std::vector<EvolutionState> picard_outer(const Params& params, const RadialFunction& u0,
                                         const EvolutionConfig& config, const std::vector<double>& n_levels) {
    for (std::size_t k = 1; k < n_levels.size(); ++k)
        if (!(n_levels[k] > n_levels[k - 1])) throw InvalidParams("truncation levels must increase");
    Trajectory prev;
    prev.t = {0.0};
    prev.v = {std::vector<double>(u0.v.size(), 0.0)};
    std::vector<EvolutionState> out;
    for (double n : n_levels) {
        EvolutionConfig cfg = config;
        cfg.potential.n = n;
        cfg.keep_trajectory = true;
        cfg.fixed_step = true;
        EvolutionSystem sys(params, u0.grid, cfg);
        auto res = evolve(sys, u0, cfg, {}, &prev);
        out.push_back(res.final_state);
        prev = std::move(res.trajectory);
    }
    return out;
}

double steady_residual(const EvolutionSystem& sys, const std::vector<double>& w) {
    auto g = sys.form().gradient(w);
    auto s = sys.sources(w, nullptr);
    const auto& m = sys.mass();
    const double p = sys.params().p;
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j + 1 < w.size(); ++j) {
        double r = g[j] / (2.0 * p) - s[j];
        num += r * r / m[j];
        den += s[j] * s[j] / m[j];
    }
    if (!(den > 0.0)) throw ZeroDenominator("steady state has no source");
    return std::sqrt(num / den);
}

SteadyResult steady_state(const Params& params, const RadialGrid& grid, const EvolutionConfig& config,
                          const std::vector<Observer>& observers) {
    if (!config.source_q || !(*config.source_q < params.p - 1.0))
        throw InvalidParams("steady state needs a source exponent below p - 1");
    EvolutionSystem sys(params, grid, config);
    // u ≡ 0 is an unstable equilibrium of the discrete system, so start just above it
    RadialFunction u0{grid, std::vector<double>(grid.M, 1e-12)};
    u0.v.back() = 0.0;
    // rates at the seed are huge relative to it
    EvolutionConfig cfg = config;
    cfg.tau = initial_step(sys, u0.v, cfg.tau, cfg.safety);
    std::vector<double> last = u0.v;
    double last_t = 0.0;
    bool converged = false;
    Observer stationary = [&](const EvolutionState& s) {
        double dt = s.t - last_t, d = 0.0;
        for (std::size_t j = 0; j < last.size(); ++j) d = std::max(d, std::abs(s.u.v[j] - last[j]));
        double top = max_abs(s.u.v);
        last = s.u.v;
        last_t = s.t;
        converged = dt > 0.0 && top > 0.0 && d / (top * dt) <= 1e-8;
        return converged;
    };
    std::vector<Observer> all = observers;
    all.push_back(stationary);
    auto res = evolve(sys, u0, cfg, all);
    if (!converged) throw NonConvergence("profile not stationary by t_end");
    SteadyResult out;
    out.w = res.final_state.u;
    out.rows = std::move(res.rows);
    out.residual = steady_residual(sys, out.w.v);
    out.converged = true;
    return out;
}

void write_diagnostics_csv(const std::vector<Diagnostics>& rows, const std::string& path) {
    std::vector<CsvRow> out;
    out.reserve(rows.size());
    for (const auto& d : rows)
        out.push_back({format_number(d.t), format_number(d.l2), format_number(d.lnu), format_number(d.seminorm_p),
                       format_number(d.hardy_term), format_number(d.max_u), format_number(d.tau)});
    write_csv(out, {"t", "l2", "lnu", "seminorm_p", "hardy_term", "max_u", "tau"}, path);
}

} // namespace frachardy
