#include "frachardy/experiments.hpp"

#include "frachardy/errors.hpp"
#include "frachardy/quad.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

namespace frachardy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) { return format_number(x); }

// short form for metric names
std::string tag(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

Check check_le(const std::string& metric, double value, double tol) { return {metric, value <= tol, value, tol}; }
Check check_ge(const std::string& metric, double value, double tol) { return {metric, value >= tol, value, tol}; }
Check check_flag(const std::string& metric, bool ok) { return {metric, ok, ok ? 1.0 : 0.0, 1.0}; }

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// ω ∫ |u|^power r^{N-1+w} dr for the piecewise-linear profile
double weighted_power_integral(const Params& params, const RadialFunction& u, double w, double power) {
    const auto& g = u.grid;
    const int N = params.N;
    if (!(N + w > 0.0)) throw DivergentIntegrand("weight not integrable at the origin");
    double total = std::pow(std::abs(u.v[0]), power) * std::pow(g.r[0], N + w) / (N + w);
    const auto& rule = quad::gauss_legendre(12);
    for (int c = 1; c < g.M; ++c) {
        double lo = g.r[c - 1], hi = g.r[c], half = 0.5 * (hi - lo);
        for (int i = 0; i < 12; ++i) {
            double r = 0.5 * (lo + hi) + half * rule.x[i];
            double a = (r - lo) / (hi - lo);
            double val = (1.0 - a) * u.v[c - 1] + a * u.v[c];
            total += half * rule.w[i] * std::pow(std::abs(val), power) * std::pow(r, N - 1 + w);
        }
    }
    return params.omega_N * total;
}

std::vector<std::string> diag_schema() { return {"t", "l2", "lnu", "seminorm_p", "hardy_term", "max_u", "tau"}; }

CsvTable diag_table(const std::vector<Diagnostics>& rows) {
    CsvTable t;
    t.schema = diag_schema();
    for (const auto& d : rows)
        t.rows.push_back({fmt(d.t), fmt(d.l2), fmt(d.lnu), fmt(d.seminorm_p), fmt(d.hardy_term), fmt(d.max_u),
                          fmt(d.tau)});
    return t;
}

// smooth step: 1 for x <= 0, 0 for x >= 1
double smooth_cutoff(double x) {
    if (x <= 0.0) return 1.0;
    if (x >= 1.0) return 0.0;
    double c = std::cos(0.5 * std::numbers::pi * x);
    return c * c;
}

} // namespace

std::string ExperimentReport::status() const {
    if (inconclusive) return "inconclusive";
    for (const auto& c : checks)
        if (!c.passed) return "fail";
    return "pass";
}

const std::vector<std::string>& summary_schema() {
    static const std::vector<std::string> s{"experiment", "status", "key_metric", "value", "tolerance"};
    return s;
}

std::vector<CsvRow> summary_rows(const ExperimentReport& report) {
    std::vector<CsvRow> rows;
    for (const auto& c : report.checks)
        rows.push_back({report.experiment, c.passed ? "pass" : "fail", c.metric, fmt(c.value), fmt(c.tolerance)});
    if (report.inconclusive) rows.push_back({report.experiment, "inconclusive", "completed", "0", "1"});
    return rows;
}

std::string write_report(const ExperimentReport& report, const std::string& dir) {
    std::string path = (std::filesystem::path(dir) / (report.experiment + ".csv")).string();
    write_csv(report.table.rows, report.table.schema, path);
    return path;
}

std::vector<NamedProfile> profile_battery(double R) {
    auto x = [R](double r) { return r / R; };
    return {
        {"bump", [=](double r) { double a = 1 - x(r) * x(r); return a > 0 ? a * a : 0.0; }},
        {"narrow_bump", [=](double r) { double a = 1 - x(r) / 0.3; return a > 0 ? a * a : 0.0; }},
        {"hat_mid", [=](double r) { return std::max(0.0, 1 - std::abs(x(r) - 0.5) / 0.2); }},
        {"plateau", [=](double r) { return std::clamp((0.7 - x(r)) / 0.4, 0.0, 1.0); }},
        {"cosine", [=](double r) { return std::cos(0.5 * std::numbers::pi * std::min(x(r), 1.0)); }},
        {"cone", [=](double r) { return std::max(0.0, 1 - x(r)); }},
        {"hollow", [=](double r) { return std::max(0.0, x(r) * x(r) * (1 - x(r))) * 4.0; }},
        {"wavy", [=](double r) { return std::max(0.0, 1 - x(r)) * (1.5 + std::sin(6 * std::numbers::pi * x(r))); }},
        {"peaked", [=](double r) { return std::max(0.0, 1 - x(r)) * std::pow(x(r) + 0.05, -0.3); }},
        {"shell", [=](double r) { return std::max(0.0, 1 - std::abs(x(r) - 0.8) / 0.15); }},
        {"gaussian", [=](double r) { return std::max(0.0, std::exp(-20 * x(r) * x(r)) - std::exp(-20.0)); }},
        {"two_bumps", [=](double r) {
             return std::max(0.0, 1 - std::abs(x(r) - 0.2) / 0.15) + 0.5 * std::max(0.0, 1 - std::abs(x(r) - 0.6) / 0.2);
         }},
    };
}

RadialFunction bump_profile(const RadialGrid& grid, double amp) {
    const double R = grid.R;
    return make_profile(grid, [=](double r) {
        double a = 1.0 - (r / R) * (r / R);
        return a > 0.0 ? amp * a * a : 0.0;
    });
}

// ---------------------------------------------------------------- extinction

ExtinctionFit fit_extinction(const std::vector<double>& t, const std::vector<double>& norm, double n0) {
    std::vector<double> ts, ls;
    double window = 1e-2;
    for (;;) {
        ts.clear();
        ls.clear();
        for (std::size_t i = 0; i < t.size(); ++i)
            if (norm[i] > 0.0 && norm[i] <= window * n0) {
                ts.push_back(t[i]);
                ls.push_back(std::log(norm[i]));
            }
        if (ts.size() >= 8 || window >= 1.0) break;
        window *= 10.0;
    }
    ExtinctionFit fit;
    fit.samples = static_cast<int>(ts.size());
    if (ts.size() < 3) throw NonConvergence("too few samples for the extinction fit");
    const double t_last = ts.back(), span = std::max(t_last - ts.front(), 1e-300);
    struct Line {
        double slope, intercept, sse, sxx;
    };
    auto line = [&](double T) {
        const std::size_t n = ts.size();
        double mx = 0, my = 0;
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = std::log(T - ts[i]);
            mx += xs[i];
            my += ls[i];
        }
        mx /= n;
        my /= n;
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ls[i] - my);
        }
        double k = sxy / sxx, a = my - k * mx, sse = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = ls[i] - a - k * xs[i];
            sse += e * e;
        }
        return Line{k, a, sse, sxx};
    };
    // golden section on log(T - t_last)
    double lo = std::log(span * 1e-9), hi = std::log(span * 2.0);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    auto objective = [&](double z) { return line(t_last + std::exp(z)).sse; };
    // coarse scan first, the objective can be flat far out
    double best = lo, best_val = kInf;
    for (int i = 0; i <= 60; ++i) {
        double z = lo + (hi - lo) * i / 60.0, v = objective(z);
        if (v < best_val) best_val = v, best = z;
    }
    double a = std::max(lo, best - (hi - lo) / 60.0), b = std::min(hi, best + (hi - lo) / 60.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = objective(c), fd = objective(d);
    for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        if (fc < fd) {
            b = d, d = c, fd = fc;
            c = b - gr * (b - a), fc = objective(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + gr * (b - a), fd = objective(d);
        }
    }
    double z = 0.5 * (a + b);
    fit.T_ext = t_last + std::exp(z);
    Line L = line(fit.T_ext);
    fit.exponent = L.slope;
    double se = ts.size() > 2 ? std::sqrt(L.sse / (ts.size() - 2) / L.sxx) : kInf;
    fit.ci_low = L.slope - 2.0 * se;
    fit.ci_high = L.slope + 2.0 * se;
    return fit;
}

ExtinctionReport run_extinction(const Params& params, const RadialFunction& u0, const EvolutionConfig& config) {
    ExtinctionReport rep;
    rep.params = params;
    const int N = params.N;
    const double p = params.p;
    rep.regime = p >= 2.0 * N / (N + 2.0 * params.s) ? 1 : 2;
    EvolutionConfig cfg = config;
    cfg.lambda = params.lambda;
    cfg.output_interval = 0.0;
    if (rep.regime == 2) cfg.lnu_exponent = N * (2.0 - p) / params.ps;
    EvolutionSystem sys(params, u0.grid, cfg);
    auto d0 = sys.diagnostics(0.0, u0.v, cfg.tau);
    const double omega_vol = params.omega_N * std::pow(u0.grid.R, N) / N;
    rep.reference_time = std::pow(d0.l2, 2.0 - p) * std::pow(omega_vol, 0.5 * p - 1.0 + params.ps / N);
    auto monitored = [&](const Diagnostics& d) { return rep.regime == 1 ? d.l2 : d.lnu; };
    const double n0 = monitored(d0);
    if (max_abs(u0.v) == 0.0) {
        rep.detected = true;
        rep.T_ext = 0.0;
        rep.monotone_decay = true;
        rep.rows = {d0};
        return rep;
    }
    Observer extinct = [&](const EvolutionState& s) { return monitored(s.diag) <= rep.threshold_ratio * n0; };
    auto res = evolve(sys, u0, cfg, {extinct});
    rep.rows = res.rows;
    rep.detected = res.stopped_by_observer;
    rep.monotone_decay = true;
    for (std::size_t k = 1; k < rep.rows.size(); ++k)
        if (rep.rows[k].l2 > rep.rows[k - 1].l2) rep.monotone_decay = false;
    if (rep.detected) {
        std::vector<double> t, n;
        for (const auto& d : rep.rows) {
            t.push_back(d.t);
            n.push_back(d.l2);
        }
        auto fit = fit_extinction(t, n, d0.l2);
        rep.T_ext = fit.T_ext;
        rep.fitted_exponent = fit.exponent;
        rep.ci_low = fit.ci_low;
        rep.ci_high = fit.ci_high;
        rep.fit_samples = fit.samples;
    }
    return rep;
}

ExperimentReport ExtinctionReport::report() const {
    ExperimentReport r;
    r.experiment = "extinction";
    r.table = diag_table(rows);
    r.checks.push_back(check_flag("extinction_detected", detected));
    r.checks.push_back(check_flag("l2_monotone_decay", monotone_decay));
    if (detected && fitted_exponent && rows.size() > 1) {
        const double target = 1.0 / (2.0 - params.p);
        r.checks.push_back(check_le("exponent_rel_error", std::abs(*fitted_exponent - target) / target, 0.2));
        r.checks.push_back(check_ge("fit_samples", fit_samples, 8));
    }
    if (!detected) r.inconclusive = true;
    return r;
}

std::vector<AmplitudeOutcome> extinction_amplitude_sweep(const Params& params, const RadialFunction& u0,
                                                         const EvolutionConfig& config,
                                                         const std::vector<double>& amplitudes) {
    std::vector<AmplitudeOutcome> out;
    for (double a : amplitudes) {
        RadialFunction u = u0;
        for (double& x : u.v) x *= a;
        auto rep = run_extinction(params, u, config);
        out.push_back({a, rep.detected, rep.detected ? rep.rows.back().t : config.t_end});
    }
    return out;
}

// ---------------------------------------------------------------- blow-up

BlowupReport run_blowup(const Params& params, const RadialFunction& u0, const std::vector<double>& n_levels,
                        const BlowupProbe& probe, const EvolutionConfig& config) {
    if (n_levels.empty()) throw InvalidParams("no truncation levels");
    if (probe.node < 0 || probe.node >= u0.grid.M - 1) throw InvalidParams("probe node out of range");
    BlowupReport rep;
    rep.params = params;
    rep.n_levels = n_levels;
    rep.r0 = u0.grid.r[probe.node];
    rep.t0 = probe.t0;
    RadialFunction last_profile;
    for (double n : n_levels) {
        EvolutionConfig cfg = config;
        cfg.potential = {PotentialKind::minimum, n};
        cfg.lambda = params.lambda;
        cfg.t_end = probe.t0;
        cfg.output_interval = probe.t0;
        auto res = evolve(params, u0, cfg);
        rep.blew_up.push_back(res.blew_up);
        rep.values.push_back(res.blew_up ? kInf : res.final_state.u.v[probe.node]);
        last_profile = res.final_state.u;
    }
    const std::size_t L = rep.values.size();
    rep.monotone = true;
    for (std::size_t k = 1; k < L; ++k) {
        double a = rep.values[k - 1], b = rep.values[k];
        bool ok = std::isinf(b) || (std::isfinite(a) && b > a);
        rep.monotone = rep.monotone && ok;
    }
    for (double v : rep.values) rep.growth_ratio.push_back(v / rep.values[0]);
    rep.last_over_first = rep.values.back() / rep.values.front();
    rep.last_over_previous = L > 1 ? rep.values[L - 1] / rep.values[L - 2] : 1.0;
    // envelope c t0 log(R / r) at nodes near the origin, last level
    rep.log_envelope_ok = true;
    const auto& g = last_profile.grid;
    for (int j = 0; j + 1 < g.M && g.r[j] <= probe.envelope_radius * g.R; ++j)
        if (!(last_profile.v[j] >= probe.envelope_c * probe.t0 * std::log(g.R / g.r[j]))) rep.log_envelope_ok = false;
    rep.blowup_flag = rep.monotone && rep.last_over_first >= 1e3;
    return rep;
}

ExperimentReport BlowupReport::report() const {
    ExperimentReport r;
    r.experiment = "blowup";
    r.table.schema = {"n", "r0", "t0", "value", "growth_ratio", "blew_up"};
    for (std::size_t k = 0; k < values.size(); ++k)
        r.table.rows.push_back({fmt(n_levels[k]), fmt(r0), fmt(t0), fmt(values[k]), fmt(growth_ratio[k]),
                                blew_up[k] ? "1" : "0"});
    const double Lam = hardy_constant(params);
    if (params.lambda > Lam) {
        r.checks.push_back(check_flag("levels_monotone", monotone));
        r.checks.push_back(check_ge("last_over_first", last_over_first, 1e3));
        r.checks.push_back(check_flag("log_envelope", log_envelope_ok));
    } else {
        r.checks.push_back(check_flag("no_blowup_flag", !blowup_flag));
    }
    return r;
}

// ---------------------------------------------------------------- self-similar supersolution

SupersolutionReport run_selfsim_supersolution(const Params& params, const RadialGrid& grid,
                                              const EvolutionConfig& config, double t0, double cap) {
    if (!(t0 > 0.0) || !(cap > 0.0)) throw InvalidParams("t0 and cap must be positive");
    SupersolutionReport rep;
    rep.params = params;
    rep.t0 = t0;
    auto ss = selfsim_build(params);
    RadialFunction u0 = make_profile(grid, [&](double r) { return std::min(selfsim_value(ss, r, t0), cap); });
    u0.v.back() = 0.0;
    rep.q_values = {0.5 * (params.p2 + 1.0), 0.9 * params.p2};
    auto qsemi = [&](const RadialFunction& u, double q) {
        return seminorm_general(params, u, q, params.N + q * params.s, 0.0);
    };
    std::vector<double> q0;
    for (double q : rep.q_values) q0.push_back(qsemi(u0, q));
    rep.q_growth.assign(rep.q_values.size(), 1.0);
    EvolutionConfig cfg = config;
    cfg.potential = {PotentialKind::exact, 0.0};
    cfg.lambda = params.lambda;
    // backward Euler overestimates growth; at safety 0.2 the bias alone reaches a few percent
    cfg.safety = std::min(cfg.safety, 0.05);
    const double sample_dt = cfg.t_end / 20.0;
    double next_sample = 0.0;
    Observer watch = [&](const EvolutionState& s) {
        double worst = 0.0;
        for (int j = 0; j + 1 < grid.M; ++j)
            worst = std::max(worst, s.u.v[j] / selfsim_value(ss, grid.r[j], t0 + s.t));
        rep.worst_ratio = std::max(rep.worst_ratio, worst);
        if (s.t >= next_sample || s.t >= cfg.t_end) {
            std::array<double, 4> row{s.t, worst, 0.0, 0.0};
            // amplitude of V grows like ((t0 + t) / t0)^{1/(2-p)}; the seminorm has degree q
            const double amp = std::pow((t0 + s.t) / t0, ss.alpha_t);
            for (std::size_t k = 0; k < rep.q_values.size(); ++k) {
                const double q = rep.q_values[k];
                double v = qsemi(s.u, q);
                row[2 + k] = v;
                rep.q_growth[k] = std::max(rep.q_growth[k], v / (q0[k] * std::pow(amp, q)));
            }
            rep.samples.push_back(row);
            while (next_sample <= s.t) next_sample += sample_dt;
        }
        return false;
    };
    EvolutionState init;
    init.u = u0;
    watch(init);
    evolve(params, u0, cfg, {watch});
    return rep;
}

ExperimentReport SupersolutionReport::report() const {
    ExperimentReport r;
    r.experiment = "selfsim";
    r.table.schema = {"t", "max_u_over_V", "q_seminorm_1", "q_seminorm_2"};
    for (const auto& s : samples) r.table.rows.push_back({fmt(s[0]), fmt(s[1]), fmt(s[2]), fmt(s[3])});
    r.checks.push_back(check_le("max_u_over_V", worst_ratio, 1.02));
    for (std::size_t k = 0; k < q_growth.size(); ++k)
        r.checks.push_back(check_le("q_seminorm_growth_q" + tag(q_values[k]), q_growth[k], 10.0));
    return r;
}

// ---------------------------------------------------------------- spaces

std::vector<EquivalenceReport> run_norm_equivalence(const Params& params, const std::vector<double>& betas,
                                                    const std::vector<NamedProfile>& profiles,
                                                    const RadialGrid& grid, const RadialGrid& refined) {
    const double p = params.p;
    std::vector<EquivalenceReport> out;
    for (double beta : betas) {
        if (!(beta > -params.ps && beta < 0.5 * (params.N - params.ps)))
            throw DivergentIntegrand("beta outside (-ps, (N-ps)/2)");
        EquivalenceReport rep;
        rep.beta = beta;
        rep.alpha = -2.0 * beta / p;
        auto window_on = [&](const RadialGrid& g, bool keep) {
            double lo = kInf, hi = 0.0;
            for (const auto& prof : profiles) {
                auto u = make_profile(g, prof.f);
                double w = std::pow(seminorm_general(params, u, p, params.mu(), beta), 1.0 / p);
                double e = std::pow(e_alpha_seminorm(params, u, rep.alpha), 1.0 / p);
                lo = std::min(lo, w / e);
                hi = std::max(hi, w / e);
                if (keep) {
                    rep.names.push_back(prof.name);
                    rep.weighted.push_back(w);
                    rep.e_alpha.push_back(e);
                }
            }
            if (keep) {
                rep.ratio_min = lo;
                rep.ratio_max = hi;
            }
            return hi / lo;
        };
        rep.window = window_on(grid, true);
        rep.window_refined = window_on(refined, false);
        out.push_back(rep);
    }
    return out;
}

ExperimentReport equivalence_report(const std::vector<EquivalenceReport>& reports) {
    ExperimentReport r;
    r.experiment = "spaces";
    r.table.schema = {"beta", "alpha", "profile", "weighted_norm", "e_alpha_norm", "ratio"};
    for (const auto& e : reports) {
        for (std::size_t k = 0; k < e.names.size(); ++k)
            r.table.rows.push_back({fmt(e.beta), fmt(e.alpha), e.names[k], fmt(e.weighted[k]), fmt(e.e_alpha[k]),
                                    fmt(e.weighted[k] / e.e_alpha[k])});
        const std::string name = "beta" + tag(e.beta);
        bool finite = std::isfinite(e.window) && e.ratio_min > 0.0;
        r.checks.push_back(check_flag(name + "_window_finite", finite));
        r.checks.push_back(check_le(name + "_window_refinement_change", std::abs(e.window_refined / e.window - 1.0), 0.1));
        if (e.beta == 0.0)
            r.checks.push_back(
                check_le(name + "_ratio_minus_one", std::max(std::abs(e.ratio_max - 1.0), std::abs(e.ratio_min - 1.0)), 0.0));
    }
    return r;
}

DivergenceReport run_degenerate_divergence(const Params& params, double beta, const std::vector<double>& radii, int M) {
    DivergenceReport rep;
    rep.beta = beta;
    rep.radii = radii;
    auto grid = build_grid(4.0, M, 2.0);
    auto u = make_profile(grid, [](double r) { return smooth_cutoff((r - 1.0) / 3.0); });
    for (double L : radii)
        rep.values.push_back(
            seminorm_general(params, u, params.p, params.mu(), beta, Domain::complement_excluded, L));
    rep.ps = params.ps;
    rep.untruncated = beta > -params.ps ? seminorm_general(params, u, params.p, params.mu(), beta)
                                        : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

ExperimentReport DivergenceReport::report() const {
    ExperimentReport r;
    r.experiment = "degenerate_divergence";
    r.table.schema = {"beta", "outer_radius", "value"};
    for (std::size_t k = 0; k < radii.size(); ++k) r.table.rows.push_back({fmt(beta), fmt(radii[k]), fmt(values[k])});
    if (std::isfinite(untruncated)) r.table.rows.push_back({fmt(beta), "inf", fmt(untruncated)});
    const std::string name = "beta" + tag(beta);
    if (std::isfinite(untruncated)) {
        r.checks.push_back(check_le(name + "_truncation_gap", std::abs(values.back() / untruncated - 1.0), 0.01));
        return r;
    }
    double worst = kInf;
    for (std::size_t k = 1; k < values.size(); ++k) worst = std::min(worst, values[k] / values[k - 1] - 1.0);
    r.checks.push_back(check_ge(name + "_min_growth_per_decade", worst, 0.5));
    if (values.size() >= 3) {
        const std::size_t n = values.size();
        double d1 = values[n - 2] - values[n - 3], d2 = values[n - 1] - values[n - 2];
        if (std::abs(beta + ps) < 1e-12)
            r.checks.push_back(check_le(name + "_log_increment_mismatch", std::abs(d1 - d2) / d2, 0.3));
        else
            r.checks.push_back(check_ge(name + "_min_decade_ratio", values[n - 1] / values[n - 2], 2.0));
    }
    return r;
}

ImprovedHardyReport run_improved_hardy(const Params& params, const std::vector<double>& q_list,
                                       const std::vector<NamedProfile>& profiles, const RadialGrid& grid) {
    ImprovedHardyReport rep;
    rep.q_list = q_list;
    const double Lam = hardy_constant(params);
    rep.seminorm.assign(q_list.size(), {});
    rep.min_ratio.assign(q_list.size(), kInf);
    rep.min_relative_remainder = kInf;
    for (const auto& prof : profiles) {
        auto u = make_profile(grid, prof.f);
        double energy = 0.5 * seminorm_p(params, u);
        double rem = energy - Lam * hardy_term(params, u, params.p);
        rep.names.push_back(prof.name);
        rep.energy.push_back(energy);
        rep.remainder.push_back(rem);
        rep.min_relative_remainder = std::min(rep.min_relative_remainder, rem / energy);
        for (std::size_t k = 0; k < q_list.size(); ++k) {
            if (!(q_list[k] > 1.0 && q_list[k] < params.p)) throw InvalidParams("q must lie in (1, p)");
            double sq = seminorm_general(params, u, params.p, params.N + q_list[k] * params.s, 0.0, Domain::omega_only);
            rep.seminorm[k].push_back(sq);
            rep.min_ratio[k] = std::min(rep.min_ratio[k], rem / sq);
        }
    }
    return rep;
}

ExperimentReport ImprovedHardyReport::report() const {
    ExperimentReport r;
    r.experiment = "improved_hardy";
    r.table.schema = {"profile", "q", "energy", "remainder", "omega_seminorm", "ratio"};
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t k = 0; k < q_list.size(); ++k)
            r.table.rows.push_back({names[i], fmt(q_list[k]), fmt(energy[i]), fmt(remainder[i]), fmt(seminorm[k][i]),
                                    fmt(remainder[i] / seminorm[k][i])});
    r.checks.push_back(check_ge("min_remainder_over_energy", min_relative_remainder, -0.02));
    for (std::size_t k = 0; k < q_list.size(); ++k)
        r.checks.push_back(check_ge("min_ratio_q" + tag(q_list[k]), min_ratio[k], -0.02));
    return r;
}

// ---------------------------------------------------------------- Gronwall

GronwallReport run_global_gronwall(const Params& params, const RadialFunction& u0, const EvolutionConfig& config) {
    const int N = params.N;
    const double p = params.p, lam = params.lambda;
    const double e = N - 2.0 * params.ps / (2.0 - p);
    if (!(p < 2.0) || !(e > 0.0)) throw InvalidParams("bound requires p < 2 and N > 2ps/(2-p)");
    GronwallReport rep;
    rep.params = params;
    EvolutionConfig cfg = config;
    cfg.potential = {PotentialKind::exact, 0.0};
    cfg.lambda = lam;
    auto res = evolve(params, u0, cfg);
    // y = ‖u‖²: y' = -[u]^p + 2λ∫u^p a <= λp y + c by Young with |W| <= r^{-ps}
    const double a = lam * p;
    const double y0 = res.rows.front().l2 * res.rows.front().l2;
    const double c = lam * (2.0 - p) * params.omega_N * std::pow(u0.grid.R, e) / e;
    // β(t) + ∫_0^t a β(σ) e^{a(t-σ)} dσ with β(t) = y0 + c t
    auto bound = [&](double t) { return a == 0.0 ? y0 + c * t : y0 * std::exp(a * t) + c * std::expm1(a * t) / a; };
    // the same envelope with rate and forcing halved, kept for reference only
    auto halved = [&](double t) {
        double ah = 0.5 * a;
        return ah == 0.0 ? y0 + 0.5 * c * t : y0 * std::exp(ah * t) + 0.5 * c * std::expm1(ah * t) / ah;
    };
    rep.margin = kInf;
    for (const auto& d : res.rows) {
        double lhs = d.l2 * d.l2, rhs = bound(d.t);
        rep.t.push_back(d.t);
        rep.lhs.push_back(lhs);
        rep.rhs.push_back(rhs);
        rep.rhs_halved.push_back(halved(d.t));
        if (d.t > 0.0) rep.margin = std::min(rep.margin, rhs > 0.0 ? (rhs - lhs) / rhs : 0.0);
    }
    return rep;
}

ExperimentReport GronwallReport::report() const {
    ExperimentReport r;
    r.experiment = "gronwall";
    r.table.schema = {"t", "l2_squared", "bound", "bound_halved_rate"};
    for (std::size_t k = 0; k < t.size(); ++k)
        r.table.rows.push_back({fmt(t[k]), fmt(lhs[k]), fmt(rhs[k]), fmt(rhs_halved[k])});
    r.checks.push_back(check_ge("min_relative_margin", margin, 0.0));
    return r;
}

// ---------------------------------------------------------------- no extinction

NoExtinctionReport run_no_extinction(const Params& params, const RadialGrid& grid, const EvolutionConfig& config,
                                     double t_check) {
    NoExtinctionReport rep;
    rep.params = params;
    rep.t_check = t_check;
    rep.min_value_after_check = kInf;
    RadialFunction last;
    Observer watch = [&](const EvolutionState& s) {
        last = s.u;
        rep.t_final = s.t;
        if (s.t >= t_check)
            for (int j = 0; j + 1 < grid.M; ++j) rep.min_value_after_check = std::min(rep.min_value_after_check, s.u.v[j]);
        return false;
    };
    try {
        EvolutionConfig cfg = config;
        cfg.lambda = params.lambda;
        auto st = steady_state(params, grid, cfg, {watch});
        rep.converged = true;
        rep.residual = st.residual;
        rep.rows = st.rows;
        // a stationary profile stays put for every later time, including t_check if it came first
        if (rep.t_final < t_check)
            for (int j = 0; j + 1 < grid.M; ++j) rep.min_value_after_check = std::min(rep.min_value_after_check, st.w.v[j]);
    } catch (const NonConvergence&) {
        rep.converged = false;
    }
    rep.positive = rep.min_value_after_check > 0.0 && std::isfinite(rep.min_value_after_check);
    rep.l2_monotone = !rep.rows.empty();
    for (std::size_t k = 1; k < rep.rows.size(); ++k)
        if (rep.rows[k].l2 < rep.rows[k - 1].l2) rep.l2_monotone = false;
    return rep;
}

ExperimentReport NoExtinctionReport::report() const {
    ExperimentReport r;
    r.experiment = "noextinction";
    r.table = diag_table(rows);
    r.checks.push_back(check_flag("steady_state_reached", converged));
    r.checks.push_back(check_flag("positive_after_t_check", positive));
    r.checks.push_back(check_flag("l2_non_decreasing", l2_monotone));
    r.checks.push_back(check_le("steady_residual", converged ? residual : kInf, 0.02));
    return r;
}

// ---------------------------------------------------------------- weighted regime

WeightedRegimeReport run_weighted_regime(const Params& params, const RadialFunction& u0,
                                         const EvolutionConfig& config, double alpha) {
    WeightedRegimeReport rep;
    rep.params = params;
    rep.alpha = alpha;
    EvolutionConfig cfg = config;
    if (cfg.potential.kind == PotentialKind::exact) cfg.potential = {PotentialKind::regularized, 100.0};
    cfg.lambda = params.lambda;
    cfg.output_interval = cfg.t_end / 20.0;
    const double p = params.p, n = cfg.potential.n;
    const double top0 = max_abs(u0.v);
    // a_n <= n, so the spatial constant solving c' = λ n c^{p-1} from max u0 dominates u
    auto envelope = [&](double t) {
        if (p >= 2.0) return top0 * std::exp(params.lambda * n * t);
        return std::pow(std::pow(top0, 2.0 - p) + (2.0 - p) * params.lambda * n * t, 1.0 / (2.0 - p));
    };
    const double unit = std::sqrt(params.omega_N * std::pow(u0.grid.R, params.N + p * alpha) / (params.N + p * alpha));
    double w0 = 0.0, e0 = 0.0;
    rep.growth = 1.0;
    rep.margin = kInf;
    rep.finite = true;
    auto sample = [&](double t, const RadialFunction& u) {
        double w = std::sqrt(weighted_power_integral(params, u, p * alpha, 2.0));
        double e = e_alpha_seminorm(params, u, alpha);
        double top = max_abs(u.v), env = envelope(t);
        if (rep.t.empty()) {
            w0 = w;
            e0 = e;
        } else {
            rep.growth = std::max({rep.growth, w / w0, e / e0});
        }
        rep.finite = rep.finite && std::isfinite(w) && std::isfinite(e);
        if (t > 0.0) rep.margin = std::min({rep.margin, 1.0 - top / env, 1.0 - w / (env * unit)});
        rep.t.push_back(t);
        rep.weighted_l2.push_back(w);
        rep.e_alpha.push_back(e);
        rep.max_u.push_back(top);
        rep.envelope.push_back(env);
    };
    sample(0.0, u0);
    double next = cfg.output_interval;
    Observer watch = [&](const EvolutionState& s) {
        if (s.t >= next || s.t >= cfg.t_end) {
            sample(s.t, s.u);
            while (next <= s.t) next += cfg.output_interval;
        }
        return false;
    };
    evolve(params, u0, cfg, {watch});
    return rep;
}

ExperimentReport WeightedRegimeReport::report() const {
    ExperimentReport r;
    r.experiment = "weighted_regime";
    r.table.schema = {"t", "weighted_l2", "e_alpha_seminorm", "max_u", "envelope"};
    for (std::size_t k = 0; k < t.size(); ++k)
        r.table.rows.push_back({fmt(t[k]), fmt(weighted_l2[k]), fmt(e_alpha[k]), fmt(max_u[k]), fmt(envelope[k])});
    r.checks.push_back(check_flag("norms_finite", finite));
    r.checks.push_back(check_ge("envelope_margin", margin, 0.0));
    return r;
}

} // namespace frachardy
