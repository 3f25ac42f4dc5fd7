#include "frachardy/cli_io.hpp"

#include "frachardy/csv.hpp"
#include "frachardy/errors.hpp"
#include "frachardy/experiments.hpp"
#include "frachardy/inequality_lab.hpp"
#include "frachardy/kernel_constants.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace frachardy {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double x) { return format_number(x); }

// shortest round-trip text for console lines
std::string brief(double x) {
    if (!std::isfinite(x)) return format_number(x);
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(int line, const std::string& key, const std::string& value, const std::string& what) {
    throw ParseError("line " + std::to_string(line) + ": " + key + " = '" + value + "' is not " + what);
}

double to_double(int line, const std::string& key, const std::string& v) {
    double x = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(line, key, v, "a number");
    return x;
}

long to_long(int line, const std::string& key, const std::string& v) {
    long x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(line, key, v, "an integer");
    return x;
}

std::uint64_t to_u64(int line, const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(line, key, v, "an unsigned integer");
    return x;
}

std::vector<double> to_list(int line, const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(line, key, trim(item)));
    if (out.empty()) bad_value(line, key, v, "a comma-separated list of numbers");
    return out;
}

using Setter = std::function<void(RunConfig&, int, const std::string&, const std::string&)>;

template <class T>
Setter num(T RunConfig::*field) {
    return [field](RunConfig& c, int line, const std::string& k, const std::string& v) {
        if constexpr (std::is_same_v<T, int>)
            c.*field = static_cast<int>(to_long(line, k, v));
        else if constexpr (std::is_same_v<T, long>)
            c.*field = to_long(line, k, v);
        else
            c.*field = to_double(line, k, v);
    };
}

Setter list(std::vector<double> RunConfig::*field) {
    return [field](RunConfig& c, int line, const std::string& k, const std::string& v) { c.*field = to_list(line, k, v); };
}

struct KeyDoc {
    std::string key;
    std::string def;
    std::string doc;
    Setter set;
};

const std::vector<KeyDoc>& keys() {
    static const std::vector<KeyDoc> k{
        {"N", "3", "dimension (>= 2)", num(&RunConfig::N)},
        {"s", "0.5", "fractional order in (0,1)", num(&RunConfig::s)},
        {"p", "1.5", "exponent, 1 < p < N/s", num(&RunConfig::p)},
        {"lambda", "0", "Hardy coefficient (absolute)", num(&RunConfig::lambda)},
        {"lambda_factor", "unset", "Hardy coefficient as a multiple of the sharp constant",
         [](RunConfig& c, int line, const std::string& key, const std::string& v) {
             c.lambda_factor = to_double(line, key, v);
         }},
        {"R", "1", "ball radius", num(&RunConfig::R)},
        {"M", "100", "radial nodes", num(&RunConfig::M)},
        {"g", "3", "grid grading exponent (>= 1)", num(&RunConfig::g)},
        {"scheme", "semi_implicit", "semi_implicit | explicit_euler",
         [](RunConfig& c, int line, const std::string& key, const std::string& v) {
             if (v == "semi_implicit") c.scheme = Scheme::semi_implicit;
             else if (v == "explicit_euler") c.scheme = Scheme::explicit_euler;
             else bad_value(line, key, v, "semi_implicit or explicit_euler");
         }},
        {"tau", "1e-4", "initial time step", num(&RunConfig::tau)},
        {"t_end", "1", "final time", num(&RunConfig::t_end)},
        {"potential", "exact", "exact | regularized | minimum",
         [](RunConfig& c, int line, const std::string& key, const std::string& v) {
             if (v == "exact") c.potential = PotentialKind::exact;
             else if (v == "regularized") c.potential = PotentialKind::regularized;
             else if (v == "minimum") c.potential = PotentialKind::minimum;
             else bad_value(line, key, v, "exact, regularized or minimum");
         }},
        {"n", "0", "truncation level of the potential", num(&RunConfig::n)},
        {"source_q", "unset", "exponent of the u^q source",
         [](RunConfig& c, int line, const std::string& key, const std::string& v) {
             c.source_q = to_double(line, key, v);
         }},
        {"safety", "0.2", "largest relative change per node and step", num(&RunConfig::safety)},
        {"inner_tol", "1e-10", "inner solver tolerance", num(&RunConfig::inner_tol)},
        {"output_interval", "0", "diagnostics interval in t (0 = every step)", num(&RunConfig::output_interval)},
        {"amplitude", "1", "amplitude of the bump initial datum", num(&RunConfig::amplitude)},
        {"t0", "0.5", "blowup probe time; selfsim start time", num(&RunConfig::t0)},
        {"cap", "10", "selfsim cap on the initial datum", num(&RunConfig::cap)},
        {"levels", "4,8,16,32,64", "blowup truncation levels", list(&RunConfig::levels)},
        {"betas", "-0.3,0,0.2", "spaces: weight exponents", list(&RunConfig::betas)},
        {"radii", "10,100,1000", "spaces: outer truncation radii", list(&RunConfig::radii)},
        {"alpha", "1", "exponent of the sum/difference inequalities", num(&RunConfig::alpha)},
        {"samples", "100000", "random samples for the product inequality", num(&RunConfig::samples)},
        {"grid_size", "50", "constant search grid size", num(&RunConfig::grid_size)},
        {"psi_count", "10", "Picone test functions", num(&RunConfig::psi_count)},
        {"tolerance", "0.05", "Picone tolerance", num(&RunConfig::tolerance)},
        {"experiment", "empty", "free-form label",
         [](RunConfig& c, int, const std::string&, const std::string& v) { c.experiment = v; }},
        {"out", ".", "output directory", [](RunConfig& c, int, const std::string&, const std::string& v) { c.out = v; }},
        {"seed", "20240611", "random seed",
         [](RunConfig& c, int line, const std::string& key, const std::string& v) { c.seed = to_u64(line, key, v); }},
    };
    return k;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

// ---- command plumbing

struct Outcome {
    std::vector<ExperimentReport> reports;
};

void print_checks(const ExperimentReport& r, std::ostream& out) {
    for (const auto& c : r.checks)
        out << (c.passed ? "PASS " : "FAIL ") << r.experiment << ' ' << c.metric << " = " << brief(c.value)
            << " (tol " << brief(c.tolerance) << ")\n";
    if (r.inconclusive) out << "INCONCLUSIVE " << r.experiment << '\n';
}

Check make_check(const std::string& metric, bool passed, double value, double tol) {
    return {metric, passed, value, tol};
}

ExperimentReport cmd_constants(const RunConfig& c) {
    Params P = c.params();
    const double tol_cross = 1e-6, tol_root = 1e-8, tol_residual = 1e-6;
    ExperimentReport r;
    r.experiment = "constants";
    r.table.schema = {"quantity", "value", "tol"};
    const double L = hardy_constant(P);
    const double top = theta(P, P.eta_max);
    const double cross = std::abs(top - L) / L;
    r.table.rows.push_back({"Lambda", fmt(L), fmt(P.tol.constants)});
    r.table.rows.push_back({"Theta_at_etamax", fmt(top), fmt(tol_cross * L)});
    r.checks.push_back(make_check("theta_at_etamax_vs_Lambda", cross <= tol_cross, cross, tol_cross));

    double eta1 = NAN, eta2 = NAN;
    if (P.lambda > 0.0 && P.lambda < L) {
        std::tie(eta1, eta2) = theta_roots(P);
        for (double eta : {eta1, eta2}) {
            double d = std::abs(theta(P, eta) - P.lambda) / P.lambda;
            r.checks.push_back(make_check("theta_root_defect", d <= tol_root, d, tol_root));
        }
        r.checks.push_back(make_check("roots_bracket_etamax", eta1 < P.eta_max && P.eta_max < eta2, eta2 - eta1, 0));
    }
    r.table.rows.push_back({"eta1", fmt(eta1), fmt(tol_root)});
    r.table.rows.push_back({"eta2", fmt(eta2), fmt(tol_root)});

    double B = NAN, A = NAN;
    try {
        auto ss = selfsim_build(P);
        B = ss.B;
        A = ss.A;
        for (double x : {0.1, 1.0, 10.0}) {
            double res = selfsim_residual(ss, x);
            r.checks.push_back(make_check("selfsim_residual_r" + fmt(x), res <= tol_residual, res, tol_residual));
        }
        r.checks.push_back(make_check("selfsim_B_positive", B > 0.0, B, 0));
    } catch (const NotSelfSimilarRegime&) {
    }
    r.table.rows.push_back({"B", fmt(B), fmt(P.tol.constants)});
    r.table.rows.push_back({"A", fmt(A), fmt(P.tol.constants)});
    r.table.rows.push_back({"eta_max", fmt(P.eta_max), "0"});
    r.table.rows.push_back({"lambda", fmt(P.lambda), "0"});
    return r;
}

ExperimentReport cmd_evolve(const RunConfig& c) {
    Params P = c.params();
    EvolutionConfig cfg = c.evolution();
    cfg.lambda = P.lambda;
    auto res = evolve(P, bump_profile(c.grid(), c.amplitude), cfg);
    ExperimentReport r;
    r.experiment = "evolve";
    r.table.schema = {"t", "l2", "lnu", "seminorm_p", "hardy_term", "max_u", "tau"};
    bool finite = true;
    for (const auto& d : res.rows) {
        finite = finite && std::isfinite(d.l2) && std::isfinite(d.max_u);
        r.table.rows.push_back({fmt(d.t), fmt(d.l2), fmt(d.lnu), fmt(d.seminorm_p), fmt(d.hardy_term), fmt(d.max_u),
                                fmt(d.tau)});
    }
    r.checks.push_back(make_check("finite_norms", finite, finite ? 1.0 : 0.0, 1));
    r.checks.push_back(make_check("reached_t_end", res.final_state.t >= c.t_end * (1 - 1e-12) || res.blew_up,
                                  res.final_state.t, c.t_end));
    r.checks.push_back(make_check("blew_up", true, res.blew_up ? 1.0 : 0.0, 0));
    r.checks.push_back(make_check("extinct", true, res.extinct ? 1.0 : 0.0, 0));
    return r;
}

Outcome cmd_spaces(const RunConfig& c) {
    Params P = c.params();
    Outcome o;
    auto grid = c.grid();
    auto refined = build_grid(c.R, 2 * c.M, c.g);
    o.reports.push_back(equivalence_report(run_norm_equivalence(P, c.betas, profile_battery(c.R), grid, refined)));
    for (double beta : {-P.ps, 0.0}) {
        auto rep = run_degenerate_divergence(P, beta, c.radii, c.M).report();
        rep.experiment = "degenerate_divergence_beta" + fmt(beta);
        o.reports.push_back(std::move(rep));
    }
    return o;
}

ExperimentReport inequality_experiment(const std::vector<InequalityReport>& reps) {
    ExperimentReport r;
    r.experiment = "inequalities";
    r.table.schema = inequality_schema();
    for (const auto& q : reps) {
        r.table.rows.push_back(inequality_row(q));
        r.checks.push_back(make_check(q.lemma + "_p" + fmt(q.p) + "_violations", q.passed(),
                                      static_cast<double>(q.violations), 0));
    }
    return r;
}

ExperimentReport cmd_inequalities(const RunConfig& c) {
    std::vector<InequalityReport> reps;
    auto algg = search_constants_algg(c.p, c.alpha, c.grid_size);
    for (auto& q : check_algg(algg, 10 * c.grid_size)) reps.push_back(std::move(q));
    if (c.p > 1.0 && c.p < 2.0) {
        auto k = search_constants_alge4(c.p, c.grid_size, c.samples, c.seed);
        reps.push_back(k.validation);
    }
    return inequality_experiment(reps);
}

ExperimentReport cmd_picone(const RunConfig& c) {
    Params P = c.params();
    auto grid = c.grid();
    auto rep = check_picone(P, bump_profile(grid, c.amplitude), random_test_functions(c.R, c.psi_count, c.seed),
                            c.tolerance, c.t_end);
    ExperimentReport r;
    r.experiment = "picone";
    r.table.schema = {"psi", "energy", "weighted", "ratio"};
    for (std::size_t k = 0; k < rep.names.size(); ++k)
        r.table.rows.push_back({rep.names[k], fmt(rep.energy[k]), fmt(rep.weighted[k]),
                                fmt(rep.weighted[k] > 0 ? rep.energy[k] / rep.weighted[k] : NAN)});
    r.checks.push_back(make_check("picone_violations", rep.summary.passed(),
                                  static_cast<double>(rep.summary.violations), 0));
    r.checks.push_back(make_check("picone_worst_margin", rep.summary.worst_margin >= -c.tolerance,
                                  rep.summary.worst_margin, -c.tolerance));
    return r;
}

Outcome dispatch(const std::string& name, const RunConfig& c) {
    Outcome o;
    Params P = c.params();
    if (name == "constants") o.reports.push_back(cmd_constants(c));
    else if (name == "selfsim")
        o.reports.push_back(run_selfsim_supersolution(P, c.grid(), c.evolution(), c.t0, c.cap).report());
    else if (name == "evolve") o.reports.push_back(cmd_evolve(c));
    else if (name == "extinction")
        o.reports.push_back(run_extinction(P, bump_profile(c.grid(), c.amplitude), c.evolution()).report());
    else if (name == "blowup") {
        BlowupProbe probe;
        probe.t0 = c.t0;
        o.reports.push_back(
            run_blowup(P, bump_profile(c.grid(), c.amplitude), c.levels, probe, c.evolution()).report());
    } else if (name == "spaces") o = cmd_spaces(c);
    else if (name == "inequalities") o.reports.push_back(cmd_inequalities(c));
    else if (name == "picone") o.reports.push_back(cmd_picone(c));
    else if (name == "gronwall")
        o.reports.push_back(run_global_gronwall(P, bump_profile(c.grid(), c.amplitude), c.evolution()).report());
    else if (name == "noextinction") {
        require(c.source_q.has_value(), "noextinction needs source_q (e.g. source_q = 0.3)");
        o.reports.push_back(run_no_extinction(P, c.grid(), c.evolution()).report());
    }
    return o;
}

} // namespace

Params RunConfig::params() const {
    Params P = Params::make(N, s, p);
    return P.with_lambda(lambda_factor ? *lambda_factor * hardy_constant(P) : lambda);
}

EvolutionConfig RunConfig::evolution() const {
    EvolutionConfig c;
    c.scheme = scheme;
    c.tau = tau;
    c.t_end = t_end;
    c.potential = {potential, n};
    c.source_q = source_q;
    c.safety = safety;
    c.inner_tol = inner_tol;
    c.output_interval = output_interval;
    return c;
}

RadialGrid RunConfig::grid() const { return build_grid(R, M, g); }

void validate(const RunConfig& c) {
    require(c.N >= 2, "N must be >= 2 (got " + std::to_string(c.N) + ")");
    require(c.s > 0.0 && c.s < 1.0, "s must lie in (0, 1) (got " + fmt(c.s) + ")");
    require(c.p > 1.0, "p must be > 1 (got " + fmt(c.p) + ")");
    require(c.p * c.s < c.N, "ps must be < N: p < N/s = " + fmt(c.N / c.s) + " required (got p = " + fmt(c.p) + ")");
    require(c.lambda >= 0.0, "lambda must be >= 0");
    require(!(c.lambda_factor && c.lambda != 0.0), "set either lambda or lambda_factor, not both");
    require(!c.lambda_factor || *c.lambda_factor >= 0.0, "lambda_factor must be >= 0");
    require(c.R > 0.0, "R must be > 0");
    require(c.M >= 4, "M must be >= 4");
    require(c.g >= 1.0, "g must be >= 1");
    require(c.tau > 0.0, "tau must be > 0");
    require(c.t_end >= 0.0, "t_end must be >= 0");
    require(c.potential == PotentialKind::exact || c.n > 0.0,
            "a regularized or minimum potential needs n > 0");
    require(!c.source_q || *c.source_q > 0.0, "source_q must be > 0");
    require(c.safety > 0.0 && c.safety < 1.0, "safety must lie in (0, 1)");
    require(c.inner_tol > 0.0, "inner_tol must be > 0");
    require(c.output_interval >= 0.0, "output_interval must be >= 0");
    require(c.amplitude >= 0.0, "amplitude must be >= 0");
    require(c.t0 > 0.0, "t0 must be > 0");
    require(c.cap > 0.0, "cap must be > 0");
    for (double n : c.levels) require(n > 0.0, "levels must be positive");
    for (double r : c.radii) require(r > 4.0, "radii must exceed 4 (the cut-off support)");
    require(c.alpha > 0.0, "alpha must be > 0");
    require(c.samples >= 1, "samples must be >= 1");
    require(c.grid_size >= 2, "grid_size must be >= 2");
    require(c.psi_count >= 1, "psi_count must be >= 1");
    require(c.tolerance >= 0.0 && c.tolerance < 1.0, "tolerance must lie in [0, 1)");
    require(!c.out.empty(), "out must not be empty");
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto hash = raw.find('#');
        std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("line " + std::to_string(line) + ": expected key = value");
        std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
        if (key.empty()) throw ParseError("line " + std::to_string(line) + ": missing key");
        if (value.empty()) throw ParseError("line " + std::to_string(line) + ": missing value for " + key);
        const KeyDoc* doc = nullptr;
        for (const auto& k : keys())
            if (k.key == key) doc = &k;
        if (!doc) throw ParseError("line " + std::to_string(line) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ParseError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
        doc->set(c, line, key, value);
    }
    validate(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string config_help() {
    std::ostringstream os;
    os << "Config keys (key = value, # comments):\n";
    for (const auto& k : keys()) os << "  " << k.key << " [" << k.def << "]  " << k.doc << '\n';
    return os.str();
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"constants", "selfsim",      "evolve", "extinction", "blowup",
                                                "spaces",    "inequalities", "picone", "gronwall",   "noextinction"};
    return names;
}

int run_command(const std::string& name, const RunConfig& config, std::ostream& out, std::ostream& err) {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        err << "unknown command '" << name << "'; expected one of:";
        for (const auto& n : names) err << ' ' << n;
        err << '\n';
        return kExitUsage;
    }
    try {
        validate(config);
        Outcome o = dispatch(name, config);
        std::filesystem::create_directories(config.out);
        std::vector<CsvRow> summary;
        bool ok = true;
        for (const auto& r : o.reports) {
            print_checks(r, out);
            write_report(r, config.out);
            for (auto& row : summary_rows(r)) summary.push_back(std::move(row));
            ok = ok && r.status() == "pass";
        }
        write_csv(summary, summary_schema(), (std::filesystem::path(config.out) / "summary.csv").string());
        return ok ? kExitPass : kExitCheckFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

} // namespace frachardy
