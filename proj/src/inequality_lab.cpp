#include "frachardy/inequality_lab.hpp"

#include "frachardy/errors.hpp"
#include "frachardy/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace frachardy {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRound = 1e-12;

double phi_p(double x, double p) { return x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), p - 1.0), x); }

// slack of big >= small relative to the larger side; NaN when both sides vanish
double margin_ge(double big, double small) {
    double scale = std::max(std::abs(big), std::abs(small));
    return scale > 0.0 ? (big - small) / scale : std::numeric_limits<double>::quiet_NaN();
}

struct Tally {
    long samples = 0;
    long violations = 0;
    double worst = std::numeric_limits<double>::infinity();
    // 0 = 0 samples count but do not set the worst margin
    void add(double margin, double allowed) {
        ++samples;
        if (std::isnan(margin)) return;
        if (margin < -allowed) ++violations;
        worst = std::min(worst, margin);
    }
    void merge(const Tally& o) {
        samples += o.samples;
        violations += o.violations;
        worst = std::min(worst, o.worst);
    }
};

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1));
    return g;
}

// a / b ratios for the homogeneous two-variable inequalities
std::vector<double> ratio_grid(int n) {
    if (n < 2) throw InvalidParams("grid size must be at least 2");
    return log_grid(1e-3, 1e3, n);
}

struct TwoSided {
    double smaller, larger; // the inequality claims smaller <= larger
};

// the three inequalities at (a, 1) with the given constants
TwoSided alge1_at(double a, double alpha, double c1, double c2) {
    return {std::pow(a + 1.0, alpha), c1 * std::pow(a, alpha) + c2};
}
TwoSided alge3_at(double a, double p, double alpha, double c3) {
    const double m = (p + alpha - 1.0) / p;
    return {c3 * std::pow(std::abs(std::pow(a, m) - 1.0), p), phi_p(a - 1.0, p) * (std::pow(a, alpha) - 1.0)};
}
TwoSided alge2_at(double a, double p, double alpha, double c4) {
    const double m = (p + alpha - 1.0) / p;
    return {std::pow(a + 1.0, alpha - 1.0) * std::pow(std::abs(a - 1.0), p),
            c4 * std::pow(std::abs(std::pow(a, m) - 1.0), p)};
}

InequalityReport make_report(const std::string& lemma, double p, double alpha, double C1, double C2) {
    InequalityReport r;
    r.lemma = lemma;
    r.p = p;
    r.alpha = alpha;
    r.C1 = C1;
    r.C2 = C2;
    return r;
}

void finish(InequalityReport& r, const Tally& t) {
    r.samples = t.samples;
    r.violations = t.violations;
    r.worst_margin = std::isfinite(t.worst) ? t.worst : 0.0;
}

// ---- structured tuples for the product inequality

struct Tuple {
    double a1, a2, b1, b2;
};

std::vector<double> delta_grid() {
    std::vector<double> d{0.0};
    for (int k = 6; k >= 1; --k) d.push_back(std::pow(10.0, -k));
    for (int k = 1; k < 40; ++k) d.push_back(k / 40.0);
    for (int k = 2; k <= 6; ++k) d.push_back(1.0 - std::pow(10.0, -k));
    return d;
}

// θ in [0, 1) with extra points at and around δ and δ^{1/p}
std::vector<double> theta_grid(double delta, double p) {
    std::vector<double> t{0.0};
    for (double x : log_grid(1e-6, 1.0 - 1e-6, 40)) t.push_back(x);
    for (int k = 1; k < 50; ++k) t.push_back(k / 50.0);
    for (int k = 2; k <= 6; ++k) t.push_back(1.0 - std::pow(10.0, -k));
    for (double c : {delta, std::pow(delta, 1.0 / p), std::sqrt(delta * std::pow(delta, 1.0 / p))})
        for (double f : {1.0 - 1e-6, 1.0, 1.0 + 1e-6}) {
            double x = c * f;
            if (x >= 0.0 && x < 1.0) t.push_back(x);
        }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

struct Family {
    std::string name;
    std::vector<Tuple> tuples;
};

std::vector<Family> structured_families(double p) {
    std::vector<Family> fam;
    Family edges{"edges_trivial", {}};
    const std::array<double, 5> some{0.0, 0.3, 1.0, 2.5, 7.0};
    for (double x : some)
        for (double y : some) {
            edges.tuples.push_back({x, -y, 0.0, 0.0});          // b = (0, 0)
            edges.tuples.push_back({0.0, 0.0, x, y});           // a = (0, 0)
            edges.tuples.push_back({x - 1.0, x - 1.0, x, y});   // a1 = a2
            edges.tuples.push_back({x, -y, 1.5, 1.5});          // b1 = b2
            edges.tuples.push_back({x, y - 3.0, 0.0, y});       // b1 = 0
            edges.tuples.push_back({x, 0.0, y, 0.0});           // b2 = 0, a2 = 0
        }
    fam.push_back(std::move(edges));

    Family ordered_b1{"I_b1_gt_b2", {}}, upper{"I_b2_gt_b1_thetap_gt_delta", {}},
        below{"I_b2_gt_b1_theta_lt_delta", {}}, middle{"I_b2_gt_b1_delta_le_theta_le_delta_root", {}};
    for (double d : delta_grid())
        for (double th : theta_grid(d, p)) {
            const double tp = std::pow(th, p);
            ordered_b1.tuples.push_back({1.0, d, 1.0, tp});
            Tuple t{1.0, d, tp, 1.0};
            if (tp > d)
                upper.tuples.push_back(t);
            else if (th < d)
                below.tuples.push_back(t);
            else
                middle.tuples.push_back(t);
        }
    std::vector<Family> first{ordered_b1, upper, below, middle};
    for (auto& f : first) fam.push_back(f);

    // II: indices swapped, III: both entries of a negated, IV: a2 < 0 < a1 and its mirror
    Family swapped{"II_swapped", {}}, negated{"III_nonpositive", {}}, mixed{"IV_mixed_signs", {}};
    for (const auto& f : first)
        for (const auto& t : f.tuples) {
            swapped.tuples.push_back({t.a2, t.a1, t.b2, t.b1});
            negated.tuples.push_back({-t.a1, -t.a2, t.b1, t.b2});
            mixed.tuples.push_back({t.a1, -t.a2, t.b1, t.b2});
            mixed.tuples.push_back({-t.a2, t.a1, t.b2, t.b1});
        }
    fam.push_back(std::move(swapped));
    fam.push_back(std::move(negated));
    fam.push_back(std::move(mixed));
    return fam;
}

// evaluates tuples in parallel chunks; min and counts do not depend on the chunking
Tally tally_alge4(const std::vector<Tuple>& tuples, double p, double C1, double C2) {
    const int chunks = std::max(1, std::min<int>(64, static_cast<int>(tuples.size() / 1024) + 1));
    std::vector<Tally> part(chunks);
    const std::size_t n = tuples.size();
    parallel_for(chunks, [&](int c) {
        std::size_t lo = n * c / chunks, hi = n * (c + 1) / chunks;
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& t = tuples[i];
            auto s = alge4_sides(p, t.a1, t.a2, t.b1, t.b2, C1, C2);
            part[c].add(margin_ge(s.lhs, s.rhs), kRound);
        }
    });
    Tally all;
    for (const auto& t : part) all.merge(t);
    return all;
}

} // namespace

const std::vector<std::string>& inequality_schema() {
    static const std::vector<std::string> s{"lemma", "p", "alpha", "C1", "C2", "samples", "violations", "worst_margin",
                                            "seed"};
    return s;
}

CsvRow inequality_row(const InequalityReport& r) {
    return {r.lemma,
            format_number(r.p),
            std::isnan(r.alpha) ? "" : format_number(r.alpha),
            format_number(r.C1),
            std::isnan(r.C2) ? "" : format_number(r.C2),
            std::to_string(r.samples),
            std::to_string(r.violations),
            format_number(r.worst_margin),
            std::to_string(r.seed)};
}

void write_inequality_csv(const std::vector<InequalityReport>& reports, const std::string& path) {
    std::vector<CsvRow> rows;
    for (const auto& r : reports) rows.push_back(inequality_row(r));
    write_csv(rows, inequality_schema(), path);
}

// ---------------------------------------------------------------- α inequalities

AlggConstants search_constants_algg(double p, double alpha, int grid_size) {
    if (!(p >= 1.0) || !(alpha > 0.0)) throw InvalidParams("need p >= 1 and alpha > 0");
    AlggConstants c;
    c.p = p;
    c.alpha = alpha;
    c.grid_size = grid_size;
    auto grid = ratio_grid(grid_size);
    grid.push_back(1.0);
    double r12 = 0.0, r3 = std::numeric_limits<double>::infinity(), r4 = 0.0;
    for (double a : grid) {
        auto s1 = alge1_at(a, alpha, 1.0, 1.0);
        r12 = std::max(r12, s1.smaller / s1.larger);
        if (std::abs(a - 1.0) < 1e-9) continue;
        auto s3 = alge3_at(a, p, alpha, 1.0);
        r3 = std::min(r3, s3.larger / s3.smaller);
        if (alpha >= 1.0) {
            auto s2 = alge2_at(a, p, alpha, 1.0);
            r4 = std::max(r4, s2.smaller / s2.larger);
        }
    }
    c.raw_c12 = r12;
    c.raw_c3 = r3;
    c.raw_c4 = alpha >= 1.0 ? r4 : kNaN;
    c.c1 = c.c2 = 1.05 * r12;
    c.c3 = r3 / 1.05;
    c.c4 = alpha >= 1.0 ? 1.05 * r4 : kNaN;
    return c;
}

std::vector<InequalityReport> check_algg(const AlggConstants& c, int grid_size) {
    auto grid = ratio_grid(grid_size);
    grid.push_back(1.0);
    Tally t1, t3, t4;
    for (double a : grid) {
        // both orders, since c1 and c2 may differ
        for (double x : {a, 1.0 / a}) {
            auto s = alge1_at(x, c.alpha, c.c1, c.c2);
            t1.add(margin_ge(s.larger, s.smaller), kRound);
        }
        auto s3 = alge3_at(a, c.p, c.alpha, c.c3);
        t3.add(margin_ge(s3.larger, s3.smaller), kRound);
        if (c.alpha >= 1.0) {
            auto s2 = alge2_at(a, c.p, c.alpha, c.c4);
            t4.add(margin_ge(s2.larger, s2.smaller), kRound);
        }
    }
    std::vector<InequalityReport> out;
    auto r1 = make_report("alge1", c.p, c.alpha, c.c1, c.c2);
    finish(r1, t1);
    out.push_back(r1);
    auto r3 = make_report("alge3", c.p, c.alpha, c.c3, kNaN);
    finish(r3, t3);
    out.push_back(r3);
    if (c.alpha >= 1.0) {
        auto r4 = make_report("alge2", c.p, c.alpha, c.c4, kNaN);
        finish(r4, t4);
        out.push_back(r4);
    }
    return out;
}

// ---------------------------------------------------------------- product inequality

Alge4Sides alge4_sides(double p, double a1, double a2, double b1, double b2, double C1, double C2) {
    const double r1 = std::pow(b1, 1.0 / p), r2 = std::pow(b2, 1.0 / p);
    Alge4Sides s;
    s.lhs = phi_p(a1 - a2, p) * (a1 * b1 - a2 * b2);
    s.rhs = C1 * std::pow(std::abs(a1 * r1 - a2 * r2), p) -
            C2 * std::pow(std::max(std::abs(a1), std::abs(a2)), p) * std::pow(std::abs(r1 - r2), p);
    return s;
}

InequalityReport check_alge4(double p, long samples, double C1, double C2, std::uint64_t seed) {
    if (!(p > 1.0 && p < 2.0)) throw InvalidParams("the product inequality is checked for 1 < p < 2");
    if (!(C1 > 0.0 && C1 < 1.0 && C2 >= 1.0)) throw InvalidParams("need 0 < C1 < 1 <= C2");
    if (samples < 0) throw InvalidParams("sample count must be nonnegative");
    auto rep = make_report("alge4", p, kNaN, C1, C2);
    rep.seed = seed;
    Tally total;
    std::vector<Tuple> random(static_cast<std::size_t>(samples));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> A(-10.0, 10.0), B(0.0, 10.0);
    for (auto& t : random) {
        t.a1 = A(rng);
        t.a2 = A(rng);
        t.b1 = B(rng);
        t.b2 = B(rng);
    }
    auto tr = tally_alge4(random, p, C1, C2);
    rep.families.push_back({"random", tr.samples, tr.violations});
    total.merge(tr);
    for (const auto& f : structured_families(p)) {
        auto tf = tally_alge4(f.tuples, p, C1, C2);
        rep.families.push_back({f.name, tf.samples, tf.violations});
        total.merge(tf);
    }
    finish(rep, total);
    return rep;
}

Alge4Constants search_constants_alge4(double p, int grid_size, long samples, std::uint64_t seed) {
    if (!(p > 1.0 && p < 2.0)) throw InvalidParams("the product inequality is checked for 1 < p < 2");
    if (grid_size < 2) throw InvalidParams("grid size must be at least 2");
    long stated_violations = 0;
    for (Alge4Recipe recipe : {Alge4Recipe::stated, Alge4Recipe::corrected}) {
        Alge4Constants best;
        best.recipe = recipe;
        double best_ratio = -1.0;
        for (int i = 0; i < grid_size; ++i) {
            const double eps = 0.1 + (5.0 - 0.1) * i / (grid_size - 1);
            const double C1 = std::pow(1.0 + eps, 1.0 - p);
            const double floor = recipe == Alge4Recipe::stated ? 1.0 : 1.0 + C1;
            const double C2 = std::max(floor, C1 * std::pow(1.0 + 1.0 / eps, p - 1.0));
            if (C1 / C2 > best_ratio) {
                best_ratio = C1 / C2;
                best.C1 = C1;
                best.C2 = C2;
                best.epsilon = eps;
            }
        }
        for (int k = 0; k <= 20; ++k) {
            best.validation = check_alge4(p, samples, best.C1, best.C2, seed);
            if (best.validation.passed()) {
                best.shrinks = k;
                best.stated_violations = stated_violations;
                return best;
            }
            if (k < 20) best.C1 *= 0.95;
        }
        if (recipe == Alge4Recipe::stated) stated_violations = best.validation.violations;
    }
    throw SearchFailure("no validated constant pair after 20 reductions");
}

// ---------------------------------------------------------------- Picone

PiconeReport check_picone(const Params& params, const RadialFunction& source, const std::vector<NamedProfile>& psi_list,
                          double tolerance, double t_end) {
    const auto& grid = source.grid;
    const int M = grid.M;
    for (double f : source.v)
        if (!(f >= 0.0) || !std::isfinite(f)) throw InvalidProfile("source must be finite and nonnegative");
    if (*std::max_element(source.v.begin(), source.v.end() - 1) <= 0.0)
        throw InvalidProfile("source must be positive somewhere inside the ball");

    EvolutionConfig cfg;
    cfg.lambda = 0.0;
    cfg.t_end = t_end;
    cfg.forcing = source.v;
    cfg.forcing.back() = 0.0;
    EvolutionSystem sys(params, grid, cfg);
    // pseudo-time march of w' = -op(w) + f to its stationary state
    RadialFunction w0{grid, std::vector<double>(M, 1e-12)};
    w0.v.back() = 0.0;
    cfg.tau = initial_step(sys, w0.v, 1e-3, cfg.safety);
    std::vector<double> last = w0.v;
    double last_t = 0.0;
    bool settled = false;
    Observer stationary = [&](const EvolutionState& s) {
        double dt = s.t - last_t, d = 0.0, top = 0.0;
        for (int j = 0; j < M; ++j) {
            d = std::max(d, std::abs(s.u.v[j] - last[j]));
            top = std::max(top, std::abs(s.u.v[j]));
        }
        last = s.u.v;
        last_t = s.t;
        settled = dt > 0.0 && top > 0.0 && d / (top * dt) <= 1e-10;
        return settled;
    };
    auto res = evolve(sys, w0, cfg, {stationary});
    if (!settled) throw OracleUnavailable("supersolution iteration did not settle");

    PiconeReport rep;
    rep.w = res.final_state.u;
    const auto& w = rep.w.v;
    const auto& m = sys.mass();
    auto g = sys.form().gradient(w);
    rep.op_w.assign(M, 0.0);
    double op_max = 0.0;
    for (int j = 0; j + 1 < M; ++j) {
        rep.op_w[j] = g[j] / (2.0 * params.p * m[j]);
        op_max = std::max(op_max, std::abs(rep.op_w[j]));
    }
    for (int j = 0; j + 1 < M; ++j) {
        if (!(w[j] > 0.0)) throw OracleUnavailable("constructed w is not positive inside the ball");
        if (rep.op_w[j] < -1e-6 * op_max) throw OracleUnavailable("constructed w is not a supersolution");
    }

    rep.summary = make_report("picone", params.p, kNaN, 1.0 - tolerance, kNaN);
    Tally t;
    for (const auto& prof : psi_list) {
        RadialFunction psi = make_profile(grid, prof.f);
        psi.v.back() = 0.0;
        const double lhs = 0.5 * seminorm_general(params, psi, params.p, params.N + params.ps, 0.0);
        double rhs = 0.0;
        for (int j = 0; j + 1 < M; ++j)
            rhs += m[j] * rep.op_w[j] * std::pow(std::abs(psi.v[j]), params.p) / std::pow(w[j], params.p - 1.0);
        rep.names.push_back(prof.name);
        rep.energy.push_back(lhs);
        rep.weighted.push_back(rhs);
        t.add(margin_ge(lhs, rhs), tolerance);
    }
    finish(rep.summary, t);
    return rep;
}

std::vector<NamedProfile> random_test_functions(double R, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<NamedProfile> out;
    for (int k = 0; k < count; ++k) {
        int hats = 1 + static_cast<int>(U(rng) * 3.0) % 3;
        std::vector<std::array<double, 3>> h;
        for (int i = 0; i < hats; ++i) {
            double width = R * (0.05 + 0.25 * U(rng));
            double centre = width + (0.9 * R - 2.0 * width) * U(rng);
            double amp = (U(rng) < 0.3 ? -1.0 : 1.0) * (0.2 + U(rng));
            h.push_back({centre, std::max(width, 1e-3 * R), amp});
        }
        out.push_back({"random_" + std::to_string(k), [h](double r) {
                           double v = 0.0;
                           for (const auto& x : h) v += x[2] * std::max(0.0, 1.0 - std::abs(r - x[0]) / x[1]);
                           return v;
                       }});
    }
    return out;
}

} // namespace frachardy
