#include "frachardy/radial.hpp"

#include "frachardy/csv.hpp"
#include "frachardy/errors.hpp"
#include "frachardy/parallel.hpp"
#include "frachardy/quad.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <numeric>
#include <random>

namespace frachardy {

RadialGrid build_grid(double R, int M, double g) {
    if (!(R > 0.0) || !std::isfinite(R)) throw InvalidGrid("grid radius must be positive");
    if (M < 2) throw InvalidGrid("grid needs at least 2 nodes");
    if (!(g >= 1.0) || !std::isfinite(g)) throw InvalidGrid("grading must be >= 1");
    RadialGrid grid;
    grid.R = R;
    grid.M = M;
    grid.g = g;
    grid.r.resize(M);
    for (int j = 1; j <= M; ++j) grid.r[j - 1] = R * std::pow(static_cast<double>(j) / M, g);
    grid.r[M - 1] = R;
    for (int j = 1; j < M; ++j)
        if (!(grid.r[j] > grid.r[j - 1])) throw InvalidGrid("grid nodes not strictly increasing");
    if (!(grid.r[0] > 0.0)) throw InvalidGrid("first node underflows to 0");
    return grid;
}

RadialFunction make_profile(const RadialGrid& grid, const std::function<double(double)>& f) {
    RadialFunction u{grid, std::vector<double>(grid.M)};
    for (int j = 0; j < grid.M; ++j) u.v[j] = f(grid.r[j]);
    return u;
}

double eval_at(const RadialFunction& u, double r) {
    const auto& x = u.grid.r;
    if (r > u.grid.R) return 0.0;
    if (r <= x[0]) return u.v[0];
    auto it = std::lower_bound(x.begin(), x.end(), r);
    std::size_t c = static_cast<std::size_t>(it - x.begin());
    if (*it == r) return u.v[c];
    double lam = (r - x[c - 1]) / (x[c] - x[c - 1]);
    return (1.0 - lam) * u.v[c - 1] + lam * u.v[c];
}

namespace {

/// omega_N (r rho)^{N-1-beta} r^{-mu} K(rho/r), evaluated with the ratio below 1.
struct PairKernel {
    int N;
    double mu, beta, omega, tol;

    double operator()(double r, double rho, double dist) const {
        double lo = std::min(r, rho), hi = std::max(r, rho);
        double K = kernel_K_near(N, mu, lo / hi, dist / hi, tol);
        return omega * std::pow(r * rho, N - 1 - beta) * std::pow(hi, -mu) * K;
    }
};

/// u at a point as c0 v[i0] + c1 v[i1].
struct Interp {
    int i0, i1;
    double c0, c1;
};

Interp cell_point(const RadialGrid& grid, int c, double from_lo, double from_hi) {
    if (c == 0) return {0, grid.M, 1.0, 0.0};
    double h = grid.width(c);
    return {c - 1, c, from_hi / h, from_lo / h};
}

PairTerm difference(const Interp& x, const Interp& y, double w) {
    return PairTerm{{x.i0, x.i1, y.i0, y.i1}, {x.c0, x.c1, -y.c0, -y.c1}, w};
}

PairTerm single(const Interp& x, int zero, double w) {
    return PairTerm{{x.i0, x.i1, zero, zero}, {x.c0, x.c1, 0.0, 0.0}, w};
}

struct Node {
    double r, from_lo, from_hi, w;
};

/// Quadrature nodes on cell c; cell 0 and the boundary cell are graded.
std::vector<Node> cell_nodes(const RadialGrid& grid, int c, int n, double e_origin, double e_boundary) {
    double lo = c == 0 ? 0.0 : grid.r[c - 1];
    double hi = grid.r[c];
    std::vector<Node> out;
    if (c == 0 || (c == grid.M - 1 && e_boundary != 0.0)) {
        auto g = quad::geometric_nodes(lo, hi, c == 0 ? e_origin : 0.0, c == 0 ? 0.0 : e_boundary, n, 1e-7);
        for (std::size_t i = 0; i < g.x.size(); ++i) out.push_back({g.x[i], g.from_left[i], g.from_right[i], g.w[i]});
        return out;
    }
    const auto& rule = quad::gauss_legendre(n);
    double half = 0.5 * (hi - lo);
    for (int i = 0; i < n; ++i) {
        double t = half * (1.0 + rule.x[i]);
        double u = half * (1.0 - rule.x[i]);
        out.push_back({lo + t, t, u, half * rule.w[i]});
    }
    return out;
}

int separated_points(double sep) {
    if (sep < 0.5) return 10;
    if (sep < 2.0) return 6;
    if (sep < 8.0) return 4;
    return 3;
}

} // namespace

GagliardoForm::GagliardoForm(const Params& params, const RadialGrid& grid, const FormSpec& spec)
    : params_(params), grid_(grid), spec_(spec) {
    build();
}

void GagliardoForm::build() {
    const int N = params_.N;
    const int M = grid_.M;
    const int Z = M;
    const double q = spec_.q, mu = spec_.mu, beta = spec_.beta;
    const double L = spec_.outer_radius;
    if (M < 3) throw InvalidGrid("form needs at least 3 nodes");
    if (!(mu > N - 1)) throw InvalidParams("mu must exceed N-1");
    if (!(q > 0.0)) throw InvalidParams("power must be positive");
    if (!(q > mu - N)) throw DivergentIntegrand("power must exceed mu - N for a finite seminorm");
    if (!(beta < N)) throw DivergentIntegrand("weight exponent must be below N");
    if (!(L > grid_.R)) throw InvalidParams("outer radius must exceed the domain radius");
    if (spec_.resolution < 1) throw InvalidParams("resolution must be >= 1");
    const bool tail = spec_.domain != Domain::omega_only;
    if (tail && std::isinf(L) && !(beta > N - mu))
        throw DivergentIntegrand("exterior integral diverges; use a finite outer radius");

    const int res = spec_.resolution;
    const int nq = 6 * res;
    const int nv = 12 * res;
    const double near_tol = 1e-6 * std::pow(1e-2, res - 1);
    const PairKernel kern{N, mu, beta, params_.omega_N, params_.tol.kernel};
    const auto& r = grid_.r;
    const double e_diag = q + N - mu;        // exponent of the diagonal distance
    const double e_origin = N - 1 - beta;    // kernel behaviour as one radius tends to 0

    // blocks: [0, M) same cell, [M, 2M) adjacent pairs, [2M, 3M) separated pairs by first cell
    std::vector<std::vector<PairTerm>> blocks(3 * M);
    parallel_for(3 * M, [&](int task) {
        auto& out = blocks[task];
        if (task < M) {
            int c = task;
            if (c == 0) return;  // u is constant on cell 0
            double h = grid_.width(c), ra = r[c - 1];
                        auto X = quad::geometric_nodes(0.0, h, e_diag, 0.0, nq, near_tol);
            auto W = quad::geometric_nodes(0.0, 1.0, e_diag - 1.0, 0.0, nq, near_tol);
            double C = 0.0;
            for (std::size_t i = 0; i < X.x.size(); ++i) {
                double x = X.x[i], acc = 0.0;
                for (std::size_t j = 0; j < W.x.size(); ++j) {
                    double d = x * W.x[j];
                    acc += W.w[j] * std::pow(d, q) * kern(ra + x, ra + x * W.from_right[j], d);
                }
                C += X.w[i] * x * acc;
            }
            out.push_back(PairTerm{{c - 1, c, Z, Z}, {-1.0 / h, 1.0 / h, 0.0, 0.0}, 2.0 * C});
        } else if (task < 2 * M) {
            int c = task - M;
            if (c > M - 2) return;
            double rs = r[c], A = grid_.width(c), B = grid_.width(c + 1);
                        auto T = quad::geometric_nodes(0.0, 1.0, e_diag, c == 0 ? e_origin : 0.0, nq, near_tol);
            const auto& V = quad::gauss_legendre(nv);
            for (int k = 0; k < nv; ++k) {
                double v = 0.5 * (1.0 + V.x[k]), wv = 0.5 * V.w[k];
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t i = 0; i < T.x.size(); ++i) {
                    double t = T.x[i], wt = T.w[i] * std::pow(t, q + 1.0);
                    double x1 = c == 0 ? A * T.from_right[i] : rs - A * t;
                    s1 += wt * kern(x1, rs + B * t * v, t * (A + B * v));
                    double x2 = c == 0 ? A * (1.0 - t * v) : rs - A * t * v;
                    s2 += wt * kern(x2, rs + B * t, t * (A * v + B));
                }
                // D / t = -a (v[c]-v[c-1]) - b (v[c+1]-v[c]) on the two triangles
                const double ab[2][2] = {{1.0, v}, {v, 1.0}};
                const double s[2] = {s1, s2};
                for (int tri = 0; tri < 2; ++tri) {
                    double a = ab[tri][0], b = ab[tri][1];
                    double w = 2.0 * wv * A * B * s[tri];
                    if (c == 0)
                        out.push_back(PairTerm{{c, c + 1, Z, Z}, {b, -b, 0.0, 0.0}, w});
                    else
                        out.push_back(PairTerm{{c - 1, c, c + 1, Z}, {a, b - a, -b, 0.0}, w});
                }
            }
        } else {
            int a = task - 2 * M;
            for (int b = a + 2; b < M; ++b) {
                double sep = (r[b - 1] - r[a]) / std::max(grid_.width(a), grid_.width(b));
                int n = separated_points(sep) * res;
                auto xa = cell_nodes(grid_, a, n, e_origin, 0.0);
                auto yb = cell_nodes(grid_, b, n, e_origin, 0.0);
                for (const Node& y : yb) {
                    Interp uy = cell_point(grid_, b, y.from_lo, y.from_hi);
                    if (a == 0) {
                        double acc = 0.0;
                        for (const Node& x : xa) acc += x.w * kern(x.r, y.r, y.r - x.r);
                        out.push_back(difference({0, Z, 1.0, 0.0}, uy, 2.0 * y.w * acc));
                    } else {
                        for (const Node& x : xa) {
                            Interp ux = cell_point(grid_, a, x.from_lo, x.from_hi);
                            out.push_back(difference(ux, uy, 2.0 * x.w * y.w * kern(x.r, y.r, y.r - x.r)));
                        }
                    }
                }
            }
        }
    });
    for (auto& b : blocks) {
        terms_.insert(terms_.end(), b.begin(), b.end());
        b.clear();
        b.shrink_to_fit();
    }

    if (tail) {
        // pairs with one point in the domain and one outside (up to the outer radius)
        const double e_boundary = mu - N < 1.0 ? -(mu - N) : q - (mu - N);
        std::vector<std::vector<Node>> cells(M);
        for (int c = 0; c < M; ++c) cells[c] = cell_nodes(grid_, c, nq, e_origin, e_boundary);
        struct Bp {
            double x, xm1;
        };
        std::vector<Bp> bps;
        std::vector<std::pair<int, int>> lim;  // breakpoint indices of each node's range
        for (int c = 0; c < M; ++c)
            for (const Node& nd : cells[c]) {
                double dR = c == M - 1 ? nd.from_hi : grid_.R - nd.r;
                bps.push_back({grid_.R / nd.r, dR / nd.r});
                if (std::isfinite(L)) bps.push_back({L / nd.r, (L - nd.r) / nd.r});
            }
        std::vector<int> order(bps.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int i, int j) { return bps[i].xm1 < bps[j].xm1; });
        std::vector<int> rank(bps.size());
        for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<int>(k);

        // sigma^{N-1-beta} K(sigma) on sigma > 1 written through K on (0, 1)
        const double e_tail = N - 1 - beta - mu;
        auto f = [&](double sg, double sm1) {
            return std::pow(sg, e_tail) * kernel_K_near(N, mu, 1.0 / sg, sm1 / sg, params_.tol.kernel);
        };
        const auto& gl = quad::gauss_legendre(10);
        std::vector<double> seg(order.size(), 0.0);  // integral from breakpoint k to k+1
        parallel_for(static_cast<int>(order.size()) - 1, [&](int k) {
            const Bp lo = bps[order[k]], hi = bps[order[k + 1]];
            double x = lo.x, xm1 = lo.xm1, total = 0.0;
            while (xm1 < hi.xm1) {
                double step = std::min(xm1, hi.xm1 - xm1);
                bool last = step == hi.xm1 - xm1;
                double half = 0.5 * step, acc = 0.0;
                for (int i = 0; i < 10; ++i) {
                    double t = half * (1.0 + gl.x[i]);
                    acc += gl.w[i] * f(x + t, xm1 + t);
                }
                total += half * acc;
                if (last) break;
                x += step;
                xm1 += step;
            }
            seg[k] = total;
        });
        const std::size_t nb = order.size();
        // accumulate from the side where the integrand is small, so no cancellation in S
        const bool decaying = e_tail < -1.0;
        std::vector<double> cum(nb + 1, 0.0);
        if (decaying) {
            double top = 0.0;
            if (std::isinf(L)) {
                quad::SingularIntegrand g;
                g.evaluator = [&](double sg) { return f(sg, sg - 1.0); };
                g.right_exponent = e_tail;
                top = quad::integrate_tail(g, bps[order[nb - 1]].x, 1e-12);
            }
            cum[nb - 1] = top;
            for (std::size_t k = nb - 1; k-- > 0;) cum[k] = cum[k + 1] + seg[k];
        } else {
            // both ends are large: accumulate outward from a pivot near sigma = 2
            std::size_t kp = 0;
            while (kp + 1 < nb && bps[order[kp]].xm1 < 1.0) ++kp;
            for (std::size_t k = kp + 1; k < nb; ++k) cum[k] = cum[k - 1] + seg[k - 1];
            for (std::size_t k = kp; k-- > 0;) cum[k] = cum[k + 1] - seg[k];
        }
        const int per = std::isfinite(L) ? 2 : 1;
        int idx = 0;
        for (int c = 0; c < M; ++c) {
            double cell0 = 0.0;
            for (const Node& nd : cells[c]) {
                int ka = rank[idx];
                double S;
                if (decaying)
                    S = std::isfinite(L) ? cum[ka] - cum[rank[idx + 1]] : cum[ka];
                else
                    S = cum[rank[idx + 1]] - cum[ka];
                idx += per;
                double T = params_.omega_N * std::pow(nd.r, 2.0 * N - 1.0 - 2.0 * beta - mu) * S;
                if (c == 0)
                    cell0 += nd.w * T;
                else
                    terms_.push_back(single(cell_point(grid_, c, nd.from_lo, nd.from_hi), Z, 2.0 * nd.w * T));
            }
            if (c == 0) terms_.push_back(PairTerm{{0, Z, Z, Z}, {1.0, 0.0, 0.0, 0.0}, 2.0 * cell0});
        }
        boundary_zero_required_ = mu - N >= 1.0;
    }

    if (spec_.domain == Domain::whole_space) {
        // exterior block: u vanishes at both points, so every term is zero
        const auto& rule = quad::gauss_legendre(4);
        const double R = grid_.R;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double x = R * (1.5 + 0.5 * rule.x[i]), y = R * (3.5 + 0.5 * rule.x[j]);
                double w = 2.0 * 0.25 * R * R * rule.w[i] * rule.w[j] * kern(x, y, y - x);
                exterior_terms_.push_back(PairTerm{{Z, Z, Z, Z}, {0.0, 0.0, 0.0, 0.0}, w});
            }
    }
}

namespace {

inline double term_diff(const PairTerm& t, const double* v) {
    return t.c[0] * v[t.idx[0]] + t.c[1] * v[t.idx[1]] + t.c[2] * v[t.idx[2]] + t.c[3] * v[t.idx[3]];
}

} // namespace

std::vector<double> GagliardoForm::extended(const std::vector<double>& v) const {
    if (static_cast<int>(v.size()) != grid_.M) throw InvalidProfile("profile size does not match the grid");
    if (boundary_zero_required_ && v.back() != 0.0)
        throw DivergentIntegrand("exterior interaction diverges unless the profile vanishes at R");
    std::vector<double> ext(v);
    ext.push_back(0.0);
    return ext;
}

double GagliardoForm::value(const std::vector<double>& v) const {
    auto ext = extended(v);
    const double q = spec_.q;
    double total = 0.0;
    auto add = [&](const std::vector<PairTerm>& terms) {
        for (const PairTerm& t : terms) {
            double D = term_diff(t, ext.data());
            total += t.w * (q == 2.0 ? D * D : std::pow(std::abs(D), q));
        }
    };
    add(terms_);
    add(exterior_terms_);
    return total;
}

std::vector<double> GagliardoForm::gradient(const std::vector<double>& v) const {
    auto ext = extended(v);
    const double q = spec_.q;
    std::vector<double> g(ext.size(), 0.0);
    for (const PairTerm& t : terms_) {
        double D = term_diff(t, ext.data());
        if (D == 0.0) continue;
        double phi = q == 2.0 ? 2.0 * D : q * std::pow(std::abs(D), q - 2.0) * D;
        for (int k = 0; k < 4; ++k) g[t.idx[k]] += t.w * phi * t.c[k];
    }
    g.pop_back();
    return g;
}

void GagliardoForm::frozen_matrix(const std::vector<double>& v, double eps, std::vector<double>& A) const {
    auto ext = extended(v);
    const int M = grid_.M;
    const double q = spec_.q;
    A.assign(static_cast<std::size_t>(M) * M, 0.0);
    for (const PairTerm& t : terms_) {
        double D = term_diff(t, ext.data());
        double W = t.w * (q == 2.0 ? 1.0 : std::pow(D * D + eps * eps, 0.5 * (q - 2.0)));
        for (int k = 0; k < 4; ++k) {
            if (t.idx[k] >= M || t.c[k] == 0.0) continue;
            double a = W * t.c[k];
            double* row = A.data() + static_cast<std::size_t>(t.idx[k]) * M;
            for (int l = 0; l < 4; ++l)
                if (t.idx[l] < M) row[t.idx[l]] += a * t.c[l];
        }
    }
}

std::vector<double> GagliardoForm::frozen_diagonal(const std::vector<double>& v, double eps) const {
    auto ext = extended(v);
    const int M = grid_.M;
    const double q = spec_.q;
    std::vector<double> d(M, 0.0);
    for (const PairTerm& t : terms_) {
        double D = term_diff(t, ext.data());
        double W = t.w * (q == 2.0 ? 1.0 : std::pow(D * D + eps * eps, 0.5 * (q - 2.0)));
        // repeated indices within a term contribute cross products to the same diagonal entry
        for (int k = 0; k < 4; ++k) {
            if (t.idx[k] >= M) continue;
            double ck = 0.0;
            for (int l = 0; l < 4; ++l)
                if (t.idx[l] == t.idx[k]) ck += t.c[l];
            bool first = true;
            for (int l = 0; l < k; ++l)
                if (t.idx[l] == t.idx[k]) first = false;
            if (first) d[t.idx[k]] += W * ck * ck;
        }
    }
    return d;
}

std::shared_ptr<const GagliardoForm> gagliardo_form(const Params& params, const RadialGrid& grid,
                                                    const FormSpec& spec) {
    static std::mutex mtx;
    static std::map<std::string, std::shared_ptr<const GagliardoForm>> cache;
    static std::deque<std::string> age;
    std::string key;
    for (double x : {double(params.N), params.tol.kernel, spec.q, spec.mu, spec.beta,
                     double(static_cast<int>(spec.domain)), spec.outer_radius, double(spec.resolution),
                     grid.R, double(grid.M), grid.g})
        key += format_number(x) + "|";
    {
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto form = std::make_shared<const GagliardoForm>(params, grid, spec);
    std::lock_guard<std::mutex> lock(mtx);
    if (cache.emplace(key, form).second) {
        age.push_back(key);
        if (age.size() > 24) {
            cache.erase(age.front());
            age.pop_front();
        }
    }
    return form;
}

namespace {

/// Quadrature of ω_N ∫ |u|^power r^{N-1+shift} dr as weights on interpolated values.
struct PointSum {
    std::vector<Interp> at;
    std::vector<double> w;
};

PointSum point_sum(const Params& params, const RadialGrid& grid, double shift) {
    const int N = params.N;
    const double e = N - 1 + shift;
    if (!(e > -1.0)) throw DivergentIntegrand("radial weight not integrable at the origin");
    PointSum out;
    out.at.push_back({0, grid.M, 1.0, 0.0});
    out.w.push_back(params.omega_N * std::pow(grid.r[0], e + 1.0) / (e + 1.0));
    const auto& rule = quad::gauss_legendre(12);
    for (int c = 1; c < grid.M; ++c) {
        double lo = grid.r[c - 1], half = 0.5 * grid.width(c);
        for (int i = 0; i < 12; ++i) {
            double t = half * (1.0 + rule.x[i]), u = half * (1.0 - rule.x[i]);
            out.at.push_back(cell_point(grid, c, t, u));
            out.w.push_back(params.omega_N * half * rule.w[i] * std::pow(lo + t, e));
        }
    }
    return out;
}

double point_value(const PointSum& ps, const std::vector<double>& v, double power, std::vector<double>* grad) {
    std::vector<double> ext(v);
    ext.push_back(0.0);
    if (grad) grad->assign(ext.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < ps.w.size(); ++k) {
        const Interp& a = ps.at[k];
        double u = a.c0 * ext[a.i0] + a.c1 * ext[a.i1];
        double au = std::abs(u);
        total += ps.w[k] * std::pow(au, power);
        if (grad && au > 0.0) {
            double d = ps.w[k] * power * std::pow(au, power - 2.0) * u;
            (*grad)[a.i0] += d * a.c0;
            (*grad)[a.i1] += d * a.c1;
        }
    }
    if (grad) grad->pop_back();
    return total;
}

void check_profile(const RadialFunction& u) {
    if (static_cast<int>(u.v.size()) != u.grid.M) throw InvalidProfile("profile size does not match the grid");
    for (double x : u.v)
        if (!std::isfinite(x)) throw InvalidProfile("profile has non-finite values");
}

FormSpec plain_spec(const Params& params) {
    FormSpec spec;
    spec.q = params.p;
    spec.mu = params.mu();
    return spec;
}

} // namespace

std::vector<double> lumped_mass(const Params& params, const RadialGrid& grid) {
    const int M = grid.M;
    std::vector<double> m(M, 0.0);
    const auto& rule = quad::gauss_legendre(16);
    const int N = params.N;
    m[0] = std::pow(grid.r[0], N) / N;
    for (int c = 1; c < M; ++c) {
        double lo = grid.r[c - 1], h = grid.width(c), half = 0.5 * h;
        for (int i = 0; i < 16; ++i) {
            double t = half * (1.0 + rule.x[i]);
            double w = half * rule.w[i] * std::pow(lo + t, N - 1);
            m[c] += w * t / h;
            m[c - 1] += w * (h - t) / h;
        }
    }
    for (double& x : m) x *= params.omega_N;
    return m;
}

std::vector<double> nonlocal_op_weak(const Params& params, const RadialFunction& u) {
    check_profile(u);
    auto form = gagliardo_form(params, u.grid, plain_spec(params));
    auto g = form->gradient(u.v);
    for (double& x : g) x /= 2.0 * params.p;
    return g;
}

std::vector<double> nonlocal_op_all(const Params& params, const RadialFunction& u) {
    auto g = nonlocal_op_weak(params, u);
    auto m = lumped_mass(params, u.grid);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] /= m[j];
    return g;
}

double nonlocal_op(const Params& params, const RadialFunction& u, int j) {
    if (j < 0 || j >= u.grid.M) throw InvalidProfile("node index out of range");
    return nonlocal_op_all(params, u)[j];
}

double nonlocal_op_pointwise(const Params& params, const RadialFunction& u, double r) {
    check_profile(u);
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidProfile("radius must be positive");
    const int N = params.N;
    const double p = params.p, mu = params.mu(), ps = params.ps;
    const double tol = params.tol.kernel;
    const auto& x = u.grid.r;
    double delta = 0.5 * r;
    for (double b : x) delta = std::min(delta, std::abs(r - b));
    if (!(delta > 1e-12 * r)) throw InvalidProfile("pointwise operator is undefined at a grid node");
    auto phi = [p](double t) { return t == 0.0 ? 0.0 : std::pow(std::abs(t), p - 2.0) * t; };
    // rho^{N-1} r^{-mu} K(rho/r)
    auto k = [&](double rho, double dist) {
        if (rho < r) return std::pow(rho, N - 1) * std::pow(r, -mu) * kernel_K_near(N, mu, rho / r, dist / r, tol);
        return std::pow(rho, N - 1 - mu) * kernel_K_near(N, mu, r / rho, dist / rho, tol);
    };
    const double ur = eval_at(u, r);
    const auto& gl = quad::gauss_legendre(10);
    auto panel = [&](double lo, double hi, const auto& f) {
        double half = 0.5 * (hi - lo), acc = 0.0;
        for (int i = 0; i < 10; ++i) acc += gl.w[i] * f(lo + half * (1.0 + gl.x[i]));
        return half * acc;
    };

    double total = 0.0;
    // symmetric window [r - delta, r + delta], where u is linear
    double slope = 0.0;
    if (r > x[0] && r < u.grid.R) {
        auto it = std::lower_bound(x.begin(), x.end(), r);
        std::size_t c = static_cast<std::size_t>(it - x.begin());
        slope = (u.v[c] - u.v[c - 1]) / (x[c] - x[c - 1]);
    }
    if (slope != 0.0) {
        auto sym = [&](double t) { return phi(slope * t) * (k(r - t, t) - k(r + t, t)); };
        double tmin = 1e-7 * delta;
        for (double lo = tmin; lo < delta; lo *= 4.0) total += panel(lo, std::min(delta, 4.0 * lo), sym);
        total += tmin * sym(tmin) / (p - ps);
    }
    // remaining intervals, split at the kinks and graded by the distance to r
    auto f = [&](double rho) { return phi(ur - eval_at(u, rho)) * k(rho, std::abs(rho - r)); };
    auto away = [&](double lo, double hi) {
        // panels no longer than their distance to r
        double acc = 0.0;
        if (hi <= r) {
            double b = hi;
            while (b > lo) {
                double a = std::max(lo, b - (r - b));
                acc += panel(a, b, f);
                b = a;
            }
        } else {
            double a = lo;
            while (a < hi) {
                double b = std::min(hi, a + (a - r));
                acc += panel(a, b, f);
                a = b;
            }
        }
        return acc;
    };
    std::vector<double> cuts{0.0};
    for (double b : x) cuts.push_back(b);
    double left_end = r - delta, right_start = r + delta;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double lo = cuts[i], hi = cuts[i + 1];
        double a = lo, b = std::min(hi, left_end);
        if (b > a) total += away(a, b);
        a = std::max(lo, right_start);
        if (hi > a) total += away(a, hi);
    }
    // outside the domain u = 0
    double start = std::max(u.grid.R, right_start);
    double far = std::max(start, 2.0 * r);
    if (far > start) total += away(start, far);
    if (ur != 0.0) {
        quad::SingularIntegrand g;
        g.evaluator = [&](double sg) { return std::pow(sg, N - 1 - mu) * kernel_K(N, mu, 1.0 / sg, tol); };
        g.right_exponent = N - 1 - mu;
        total += phi(ur) * std::pow(r, N - mu) * quad::integrate_tail(g, far / r, 1e-11);
    }
    return total;
}

double seminorm_general(const Params& params, const RadialFunction& u, double q, double mu, double beta,
                        Domain domain, double outer_radius) {
    check_profile(u);
    FormSpec spec;
    spec.q = q;
    spec.mu = mu;
    spec.beta = beta;
    spec.domain = domain;
    spec.outer_radius = outer_radius;
    return gagliardo_form(params, u.grid, spec)->value(u.v);
}

double seminorm_p(const Params& params, const RadialFunction& u) {
    return seminorm_general(params, u, params.p, params.mu(), 0.0);
}

double e_alpha_seminorm(const Params& params, const RadialFunction& u, double alpha) {
    RadialFunction w = u;
    for (int j = 0; j < u.grid.M; ++j) w.v[j] = std::pow(u.grid.r[j], alpha) * u.v[j];
    return seminorm_p(params, w);
}

double hardy_term(const Params& params, const RadialFunction& u, double power) {
    check_profile(u);
    if (!(power >= 1.0)) throw InvalidParams("power must be >= 1");
    return point_value(point_sum(params, u.grid, -params.ps), u.v, power, nullptr);
}

double lebesgue_norm_power(const Params& params, const RadialFunction& u, double power) {
    check_profile(u);
    if (!(power > 0.0)) throw InvalidParams("power must be positive");
    return point_value(point_sum(params, u.grid, 0.0), u.v, power, nullptr);
}

double rayleigh_quotient(const Params& params, const RadialFunction& u) {
    double H = hardy_term(params, u, params.p);
    if (!(H > 0.0)) throw ZeroDenominator("Hardy term vanishes");
    return 0.5 * seminorm_p(params, u) / H;
}

RayleighResult minimize_rayleigh(const Params& params, const RadialGrid& grid, int iterations,
                                 std::uint64_t seed) {
    const int M = grid.M;
    const double p = params.p;
    auto form = gagliardo_form(params, grid, plain_spec(params));
    const PointSum hs = point_sum(params, grid, -params.ps);
    // Hardy-weighted masses precondition the gradient
    std::vector<double> hw(M, 0.0);
    for (std::size_t k = 0; k < hs.w.size(); ++k) {
        hw[hs.at[k].i0] += hs.w[k] * hs.at[k].c0;
        if (hs.at[k].i1 < M) hw[hs.at[k].i1] += hs.w[k] * hs.at[k].c1;
    }

    // start from the truncated extremal power profile
    const double eta = (params.N - params.ps) / p;
    std::vector<double> v(M);
    for (int j = 0; j < M; ++j) v[j] = std::pow(grid.r[j] / grid.R, -eta) - 1.0;
    v[M - 1] = 0.0;
    auto normalize = [&](std::vector<double>& x) {
        double mx = 0.0;
        for (double a : x) mx = std::max(mx, std::abs(a));
        for (double& a : x) a /= mx;
    };
    normalize(v);
    auto quotient = [&](const std::vector<double>& x) {
        return 0.5 * form->value(x) / point_value(hs, x, p, nullptr);
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, M - 2);
    RayleighResult res;
    double Q = quotient(v);
    res.history.push_back(Q);
    double step = 0.05;
    std::vector<double> gH, trial(M);
    for (int it = 0; it < iterations; ++it) {
        double E = form->value(v);
        auto gE = form->gradient(v);
        double H = point_value(hs, v, p, &gH);
        std::vector<double> dir(M, 0.0);
        double dmax = 0.0;
        for (int j = 0; j < M - 1; ++j) {
            double gq = (gE[j] * H - E * gH[j]) / (2.0 * H * H);
            dir[j] = -gq / hw[j];
            dmax = std::max(dmax, std::abs(dir[j]));
        }
        bool moved = false;
        if (dmax > 0.0) {
            for (int tries = 0; tries < 30 && !moved; ++tries) {
                for (int j = 0; j < M; ++j) trial[j] = v[j] + step / dmax * dir[j];
                double Qt = quotient(trial);
                if (Qt < Q) {
                    v = trial;
                    Q = Qt;
                    moved = true;
                    step = std::min(1.0, 1.5 * step);
                } else {
                    step *= 0.5;
                }
            }
        }
        // seeded coordinate perturbation
        int j = pick(rng);
        trial = v;
        trial[j] *= 1.0 + 0.05 * gauss(rng);
        double Qt = quotient(trial);
        if (Qt < Q) {
            v = trial;
            Q = Qt;
        }
        normalize(v);
        res.history.push_back(Q);
    }
    res.value = Q;
    res.u = RadialFunction{grid, v};
    return res;
}

void write_profile_csv(const RadialFunction& u, const std::string& path) {
    check_profile(u);
    std::vector<CsvRow> rows;
    for (int j = 0; j < u.grid.M; ++j) rows.push_back({format_number(u.grid.r[j]), format_number(u.v[j])});
    write_csv(rows, {"r", "value"}, path);
}

} // namespace frachardy
