#include "frachardy/quad.hpp"

#include "frachardy/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace frachardy::quad {

namespace {

Rule build_gauss_legendre(int n) {
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-17) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.x[i] = -x;
        r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

void check_exponents(double el, double er, bool tail) {
    if (!(el > -1.0))
        throw DivergentIntegrand("left exponent must be > -1, got " + std::to_string(el));
    if (tail) {
        if (!(er < -1.0))
            throw DivergentIntegrand("tail decay exponent must be < -1, got " + std::to_string(er));
    } else if (!(er > -1.0)) {
        throw DivergentIntegrand("right exponent must be > -1, got " + std::to_string(er));
    }
}

struct Sums {
    double value = 0.0;
    double abs_value = 0.0;
};

// One half-interval graded toward `end`; dir = +1 means cells grow to the right of `end`.
void half_rule(double end, double length, int dir, double g, int m, const Rule& rule, double total,
               GradedNodes& out) {
    const double lo = std::min(end, end + dir * length);
    const double hi = std::max(end, end + dir * length);
    for (int j = 0; j < m; ++j) {
        double d0 = length * std::pow(static_cast<double>(j) / m, g);
        double d1 = length * std::pow(static_cast<double>(j + 1) / m, g);
        double h = d1 - d0;
        if (h <= 0.0) continue;
        for (std::size_t k = 0; k < rule.x.size(); ++k) {
            double d = d0 + 0.5 * h * (rule.x[k] + 1.0);
            double xx = end + dir * d;
            if (d <= 0.0 || xx < lo || xx > hi) continue;
            out.x.push_back(xx);
            out.w.push_back(0.5 * h * rule.w[k]);
            out.from_left.push_back(dir > 0 ? d : total - d);
            out.from_right.push_back(dir > 0 ? total - d : d);
        }
    }
}

Sums apply(const SingularIntegrand& f, double a, double b, int m) {
    GradedNodes g = graded_nodes(a, b, f.left_exponent, f.right_exponent, m, kRuleOrder);
    Sums s;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        double v = f.offset_evaluator ? f.offset_evaluator(g.x[i], g.from_left[i], g.from_right[i])
                                      : f.evaluator(g.x[i]);
        s.value += g.w[i] * v;
        s.abs_value += g.w[i] * std::abs(v);
    }
    return s;
}

} // namespace

const Rule& gauss_legendre(int n) {
    static std::mutex mtx;
    static std::map<int, Rule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
    return it->second;
}

double grading_exponent(double e) {
    if (e >= 0.0 && e == std::floor(e)) return 1.0;
    return std::max(1.0, (kRuleOrder + 1.0) / (1.0 + e));
}

GradedNodes graded_nodes(double a, double b, double e_left, double e_right, int m, int n) {
    const Rule& rule = gauss_legendre(n);
    GradedNodes out;
    const double total = b - a;
    double gl = grading_exponent(e_left);
    double gr = grading_exponent(e_right);
    if (gl == 1.0 && gr == 1.0) {
        half_rule(a, total, +1, 1.0, 2 * m, rule, total, out);
        return out;
    }
    const double half = 0.5 * total;
    half_rule(a, half, +1, gl, m, rule, total, out);
    GradedNodes right;
    half_rule(b, half, -1, gr, m, rule, total, right);
    // ascending abscissae for a fixed summation order
    for (std::size_t i = right.x.size(); i-- > 0;) {
        out.x.push_back(right.x[i]);
        out.w.push_back(right.w[i]);
        out.from_left.push_back(right.from_left[i]);
        out.from_right.push_back(right.from_right[i]);
    }
    return out;
}

namespace {

bool smooth_exponent(double e) { return e >= 0.0 && e == std::floor(e); }

// cells of one half as distances from `end`: geometric layers toward a singular end
void geometric_half(double end, double length, int dir, double e, int n, double tol, double total,
                    GradedNodes& out) {
    const double lo = std::min(end, end + dir * length);
    const double hi = std::max(end, end + dir * length);
    auto emit = [&](double d0, double d1, int order) {
        const Rule& rule = gauss_legendre(order);
        double h = d1 - d0;
        for (std::size_t k = 0; k < rule.x.size(); ++k) {
            double d = d0 + 0.5 * h * (rule.x[k] + 1.0);
            double xx = end + dir * d;
            if (d <= 0.0 || xx < lo || xx > hi) continue;
            out.x.push_back(xx);
            out.w.push_back(0.5 * h * rule.w[k]);
            out.from_left.push_back(dir > 0 ? d : total - d);
            out.from_right.push_back(dir > 0 ? total - d : d);
        }
    };
    if (smooth_exponent(e)) {
        emit(0.0, 0.5 * length, n);
        emit(0.5 * length, length, n);
        return;
    }
    // layer k spans [ratio^{k+1}, ratio^k] * length; its share of the endpoint mass is
    // about ratio^{k(1+e)}, and an n-point rule on it converges like 9^{-n}
    const double ratio = 0.25;
    const double digits = -std::log(tol);
    const int layers = std::clamp(static_cast<int>(std::ceil(digits / ((1.0 + e) * std::log(1.0 / ratio)))), 1, 80);
    std::vector<std::pair<double, int>> cells;
    for (int k = 0; k < layers; ++k) {
        double left = digits - k * (1.0 + e) * std::log(1.0 / ratio);
        int order = std::clamp(static_cast<int>(std::ceil(left / std::log(9.0))), 2, n);
        cells.emplace_back(std::pow(ratio, k + 1), order);
    }
    emit(0.0, length * cells.back().first, 2);
    for (std::size_t k = cells.size(); k-- > 0;) {
        double d1 = k == 0 ? 1.0 : cells[k - 1].first;
        emit(length * cells[k].first, length * d1, cells[k].second);
    }
}

} // namespace

GradedNodes geometric_nodes(double a, double b, double e_left, double e_right, int n, double tol) {
    GradedNodes out;
    const double total = b - a;
    const double half = 0.5 * total;
    geometric_half(a, half, +1, e_left, n, tol, total, out);
    GradedNodes right;
    geometric_half(b, half, -1, e_right, n, tol, total, right);
    // ascending abscissae for a fixed summation order
    for (std::size_t i = right.x.size(); i-- > 0;) {
        out.x.push_back(right.x[i]);
        out.w.push_back(right.w[i]);
        out.from_left.push_back(right.from_left[i]);
        out.from_right.push_back(right.from_right[i]);
    }
    return out;
}

void graded_rule(double a, double b, double e_left, double e_right, int m, int n,
                 std::vector<double>& x, std::vector<double>& w) {
    GradedNodes g = graded_nodes(a, b, e_left, e_right, m, n);
    x = std::move(g.x);
    w = std::move(g.w);
}

double integrate_graded(const SingularIntegrand& f, double a, double b, double tol, int max_depth) {
    check_exponents(f.left_exponent, f.right_exponent, false);
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw DivergentIntegrand("integrate_graded needs finite a < b");
    tol = std::max(tol, 1e-14);
    const double eps = std::numeric_limits<double>::epsilon();
    int m = 2;
    Sums prev = apply(f, a, b, m);
    double prev_diff = std::numeric_limits<double>::infinity();
    int stalls = 0;
    for (int depth = 1; depth <= max_depth; ++depth) {
        m *= 2;
        Sums cur = apply(f, a, b, m);
        if (!std::isfinite(cur.value))
            throw NonConvergence("non-finite quadrature sum on [" + std::to_string(a) + ", " +
                                 std::to_string(b) + "]");
        double diff = std::abs(cur.value - prev.value);
        if (diff <= tol * std::abs(cur.value) || diff <= 64.0 * eps * cur.abs_value) return cur.value;
        if (depth >= 6 && diff >= 0.9 * prev_diff) {
            if (++stalls >= 3) break;
        } else {
            stalls = 0;
        }
        prev_diff = diff;
        prev = cur;
        if (m > (1 << 22)) break;
    }
    throw NonConvergence("graded quadrature did not reach tol " + std::to_string(tol) + " on [" +
                         std::to_string(a) + ", " + std::to_string(b) + "]");
}

double integrate_tail(const SingularIntegrand& f, double a, double tol, int max_depth) {
    check_exponents(f.left_exponent, f.right_exponent, true);
    if (!(a >= 1.0)) throw DivergentIntegrand("integrate_tail needs a >= 1");
    SingularIntegrand g;
    g.left_exponent = -f.right_exponent - 2.0;
    g.right_exponent = f.left_exponent;
    if (f.offset_evaluator) {
        const double inf = std::numeric_limits<double>::infinity();
        g.offset_evaluator = [&f, a, inf](double t, double, double dr) {
            // x - a = (1/t - a) = a * (1/a - t) / t
            return f.offset_evaluator(1.0 / t, a * dr / t, inf) / (t * t);
        };
    } else {
        g.evaluator = [&f](double t) { return f.evaluator(1.0 / t) / (t * t); };
    }
    return integrate_graded(g, 0.0, 1.0 / a, tol, max_depth);
}

} // namespace frachardy::quad
