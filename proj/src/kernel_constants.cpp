#include "frachardy/kernel_constants.hpp"

#include "frachardy/errors.hpp"
#include "frachardy/quad.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace frachardy {

namespace {

// Gauss-Kronrod 7/15 pair on [-1, 1]; index 7 is the centre.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
void gk15(const F& f, double a, double b, double& result, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fc = f(c);
    double rk = fc * kWgk[7];
    double rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        double dx = h * kXgk[j];
        double f1 = f(c - dx);
        double f2 = f(c + dx);
        rk += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) rg += kWg[j / 2] * (f1 + f2);
    }
    result = rk * h;
    err = std::abs((rk - rg) * h);
}

template <class F>
double adaptive(const F& f, double a, double b, double rel_tol, int depth) {
    double r, e;
    gk15(f, a, b, r, e);
    if (e <= rel_tol * std::abs(r) || depth >= 40) return r;
    double m = 0.5 * (a + b);
    return adaptive(f, a, m, rel_tol, depth + 1) + adaptive(f, m, b, rel_tol, depth + 1);
}

double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

double angular_prefactor(int N) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * (N - 1)) / std::tgamma(0.5 * (N - 1));
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

double phi_p(double t, double p) {
    if (t == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(t), p - 1.0), t);
}

} // namespace

double sphere_area(int N) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N);
}

Params Params::make(int N, double s, double p, double lambda, Tolerances tol) {
    if (N < 2) throw InvalidParams("N must be >= 2");
    if (!(s > 0.0 && s < 1.0)) throw InvalidParams("s must lie in (0,1)");
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidParams("p must be > 1");
    if (!(p * s < N)) throw InvalidParams("ps must be < N (p < N/s)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidParams("lambda must be >= 0");
    Params q;
    q.N = N;
    q.s = s;
    q.p = p;
    q.lambda = lambda;
    q.tol = tol;
    q.ps = p * s;
    q.p_star = p * N / (N - q.ps);
    q.gamma_ss = p != 2.0 ? -q.ps / (2.0 - p) : 0.0;
    q.gamma_bar = p < 2.0 ? q.ps / (2.0 - p) : 0.0;
    q.eta_max = (N - q.ps) / p;
    q.p_crit_low = 2.0 * N / (N + 2.0 * s);
    q.p_crit_mid = 2.0 * N / (N + s);
    q.p2 = (N * (p - 1.0) + q.ps) / (N + s);
    q.omega_N = sphere_area(N);
    return q;
}

Params Params::with_lambda(double lam) const { return make(N, s, p, lam, tol); }

double kernel_K(int N, double mu, double sigma, double tol) {
    return kernel_K_near(N, mu, sigma, std::abs(1.0 - sigma), tol);
}

double kernel_K_near(int N, double mu, double sigma, double d, double tol) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw SingularArgument("kernel needs sigma > 0");
    if (!(d > 0.0)) throw SingularArgument("kernel diverges at sigma = 1");
    if (!(mu > N - 1)) throw SingularArgument("kernel needs mu > N-1");
    const double d2 = d * d;
    const double half_mu = 0.5 * mu;
    const int k = N - 2;
    auto f = [=](double xi) {
        double sh = std::sin(0.5 * xi);
        double ch = std::cos(0.5 * xi);
        double den = d2 + 4.0 * sigma * sh * sh;
        return ipow(2.0 * sh * ch, k) * std::exp(-half_mu * std::log(den));
    };
    const double pi = std::numbers::pi;
    double total = 0.0;
    double lo = 0.0;
    if (d < 0.125) {
        // geometric panels [0,d], [d,4d], ... resolve the peak of width d at xi = 0; on each
        // panel the nearest complex singularity is at least one panel width away, so a fixed
        // 15-point Gauss rule is accurate far below the kernel tolerance
        const auto& rule = quad::gauss_legendre(15);
        double hi = d;
        while (lo < 0.5) {
            double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo), acc = 0.0;
            for (int i = 0; i < 15; ++i) acc += rule.w[i] * f(c + h * rule.x[i]);
            total += h * acc;
            lo = hi;
            hi *= 4.0;
        }
        total += adaptive(f, lo, pi, tol, 0);
    } else {
        double hi = d < 0.25 * pi ? d : pi;
        while (true) {
            total += adaptive(f, lo, hi, tol, 0);
            if (hi >= pi) break;
            lo = hi;
            hi = std::min(pi, 4.0 * hi);
        }
    }
    return angular_prefactor(N) * total;
}

double kernel_K(const Params& params, double mu, double sigma) {
    return kernel_K(params.N, mu, sigma, params.tol.kernel);
}

KernelTable::KernelTable(const Params& params, double mu) : params_(params), mu_(mu) {
    if (!(mu > params.N - 1)) throw SingularArgument("kernel needs mu > N-1");
}

double KernelTable::operator()(double sigma) const { return at(sigma, std::abs(1.0 - sigma)); }

double KernelTable::at(double sigma, double d) const {
    const std::uint64_t key =
        std::bit_cast<std::uint64_t>(sigma) ^ (std::bit_cast<std::uint64_t>(d) * 0x9E3779B97F4A7C15ULL);
    {
        std::lock_guard<std::mutex> lock(mtx_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second.value;
    }
    double v = kernel_K_near(params_.N, mu_, sigma, d, params_.tol.kernel);
    std::lock_guard<std::mutex> lock(mtx_);
    cache_.emplace(key, Entry{sigma, d, v});
    return v;
}

std::size_t KernelTable::size() const {
    std::lock_guard<std::mutex> lock(mtx_);
    return cache_.size();
}

double KernelTable::symmetry_defect() const {
    std::vector<Entry> entries;
    {
        std::lock_guard<std::mutex> lock(mtx_);
        for (auto& kv : cache_) entries.push_back(kv.second);
    }
    double worst = 0.0;
    for (const Entry& e : entries) {
        double x = e.sigma;
        // |1 - 1/x| = d / x
        double kinv = kernel_K_near(params_.N, mu_, 1.0 / x, e.dist / x, params_.tol.kernel);
        double dev = std::abs(kinv * std::pow(x, -mu_) - e.value) / e.value;
        worst = std::max(worst, dev);
    }
    return worst;
}

double hardy_constant(const Params& params) {
    KernelTable K(params, params.mu());
    const double e = params.eta_max;
    const double p = params.p;
    const double ps = params.ps;
    quad::SingularIntegrand f;
    f.left_exponent = ps - 1.0;
    f.right_exponent = p - 1.0 - ps;
    f.offset_evaluator = [&](double sig, double, double d) {
        double lg = sig > 0.5 ? std::log1p(-d) : std::log(sig);
        return std::pow(sig, ps - 1.0) * std::pow(-std::expm1(e * lg), p) * K.at(sig, d);
    };
    return quad::integrate_graded(f, 0.0, 1.0, params.tol.constants);
}

namespace {

// Shared tail integral: int_1^inf K (s^g - 1)^{p-1} (s^{N-1-b-g(p-1)} - s^{b+ps-1}) ds
double tail_family(const KernelTable& K, double beta, double g, double tol) {
    const Params& P = K.params();
    const double p = P.p;
    const double ps = P.ps;
    const int N = P.N;
    const double decay = std::max(-1.0 - ps - beta, g * (p - 1.0) + beta - N - 1.0);
    if (!(decay < -1.0))
        throw DivergentIntegrand("tail integral diverges: need beta > -ps and gamma(p-1)+beta < N (gamma=" +
                                 fmt(g) + ", beta=" + fmt(beta) + ")");
    const double gap = N - 2.0 * beta - ps - g * (p - 1.0);
    quad::SingularIntegrand f;
    f.left_exponent = p - 1.0 - ps;
    f.right_exponent = decay;
    f.offset_evaluator = [&, gap](double sig, double d, double) {
        double lg = std::log1p(d);
        return K.at(sig, d) * std::pow(std::expm1(g * lg), p - 1.0) * std::pow(sig, beta + ps - 1.0) *
               std::expm1(gap * lg);
    };
    return quad::integrate_tail(f, 1.0, tol);
}

} // namespace

double theta(const KernelTable& K, double eta, double tol) {
    if (!(eta >= 0.0)) throw InvalidParams("theta needs eta >= 0");
    if (eta == 0.0) return 0.0;
    return tail_family(K, 0.0, eta, tol);
}

double theta(const Params& params, double eta) {
    KernelTable K(params, params.mu());
    return theta(K, eta, params.tol.constants);
}

std::pair<double, double> theta_roots(const Params& params) {
    if (!(params.lambda > 0.0)) throw NoBracket("theta_roots needs lambda > 0");
    KernelTable K(params, params.mu());
    const double tol = std::min(params.tol.constants, 1e-11);
    const double lam = params.lambda;
    const double em = params.eta_max;
    const double top = theta(K, em, tol);
    if (!(lam < top)) throw NoBracket("theta_roots needs lambda < Lambda");
    auto bisect = [&](double lo, double hi, bool increasing) {
        double mid = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            mid = 0.5 * (lo + hi);
            double v = theta(K, mid, tol);
            if (std::abs(v - lam) <= 1e-9 * lam) break;
            if ((v < lam) == increasing)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
        }
        return mid;
    };
    double eta1 = bisect(0.0, em, true);
    const double zero = (params.N - params.ps) / (params.p - 1.0);
    double H = em;
    for (int k = 1; k <= 60; ++k) {
        H = em + (zero - em) * (1.0 - std::ldexp(1.0, -k));
        if (theta(K, H, tol) < lam) break;
        if (k == 60) throw NoBracket("no upper bracket for the second root");
    }
    double eta2 = bisect(em, H, false);
    return {eta1, eta2};
}

double psi1(const Params& params) {
    if (!(params.p < 2.0)) throw NotSelfSimilarRegime("psi1 needs p < 2");
    return -theta(params, params.gamma_bar);
}

double upsilon(const Params& params, double beta, double gamma) {
    if (!(beta > -params.ps && beta < 0.5 * (params.N - params.ps)))
        throw InvalidParams("upsilon needs -ps < beta < (N-ps)/2");
    if (!(gamma > 0.0)) throw InvalidParams("upsilon needs gamma > 0");
    KernelTable K(params, params.mu());
    return tail_family(K, beta, gamma, params.tol.constants);
}

SelfSimilar selfsim_build(const Params& params) {
    if (!(params.p < 2.0)) throw NotSelfSimilarRegime("self-similar profile needs p < 2");
    SelfSimilar ss;
    ss.params = params;
    ss.gamma = -params.ps / (2.0 - params.p);
    ss.alpha_t = 1.0 / (2.0 - params.p);
    ss.psi1 = psi1(params);
    if (!(ss.psi1 + params.lambda > 0.0))
        throw NotSelfSimilarRegime("psi1 + lambda must be > 0 (got " + fmt(ss.psi1 + params.lambda) + ")");
    ss.B = 1.0 / ((2.0 - params.p) * (ss.psi1 + params.lambda));
    ss.A = std::pow(ss.B, 1.0 / (params.p - 2.0));
    return ss;
}

double selfsim_value(const SelfSimilar& ss, double r, double t) {
    return ss.A * std::pow(t / std::pow(r, ss.params.ps), ss.alpha_t);
}

double selfsim_residual(const SelfSimilar& ss, double r) {
    const Params& P = ss.params;
    const double p = P.p;
    const double g = ss.gamma;
    const int N = P.N;
    const double mu = P.mu();
    KernelTable K(P, mu);
    // principal value over (0, inf) folded onto (1, inf) by sigma -> 1/sigma
    // Near σ = 1 the two branches cancel to leading order and K overflows. With l = log σ, y = -g l and
    // r± = expm1(±g l)/(±g l) the sum is Φ(y) e^B expm1((g(p-1) + 2N - μ) l), B = (p-1) ln r- + (μ-N-1) l.
    const double d0 = 1e-30;
    const double K0 = K.at(1.0 + d0, d0);
    auto folded = [&](double x, double d, double) {
        double lg = std::log1p(d);
        if (d >= 0.5) {
            const double k = K.at(x, d);
            double a = phi_p(-std::expm1(g * lg), p) * std::pow(x, N - 1.0) * k;
            double b = 0.0;
            const double z = -g * lg;
            if (std::abs(z) < 50.0) {
                b = phi_p(-std::expm1(z), p) * std::pow(x, mu - N - 1.0) * k;
            } else if (k > 0.0) {
                // large σ: σ^{-g} overflows while K underflows
                const double lz = z > 0.0 ? z + std::log1p(-std::exp(-z)) : 0.0;
                b = -std::copysign(1.0, z) * std::exp((p - 1.0) * lz + (mu - N - 1.0) * lg + std::log(k));
            }
            return a + b;
        }
        if (lg == 0.0) return 0.0;
        const double y = -g * lg;
        const double rm = std::expm1(-g * lg) / (-g * lg);
        const double B = (p - 1.0) * std::log(rm) + (mu - N - 1.0) * lg;
        const double bracket = std::exp(B) * std::expm1((g * (p - 1.0) + 2.0 * N - mu) * lg);
        if (d >= d0) return phi_p(y, p) * bracket * K.at(x, d);
        // K ~ K(d0) (d0/d)^{1+ps} below d0, evaluated in logs
        double mag = (p - 1.0) * std::log(std::abs(y)) + std::log(std::abs(bracket)) + std::log(K0) +
                     (1.0 + P.ps) * (std::log(d0) - std::log(d));
        return std::copysign(1.0, y) * std::copysign(1.0, bracket) * std::exp(mag);
    };
    const double tol = 1e-11;
    quad::SingularIntegrand near;
    near.left_exponent = p - 1.0 - P.ps;
    near.right_exponent = 0.0;
    near.offset_evaluator = folded;
    quad::SingularIntegrand far;
    far.left_exponent = 0.0;
    far.offset_evaluator = [&](double x, double, double) { return folded(x, x - 1.0, 0.0); };
    far.right_exponent = std::max(-1.0 - P.ps, -g * (p - 1.0) - N - 1.0);
    double integral = quad::integrate_graded(near, 1.0, 2.0, tol) + quad::integrate_tail(far, 2.0, tol);
    const double F = ss.A * std::pow(r, g);
    const double L = std::pow(ss.A, p - 1.0) * std::pow(r, g) * integral;
    const double rhs = P.lambda * std::pow(F, p - 1.0) / std::pow(r, P.ps);
    return (ss.alpha_t * F + L - rhs) / (ss.alpha_t * F);
}

} // namespace frachardy
