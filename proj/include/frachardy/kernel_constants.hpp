#pragma once

#include <cstdint>
#include <mutex>
#include <unordered_map>
#include <utility>

namespace frachardy {

struct Tolerances {
    double kernel = 1e-10;
    double constants = 1e-8;
};

/// Dimension and exponent data of the problem plus derived thresholds.
struct Params {
    int N = 3;
    double s = 0.5;
    double p = 1.5;
    double lambda = 0.0;
    Tolerances tol{};

    // derived
    double ps = 0.0;
    double p_star = 0.0;
    double gamma_ss = 0.0; ///< -ps/(2-p), zero when p == 2
    double gamma_bar = 0.0; ///< ps/(2-p), zero unless p < 2
    double eta_max = 0.0;
    double p_crit_low = 0.0;
    double p_crit_mid = 0.0;
    double p2 = 0.0;
    double omega_N = 0.0;

    /// Throws InvalidParams naming the violated condition.
    static Params make(int N, double s, double p, double lambda = 0.0, Tolerances tol = {});
    Params with_lambda(double lam) const;
    double mu() const { return N + ps; }
};

double sphere_area(int N);

/// Angular kernel K(sigma) for exponent mu.
double kernel_K(const Params& params, double mu, double sigma);
double kernel_K(int N, double mu, double sigma, double tol = 1e-10);
/// Variant taking the exact distance d = |1 - sigma| (avoids cancellation near sigma = 1).
double kernel_K_near(int N, double mu, double sigma, double d, double tol = 1e-10);

/// Memoized K for fixed (N, mu). Safe for concurrent use.
class KernelTable {
public:
    KernelTable(const Params& params, double mu);
    double operator()(double sigma) const;
    double at(double sigma, double dist_to_one) const;
    double mu() const { return mu_; }
    const Params& params() const { return params_; }
    std::size_t size() const;
    /// Largest relative deviation from K(1/x) = x^mu K(x) over cached pairs with a cached partner
    /// or, if none pair up, recomputed partners.
    double symmetry_defect() const;

private:
    Params params_;
    double mu_;
    mutable std::mutex mtx_;
    struct Entry {
        double sigma, dist, value;
    };
    mutable std::unordered_map<std::uint64_t, Entry> cache_;
};

double hardy_constant(const Params& params);
double theta(const Params& params, double eta);
double theta(const KernelTable& K, double eta, double tol);
std::pair<double, double> theta_roots(const Params& params);
double psi1(const Params& params);
double upsilon(const Params& params, double beta, double gamma);

struct SelfSimilar {
    Params params;
    double gamma = 0.0;
    double alpha_t = 0.0;
    double psi1 = 0.0;
    double B = 0.0;
    double A = 0.0;
};

SelfSimilar selfsim_build(const Params& params);
double selfsim_value(const SelfSimilar& ss, double r, double t);
/// Relative residual of the profile equation at radius r.
double selfsim_residual(const SelfSimilar& ss, double r);

} // namespace frachardy
