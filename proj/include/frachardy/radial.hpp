#pragma once

#include "frachardy/kernel_constants.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace frachardy {

/// Nodes r_j = R (j/M)^g, j = 1..M, stored 0-based.
struct RadialGrid {
    double R = 1.0;
    int M = 0;
    double g = 1.0;
    std::vector<double> r;

    /// Width of cell c: cell 0 is (0, r_1], cell c >= 1 is [r_c, r_{c+1}] (1-based names).
    double width(int c) const { return c == 0 ? r[0] : r[c] - r[c - 1]; }
};

RadialGrid build_grid(double R, int M, double g = 3.0);

/// Piecewise-linear profile: constant v[0] on (0, r_1], linear in between, zero beyond R.
struct RadialFunction {
    RadialGrid grid;
    std::vector<double> v;
};

RadialFunction make_profile(const RadialGrid& grid, const std::function<double(double)>& f);
double eval_at(const RadialFunction& u, double r);

enum class Domain {
    complement_excluded, ///< R^{2N} minus (CΩ x CΩ); the default
    whole_space,         ///< adds the CΩ x CΩ block explicitly
    omega_only           ///< Ω x Ω only
};

struct FormSpec {
    double q = 2.0;
    double mu = 3.0;
    double beta = 0.0;
    Domain domain = Domain::complement_excluded;
    double outer_radius = std::numeric_limits<double>::infinity();
    int resolution = 1; ///< quadrature refinement level (1 = default, 2 = twice the points)
};

/// One quadrature term: weight * |sum_k c[k] v[idx[k]]|^q; index M refers to a zero slot.
struct PairTerm {
    std::array<std::int32_t, 4> idx;
    std::array<double, 4> c;
    double w;
};

/// Precomputed discretization of the radial Gagliardo integral
/// ∬ |u(x)-u(y)|^q |x|^{-beta} |y|^{-beta} / |x-y|^mu dx dy for profiles on a fixed grid.
class GagliardoForm {
public:
    GagliardoForm(const Params& params, const RadialGrid& grid, const FormSpec& spec);

    double value(const std::vector<double>& v) const;
    /// d value / d v_j for all j.
    std::vector<double> gradient(const std::vector<double>& v) const;
    /// Frozen-coefficient matrix: sum_t w_t W_t g_t g_t^T with W_t = (D_t^2 + eps^2)^{(q-2)/2},
    /// stored dense row-major M x M. Then v^T A v approximates value(v) when frozen at v.
    void frozen_matrix(const std::vector<double>& v, double eps, std::vector<double>& A) const;
    /// Diagonal of the frozen matrix.
    std::vector<double> frozen_diagonal(const std::vector<double>& v, double eps) const;

    const FormSpec& spec() const { return spec_; }
    const RadialGrid& grid() const { return grid_; }
    std::size_t term_count() const { return terms_.size(); }
    const std::vector<PairTerm>& terms() const { return terms_; }

private:
    Params params_;
    RadialGrid grid_;
    FormSpec spec_;
    std::vector<PairTerm> terms_;
    std::vector<PairTerm> exterior_terms_;
    bool boundary_zero_required_ = false;

    void build();
    std::vector<double> extended(const std::vector<double>& v) const;
};

/// Shared cache of forms keyed by grid and spec.
std::shared_ptr<const GagliardoForm> gagliardo_form(const Params& params, const RadialGrid& grid,
                                                    const FormSpec& spec);

/// Lumped masses m_j = ω_N ∫ φ_j r^{N-1} dr of the hat basis.
std::vector<double> lumped_mass(const Params& params, const RadialGrid& grid);

/// Discrete operator at node j: <op(u), φ_j> / m_j with the weak form of the operator.
double nonlocal_op(const Params& params, const RadialFunction& u, int j);
std::vector<double> nonlocal_op_all(const Params& params, const RadialFunction& u);
/// <op(u), φ_j> for all j (no mass division).
std::vector<double> nonlocal_op_weak(const Params& params, const RadialFunction& u);

/// Principal-value operator at an arbitrary radius r (finite off the grid nodes).
double nonlocal_op_pointwise(const Params& params, const RadialFunction& u, double r);

double seminorm_general(const Params& params, const RadialFunction& u, double q, double mu, double beta,
                        Domain domain = Domain::complement_excluded,
                        double outer_radius = std::numeric_limits<double>::infinity());
double seminorm_p(const Params& params, const RadialFunction& u);
double e_alpha_seminorm(const Params& params, const RadialFunction& u, double alpha);
double hardy_term(const Params& params, const RadialFunction& u, double power);
/// ω_N ∫ |u|^power r^{N-1} dr.
double lebesgue_norm_power(const Params& params, const RadialFunction& u, double power);
double rayleigh_quotient(const Params& params, const RadialFunction& u);

struct RayleighResult {
    double value = 0.0;
    RadialFunction u;
    std::vector<double> history;
};
RayleighResult minimize_rayleigh(const Params& params, const RadialGrid& grid, int iterations,
                                 std::uint64_t seed);

void write_profile_csv(const RadialFunction& u, const std::string& path);

} // namespace frachardy
