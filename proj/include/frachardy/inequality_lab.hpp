#pragma once

#include "frachardy/csv.hpp"
#include "frachardy/evolution.hpp"
#include "frachardy/experiments.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace frachardy {

inline constexpr std::uint64_t kDefaultSeed = 20240611;

/// Sample count and violations for one family of test points.
struct FamilyCount {
    std::string family;
    long samples = 0;
    long violations = 0;
};

/// Outcome of checking one inequality at fixed constants.
/// Margins are (larger side - smaller side) / max(|sides|); a sample violates when its margin is below
/// -1e-12 (rounding), or below the stated tolerance for the Picone check. Samples where both sides vanish
/// are counted but leave the worst margin alone.
struct InequalityReport {
    std::string lemma;
    double p = 0.0;
    double alpha = 0.0; ///< NaN when the inequality has no α
    double C1 = 0.0;
    double C2 = 0.0;    ///< NaN when there is a single constant
    long samples = 0;
    long violations = 0;
    double worst_margin = 0.0;
    std::uint64_t seed = 0;
    std::vector<FamilyCount> families;
    bool passed() const { return violations == 0; }
};

const std::vector<std::string>& inequality_schema();
CsvRow inequality_row(const InequalityReport& report);
void write_inequality_csv(const std::vector<InequalityReport>& reports, const std::string& path);

// ---- sum and difference inequalities with exponent α

struct AlggConstants {
    double p = 0.0, alpha = 0.0;
    /// (a+b)^α <= c1 a^α + c2 b^α (c1 = c2 by symmetry)
    double c1 = 0.0, c2 = 0.0;
    /// Φ_p(a-b)(a^α - b^α) >= c3 |a^m - b^m|^p with m = (p+α-1)/p
    double c3 = 0.0;
    /// |a+b|^{α-1} |a-b|^p <= c4 |a^m - b^m|^p, only for α >= 1 (NaN otherwise)
    double c4 = 0.0;
    /// extremal ratios on the grid before the 5% safety factor
    double raw_c12 = 0.0, raw_c3 = 0.0, raw_c4 = 0.0;
    int grid_size = 0;
};

/// Extremal ratios over b = 1 and a log-spaced on [1e-3, 1e3] (all three are homogeneous), times 1.05
/// (divided for the lower bound c3).
AlggConstants search_constants_algg(double p, double alpha, int grid_size);
/// Re-checks the constants on a grid of the given size over the same range; one report per inequality.
std::vector<InequalityReport> check_algg(const AlggConstants& constants, int grid_size);

// ---- product inequality with two constants

struct Alge4Sides {
    double lhs = 0.0;
    double rhs = 0.0;
};
/// Φ_p(a1-a2)(a1 b1 - a2 b2) and C1|a1 b1^{1/p} - a2 b2^{1/p}|^p - C2 max(|a1|,|a2|)^p |b1^{1/p} - b2^{1/p}|^p.
Alge4Sides alge4_sides(double p, double a1, double a2, double b1, double b2, double C1, double C2);

/// Random tuples (a in [-10, 10], b in [0, 10], mt19937_64 with `seed`) plus the structured families:
/// a1 > a2 >= 0 on δ = a2/a1 and θ = (b2/b1)^{1/p} grids covering every sub-case, sign flips, swapped
/// indices, mixed signs, and the a = 0 and b = 0 edges.
InequalityReport check_alge4(double p, long samples, double C1, double C2, std::uint64_t seed = kDefaultSeed);

enum class Alge4Recipe {
    stated,   ///< C2 = max{1, C1 (1+1/ε)^{p-1}}
    corrected ///< C2 = max{1 + C1, C1 (1+1/ε)^{p-1}}, what the θ < δ branch of the case split needs
};

struct Alge4Constants {
    double C1 = 0.0, C2 = 0.0;
    double epsilon = 0.0;
    int shrinks = 0; ///< number of 5% reductions of C1 before validation passed
    Alge4Recipe recipe = Alge4Recipe::stated;
    /// violations of the stated recipe after its last reduction (0 when it validated)
    long stated_violations = 0;
    InequalityReport validation;
};
/// C1 = (1+ε)^{1-p} and C2 from the recipe, maximizing C1/C2 over grid_size values of ε in [0.1, 5];
/// validated with check_alge4, shrinking C1 by 5% up to 20 times. The stated recipe is tried first and the
/// corrected one only when it fails. Throws SearchFailure when both fail.
Alge4Constants search_constants_alge4(double p, int grid_size, long samples = 100000,
                                      std::uint64_t seed = kDefaultSeed);

// ---- discrete Picone inequality

struct PiconeReport {
    InequalityReport summary;
    RadialFunction w;
    std::vector<double> op_w; ///< op(w) at the nodes
    std::vector<std::string> names;
    std::vector<double> energy;   ///< ½[ψ]^p
    std::vector<double> weighted; ///< Σ m_j op(w)_j |ψ_j|^p / w_j^{p-1}
};

/// Builds w > 0 with op(w) = source (zero outside the ball) by pseudo-time stepping to a stationary state,
/// then checks ½[ψ]^p >= (1 - tolerance) ∫ op(w) |ψ|^p / w^{p-1} for every ψ.
/// Throws OracleUnavailable when the iteration does not settle or op(w) < -1e-6 max|op(w)| somewhere.
PiconeReport check_picone(const Params& params, const RadialFunction& source, const std::vector<NamedProfile>& psi_list,
                          double tolerance = 0.05, double t_end = 1e4);

/// Sums of one to three random hats inside (0, 0.9R), with random signs.
std::vector<NamedProfile> random_test_functions(double R, int count, std::uint64_t seed = kDefaultSeed);

} // namespace frachardy
