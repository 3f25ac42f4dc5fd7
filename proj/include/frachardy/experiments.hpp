#pragma once

#include "frachardy/csv.hpp"
#include "frachardy/evolution.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace frachardy {

// Every runner takes λ from params and overrides config.lambda.

/// One pass/fail line: metric value against a tolerance.
struct Check {
    std::string metric;
    bool passed = false;
    double value = 0.0;
    double tolerance = 0.0;
};

/// Generic experiment output: checks for the summary plus the per-experiment table.
struct ExperimentReport {
    std::string experiment;
    std::vector<Check> checks;
    CsvTable table;
    /// "pass" when every check passes, "inconclusive" when flagged, otherwise "fail".
    std::string status() const;
    bool inconclusive = false;
};

const std::vector<std::string>& summary_schema();
std::vector<CsvRow> summary_rows(const ExperimentReport& report);
/// Writes `<dir>/<experiment>.csv` and returns its path.
std::string write_report(const ExperimentReport& report, const std::string& dir);

struct NamedProfile {
    std::string name;
    std::function<double(double)> f;
};
/// Battery of twelve radial profiles on (0, R], each vanishing at R.
std::vector<NamedProfile> profile_battery(double R);
/// Smooth radial bump (1 - (r/R)^2)^2 scaled by amp.
RadialFunction bump_profile(const RadialGrid& grid, double amp = 1.0);

// ---- extinction

struct ExtinctionFit {
    double T_ext = 0.0;
    double exponent = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int samples = 0;
};
/// Least-squares fit of log n = a + k log(T - t) with T free, over samples with n <= window * n0
/// (the window widens by decades until at least 8 samples are used).
ExtinctionFit fit_extinction(const std::vector<double>& t, const std::vector<double>& norm, double n0);

struct ExtinctionReport {
    Params params;
    bool detected = false;
    std::optional<double> T_ext;
    std::optional<double> fitted_exponent;
    double ci_low = 0.0, ci_high = 0.0;
    int fit_samples = 0;
    bool monotone_decay = false;
    /// 1 when 2N/(N+2s) <= p < 2 (L2 threshold), 2 below (L^{ν+1} threshold).
    int regime = 1;
    double threshold_ratio = 1e-8;
    /// ‖u0‖₂^{2-p} |Ω|^{p/2-1+ps/N}, reported beside the measured time.
    double reference_time = 0.0;
    std::vector<Diagnostics> rows;
    ExperimentReport report() const;
};
ExtinctionReport run_extinction(const Params& params, const RadialFunction& u0, const EvolutionConfig& config);

struct AmplitudeOutcome {
    double amplitude = 0.0;
    bool extinct = false;
    double time = 0.0;
};
/// Scales u0 by each amplitude and records which runs go extinct (no threshold is asserted).
std::vector<AmplitudeOutcome> extinction_amplitude_sweep(const Params& params, const RadialFunction& u0,
                                                         const EvolutionConfig& config,
                                                         const std::vector<double>& amplitudes);

// ---- blow-up

struct BlowupProbe {
    int node = 0; ///< 0-based node index; 0 is r_1
    double t0 = 0.5;
    double envelope_c = 1e-3;
    double envelope_radius = 0.1; ///< envelope tested at nodes r <= envelope_radius * R
};

struct BlowupReport {
    Params params;
    std::vector<double> n_levels;
    double r0 = 0.0, t0 = 0.0;
    std::vector<double> values; ///< +inf when the level blew up before t0
    std::vector<double> growth_ratio; ///< value / first value
    std::vector<bool> blew_up;
    bool monotone = false;
    double last_over_first = 0.0;
    double last_over_previous = 0.0;
    bool log_envelope_ok = false;
    bool blowup_flag = false;
    ExperimentReport report() const;
};
BlowupReport run_blowup(const Params& params, const RadialFunction& u0, const std::vector<double>& n_levels,
                        const BlowupProbe& probe, const EvolutionConfig& config);

// ---- self-similar supersolution

struct SupersolutionReport {
    Params params;
    double t0 = 0.0;
    double worst_ratio = 0.0; ///< max over nodes and sampled times of u / V
    std::vector<double> q_values;
    /// max over time of the q-seminorm / initial, divided by the envelope amplitude growth to the power q
    std::vector<double> q_growth;
    std::vector<std::array<double, 4>> samples; ///< t, worst ratio at t, q-seminorms
    ExperimentReport report() const;
};
/// Evolves min(V(t0), cap) with the exact potential; the step-control safety is capped at 0.05.
SupersolutionReport run_selfsim_supersolution(const Params& params, const RadialGrid& grid,
                                              const EvolutionConfig& config, double t0, double cap);

// ---- spaces

struct EquivalenceReport {
    double beta = 0.0;
    double alpha = 0.0;
    std::vector<std::string> names;
    std::vector<double> weighted, e_alpha; ///< norms (seminorm^{1/p}) on the base grid
    double ratio_min = 0.0, ratio_max = 0.0;
    double window = 0.0, window_refined = 0.0;
};
std::vector<EquivalenceReport> run_norm_equivalence(const Params& params, const std::vector<double>& betas,
                                                    const std::vector<NamedProfile>& profiles,
                                                    const RadialGrid& grid, const RadialGrid& refined);
ExperimentReport equivalence_report(const std::vector<EquivalenceReport>& reports);

struct DivergenceReport {
    double beta = 0.0;
    std::vector<double> radii;
    std::vector<double> values;
    /// Untruncated value when finite (beta > -ps), NaN otherwise.
    double untruncated = 0.0;
    double ps = 0.0;
    ExperimentReport report() const;
};
/// Weighted seminorm of the cut-off (1 on B_1, 0 outside B_4) with the outer integration truncated at each radius.
DivergenceReport run_degenerate_divergence(const Params& params, double beta, const std::vector<double>& radii,
                                           int M = 100);

struct ImprovedHardyReport {
    std::vector<double> q_list;
    std::vector<std::string> names;
    std::vector<double> remainder, energy; ///< ½[u]^p - Λ H(u) and ½[u]^p per profile
    std::vector<std::vector<double>> seminorm; ///< [q][profile]
    double min_relative_remainder = 0.0; ///< min over profiles of remainder / (½[u]^p)
    std::vector<double> min_ratio; ///< per q: min over profiles of remainder / seminorm
    ExperimentReport report() const;
};
ImprovedHardyReport run_improved_hardy(const Params& params, const std::vector<double>& q_list,
                                       const std::vector<NamedProfile>& profiles, const RadialGrid& grid);

// ---- evolution checks

struct GronwallReport {
    Params params;
    std::vector<double> t, lhs, rhs;
    std::vector<double> rhs_halved; ///< envelope with rate λp/2 and half the forcing (not checked)
    double margin = 0.0; ///< min over t of (rhs - lhs) / rhs
    ExperimentReport report() const;
};
GronwallReport run_global_gronwall(const Params& params, const RadialFunction& u0, const EvolutionConfig& config);

struct NoExtinctionReport {
    Params params;
    bool converged = false;
    double residual = 0.0;
    double min_value_after_check = 0.0;
    bool positive = false;
    bool l2_monotone = false;
    double t_check = 1.0;
    double t_final = 0.0;
    std::vector<Diagnostics> rows;
    ExperimentReport report() const;
};
NoExtinctionReport run_no_extinction(const Params& params, const RadialGrid& grid, const EvolutionConfig& config,
                                     double t_check = 1.0);

struct WeightedRegimeReport {
    Params params;
    double alpha = 0.0;
    std::vector<double> t, weighted_l2, e_alpha, max_u;
    /// Constant supersolution (max u0^{2-p} + (2-p) λ n t)^{1/(2-p)} for the truncation level n.
    std::vector<double> envelope;
    double growth = 0.0; ///< max over time of both norms relative to their initial values (reported only)
    double margin = 0.0; ///< min over time of 1 - max u / envelope and of the weighted L2 counterpart
    bool finite = false;
    ExperimentReport report() const;
};
/// Diagnostic for 2N/(N+s) <= p < 2, λ > Λ: regularized potential at fixed n (100 unless the config picks
/// a truncated kind), weighted norms over time against the constant supersolution.
WeightedRegimeReport run_weighted_regime(const Params& params, const RadialFunction& u0,
                                         const EvolutionConfig& config, double alpha);

} // namespace frachardy
