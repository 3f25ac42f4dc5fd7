#pragma once

#include "frachardy/evolution.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace frachardy {

/// Everything a command needs. λ is absolute (`lambda`) or a multiple of Λ (`lambda_factor`), never both.
struct RunConfig {
    int N = 3;
    double s = 0.5;
    double p = 1.5;
    double lambda = 0.0;
    std::optional<double> lambda_factor;

    double R = 1.0;
    int M = 100;
    double g = 3.0;

    Scheme scheme = Scheme::semi_implicit;
    double tau = 1e-4;
    double t_end = 1.0;
    PotentialKind potential = PotentialKind::exact;
    double n = 0.0;
    std::optional<double> source_q;
    double safety = 0.2;
    double inner_tol = 1e-10;
    double output_interval = 0.0;
    double amplitude = 1.0;

    // experiment knobs
    double t0 = 0.5;          ///< probe time for blowup, start time for selfsim
    double cap = 10.0;        ///< selfsim initial cap
    std::vector<double> levels{4, 8, 16, 32, 64};
    std::vector<double> betas{-0.3, 0.0, 0.2};
    std::vector<double> radii{10, 100, 1000};
    double alpha = 1.0;       ///< α for the sum/difference inequalities and the weighted regime
    long samples = 100000;
    int grid_size = 50;
    int psi_count = 10;
    double tolerance = 0.05;  ///< Picone tolerance

    std::string experiment;
    std::string out = ".";
    std::uint64_t seed = 20240611;

    Params params() const;
    EvolutionConfig evolution() const;
    RadialGrid grid() const;
};

/// `key = value` lines with `#` comments. Unknown or repeated keys and malformed values throw ParseError
/// naming the line; values that break a precondition throw ValidationError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Throws ValidationError with the violated precondition.
void validate(const RunConfig& config);

/// Key reference with defaults, for --help.
std::string config_help();

const std::vector<std::string>& command_names();

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;
inline constexpr int kExitUsage = 64;

/// Runs one command, writes `<out>/<command>.csv` (or the command's own files) and `<out>/summary.csv`,
/// and prints one line per check with its tolerance. Returns the exit code.
int run_command(const std::string& name, const RunConfig& config, std::ostream& out, std::ostream& err);

} // namespace frachardy
