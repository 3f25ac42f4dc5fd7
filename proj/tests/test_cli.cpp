#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "frachardy/cli_io.hpp"
#include "frachardy/csv.hpp"
#include "frachardy/errors.hpp"
#include "frachardy/kernel_constants.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace frachardy;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string message_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("config parsing") {
    auto c = parse_config("N = 3\ns = 0.5\np = 1.5\nlambda = 0.1");
    CHECK(c.N == 3);
    CHECK(c.p == 1.5);
    CHECK(c.lambda == 0.1);
    CHECK(c.M == 100);
    CHECK(c.scheme == Scheme::semi_implicit);
    CHECK(c.params().lambda == 0.1);

    auto d = parse_config("# comment only\n\n  p = 1.6   # trailing\nlambda_factor = 0.5\nlevels = 4, 8,16\n"
                          "potential = regularized\nn = 100\nsource_q = 0.3\nseed = 7\n");
    CHECK(d.p == 1.6);
    CHECK(d.levels == std::vector<double>{4, 8, 16});
    CHECK(d.seed == 7);
    CHECK(d.params().lambda == doctest::Approx(0.5 * hardy_constant(Params::make(3, 0.5, 1.6))));
    CHECK(d.evolution().potential.kind == PotentialKind::regularized);
    CHECK(d.evolution().source_q.value() == 0.3);

    CHECK_THROWS_AS(parse_config("p = 1.5\np = 1.6"), ParseError);
    CHECK(message_of("p = 1.5\np = 1.6").find("line 2") != std::string::npos);
    CHECK_THROWS_AS(parse_config("N = 3\nfoo = 1"), ParseError);
    CHECK(message_of("N = 3\nfoo = 1").find("line 2") != std::string::npos);
    CHECK_THROWS_AS(parse_config("p 1.5"), ParseError);
    CHECK_THROWS_AS(parse_config("p = abc"), ParseError);
    CHECK_THROWS_AS(parse_config("M = 10.5"), ParseError);
    CHECK_THROWS_AS(parse_config("scheme = rk4"), ParseError);
    CHECK_THROWS_AS(parse_config("p ="), ParseError);

    CHECK_THROWS_AS(parse_config("p = 7"), ValidationError);
    CHECK(message_of("p = 7").find("p < N/s = 6") != std::string::npos);
    CHECK_THROWS_AS(parse_config("s = 1.2"), ValidationError);
    CHECK_THROWS_AS(parse_config("lambda = 0.1\nlambda_factor = 0.5"), ValidationError);
    CHECK_THROWS_AS(parse_config("potential = minimum"), ValidationError);
    CHECK_THROWS_AS(parse_config("tau = 0"), ValidationError);
    CHECK(config_help().find("lambda_factor") != std::string::npos);
}

TEST_CASE("csv writer contract") {
    TempDir dir("frachardy_csv_test");
    fs::create_directories(dir.path);
    auto path = (dir.path / "t.csv").string();
    write_csv({}, {"a", "b"}, path);
    CHECK(slurp(path) == "a,b\n");
    write_csv({{"0.10000000000000001", "x"}, {format_number(1.0 / 3.0), "y"}}, {"a", "b"}, path);
    auto t = read_csv(path);
    REQUIRE(t.rows.size() == 2);
    CHECK(std::stod(t.rows[1][0]) == 1.0 / 3.0);
    CHECK(t.rows[0][1] == "x");
    fs::remove(path);
    CHECK_THROWS_AS(write_csv({{"1"}}, {"a", "b"}, path), SchemaError);
    CHECK_FALSE(fs::exists(path));
    CHECK_THROWS_AS(write_csv({{"1"}}, {"a"}, (dir.path / "missing" / "t.csv").string()), IoError);
}

TEST_CASE("constants command") {
    TempDir dir("frachardy_cli_constants");
    auto c = parse_config("N = 3\ns = 0.5\np = 1.5\nlambda = 0.1");
    c.out = dir.path.string();
    std::ostringstream out, err;
    CHECK(run_command("constants", c, out, err) == kExitPass);
    auto t = read_csv((dir.path / "constants.csv").string());
    CHECK(t.schema == std::vector<std::string>{"quantity", "value", "tol"});
    std::vector<std::string> q;
    for (const auto& r : t.rows) q.push_back(r[0]);
    for (std::string want : {"Lambda", "Theta_at_etamax", "eta1", "eta2", "B"})
        CHECK(std::find(q.begin(), q.end(), want) != q.end());
    CHECK(fs::exists(dir.path / "summary.csv"));
    // every printed check carries its tolerance
    std::istringstream lines(out.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        ++n;
        CHECK(line.find("(tol ") != std::string::npos);
    }
    CHECK(n >= 3);
}

TEST_CASE("exit codes") {
    TempDir dir("frachardy_cli_exit");
    std::ostringstream out, err;
    auto c = parse_config("p = 2.5\nM = 16\ng = 1\nt0 = 0.2\nlambda_factor = 0.5");
    c.out = dir.path.string();
    CHECK(run_command("frobnicate", c, out, err) == kExitUsage);
    CHECK(err.str().find("constants") != std::string::npos);
    // λ < Λ: the negative control passes with no blow-up flag
    CHECK(run_command("blowup", c, out, err) == kExitPass);
    auto t = read_csv((dir.path / "summary.csv").string());
    REQUIRE(!t.rows.empty());
    CHECK(t.rows[0][2] == "no_blowup_flag");
    // at this coarse resolution λ = 2Λ grows too little by t0, a failed check
    auto blow = parse_config("p = 2.5\nM = 16\ng = 1\nt0 = 0.2\nlambda_factor = 2");
    blow.out = dir.path.string();
    CHECK(run_command("blowup", blow, out, err) == kExitCheckFailed);
    // the self-similar profile does not exist for p >= 2: an error, not a failed check
    CHECK(run_command("selfsim", c, out, err) == kExitError);
    auto q = parse_config("p = 1.5\nM = 10");
    q.out = dir.path.string();
    CHECK(run_command("noextinction", q, out, err) == kExitError);
    CHECK(err.str().find("source_q") != std::string::npos);
}

TEST_CASE("identical config and seed give identical files") {
    TempDir a("frachardy_cli_det_a"), b("frachardy_cli_det_b"), s("frachardy_cli_det_s");
    auto c = parse_config("p = 1.5\nalpha = 2\nsamples = 2000\ngrid_size = 20\nM = 20\nt_end = 1e4");
    std::ostringstream out, err;
    for (std::string cmd : {"inequalities", "picone", "constants"}) {
        CAPTURE(cmd);
        c.out = a.path.string();
        CHECK(run_command(cmd, c, out, err) == kExitPass);
        c.out = b.path.string();
        CHECK(run_command(cmd, c, out, err) == kExitPass);
        CHECK(slurp(a.path / (cmd + ".csv")) == slurp(b.path / (cmd + ".csv")));
        CHECK(slurp(a.path / "summary.csv") == slurp(b.path / "summary.csv"));
    }
    // the seed reaches the random families
    c.seed = 1;
    c.out = s.path.string();
    CHECK(run_command("picone", c, out, err) == kExitPass);
    CHECK(slurp(a.path / "picone.csv") != slurp(s.path / "picone.csv"));
}
