#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "frachardy/errors.hpp"
#include "frachardy/quad.hpp"

#include <cmath>
#include <random>

using namespace frachardy;
using quad::SingularIntegrand;

namespace {

SingularIntegrand power(double e) {
    return {[e](double x) { return std::pow(x, e); }, e, 0.0};
}

// Beta(a,b) by splitting at 1/2 and substituting x = t^{1/a}, 1-x = t^{1/b}, which removes
// both endpoint singularities; plain Gauss on many cells is then enough.
double beta_reference(double a, double b) {
    const auto& rule = quad::gauss_legendre(20);
    auto smooth = [&](double alpha, double other, double upper) {
        // int_0^upper x^{alpha-1} (1-x)^{other-1} dx with x = t^{1/alpha}
        double T = std::pow(upper, alpha);
        double sum = 0.0;
        const int cells = 400;
        for (int c = 0; c < cells; ++c) {
            double lo = T * c / cells, hi = T * (c + 1) / cells;
            for (std::size_t k = 0; k < rule.x.size(); ++k) {
                double t = lo + 0.5 * (hi - lo) * (rule.x[k] + 1.0);
                double x = std::pow(t, 1.0 / alpha);
                sum += 0.5 * (hi - lo) * rule.w[k] * std::pow(1.0 - x, other - 1.0) / alpha;
            }
        }
        return sum;
    };
    return smooth(a, b, 0.5) + smooth(b, a, 0.5);
}

} // namespace

TEST_CASE("graded quadrature examples") {
    CHECK(quad::integrate_graded(power(-0.5), 0.0, 1.0, 1e-10) == doctest::Approx(2.0).epsilon(1e-10));
    SingularIntegrand one{[](double) { return 1.0; }, 0.0, 0.0};
    CHECK(quad::integrate_graded(one, 0.0, 1.0, 1e-12) == doctest::Approx(1.0).epsilon(1e-14));

    SingularIntegrand beta;
    beta.left_exponent = -0.3;
    beta.right_exponent = -0.6;
    beta.offset_evaluator = [](double, double dl, double dr) { return std::pow(dl, -0.3) * std::pow(dr, -0.6); };
    double ref = beta_reference(0.7, 0.4);
    CHECK(ref == doctest::Approx(std::beta(0.7, 0.4)).epsilon(1e-12));
    CHECK(quad::integrate_graded(beta, 0.0, 1.0, 1e-12) == doctest::Approx(ref).epsilon(1e-11));
}

TEST_CASE("tail quadrature examples") {
    SingularIntegrand f2{[](double x) { return 1.0 / (x * x); }, 0.0, -2.0};
    CHECK(quad::integrate_tail(f2, 1.0, 1e-12) == doctest::Approx(1.0).epsilon(1e-12));
    SingularIntegrand f3{[](double x) { return 1.0 / (x * x * x); }, 0.0, -3.0};
    CHECK(quad::integrate_tail(f3, 2.0, 1e-12) == doctest::Approx(0.125).epsilon(1e-12));
    const double mu = 3.0 + 1.5 * 0.5;
    SingularIntegrand fk{[mu](double x) { return std::pow(x, -mu); }, 0.0, -mu};
    CHECK(quad::integrate_tail(fk, 1.0, 1e-12) == doctest::Approx(1.0 / 2.75).epsilon(1e-11));
}

TEST_CASE("rejects divergent declarations") {
    CHECK_THROWS_AS(quad::integrate_graded(power(-1.0), 0.0, 1.0, 1e-8), DivergentIntegrand);
    SingularIntegrand slow{[](double x) { return 1.0 / x; }, 0.0, -1.0};
    CHECK_THROWS_AS(quad::integrate_tail(slow, 1.0, 1e-8), DivergentIntegrand);
}

TEST_CASE("linearity on random members of the class") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ue(-0.8, 2.0), uc(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        double e1 = ue(rng), e2 = ue(rng), a = uc(rng), b = uc(rng);
        double el = std::min(e1, e2);
        SingularIntegrand f{[e1](double x) { return std::pow(x, e1) * std::cos(x); }, e1, 0.0};
        SingularIntegrand g{[e2](double x) { return std::pow(x, e2) * std::exp(-x); }, e2, 0.0};
        SingularIntegrand h{[&](double x) { return a * f.evaluator(x) + b * g.evaluator(x); }, el, 0.0};
        const double tol = 1e-10;
        double lhs = quad::integrate_graded(h, 0.0, 2.0, tol);
        double fi = quad::integrate_graded(f, 0.0, 2.0, tol);
        double gi = quad::integrate_graded(g, 0.0, 2.0, tol);
        double scale = std::abs(a * fi) + std::abs(b * gi);
        CHECK(std::abs(lhs - (a * fi + b * gi)) <= 2.0 * tol * scale + 1e-15);
    }
}

TEST_CASE("halving tol never moves away from a finer reference") {
    SingularIntegrand f{[](double x) { return std::pow(x, -0.7) * std::log1p(x) + std::pow(1.0 - x, 0.3); },
                        -0.7, 0.3};
    double ref = quad::integrate_graded(f, 0.0, 1.0, 1e-14);
    double prev = 1e300;
    for (double tol = 1e-4; tol >= 1e-12; tol *= 0.5) {
        double dev = std::abs(quad::integrate_graded(f, 0.0, 1.0, tol) - ref);
        CHECK(dev <= prev + 1e-15);
        prev = dev;
    }
}

TEST_CASE("exact on polynomials up to degree 29") {
    for (int deg = 0; deg <= 29; ++deg) {
        SingularIntegrand f{[deg](double x) { return std::pow(x, deg); }, 0.0, 0.0};
        CHECK(quad::integrate_graded(f, 0.0, 1.0, 1e-12) == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-13));
    }
}
