#pragma once

#include <functional>
#include <vector>

namespace frachardy::quad {

/// Integrand with declared algebraic behaviour at the endpoints.
/// On a finite interval f ~ (x-a)^left_exponent and f ~ (b-x)^right_exponent.
/// On [a, inf) right_exponent is the decay exponent, f ~ x^right_exponent.
struct SingularIntegrand {
    std::function<double(double)> evaluator;
    double left_exponent = 0.0;
    double right_exponent = 0.0;
    /// Optional form receiving the exact distances to the left and right endpoints
    /// (x - a and b - x, infinity for an infinite end); used instead of `evaluator` when set.
    std::function<double(double, double, double)> offset_evaluator;
};

constexpr int kRuleOrder = 15;
constexpr int kDefaultMaxDepth = 30;

double integrate_graded(const SingularIntegrand& f, double a, double b, double tol,
                        int max_depth = kDefaultMaxDepth);

double integrate_tail(const SingularIntegrand& f, double a, double tol,
                      int max_depth = kDefaultMaxDepth);

/// Gauss-Legendre rule of n points on [-1, 1].
struct Rule {
    std::vector<double> x;
    std::vector<double> w;
};
const Rule& gauss_legendre(int n);

/// Grading exponent used for an endpoint with the given algebraic exponent.
double grading_exponent(double e);

/// Fixed composite rule on [a, b] with m cells per half, each half graded toward its
/// endpoint, n Gauss points per cell. Nodes that round onto an endpoint are dropped.
void graded_rule(double a, double b, double e_left, double e_right, int m, int n,
                 std::vector<double>& x, std::vector<double>& w);

/// Same rule with the exact endpoint distances of each node.
struct GradedNodes {
    std::vector<double> x, w, from_left, from_right;
};
GradedNodes graded_nodes(double a, double b, double e_left, double e_right, int m, int n);

/// Fixed rule with a geometric mesh (ratio 1/4) toward each endpoint whose exponent is not a
/// nonnegative integer. Layers continue until the neglected endpoint mass is about `tol`; the
/// Gauss order per layer drops from n as the layers shrink. Smooth halves get two n-point cells.
GradedNodes geometric_nodes(double a, double b, double e_left, double e_right, int n, double tol = 1e-8);

} // namespace frachardy::quad
