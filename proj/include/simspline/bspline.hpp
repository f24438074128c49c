#pragma once
// B-spline basis on a clamped knot vector, with derivatives.
#include <Eigen/Dense>
#include <vector>

namespace simspline {

// Clamped knot vector with equispaced interior knots on [lo, hi].
// num_basis = number of basis functions, degree = polynomial degree.
struct BSplineBasis {
    std::vector<double> knots;
    int degree = 3;
    int num_basis = 0;
    double lo = 0, hi = 1;

    BSplineBasis() = default;
    BSplineBasis(double lo_, double hi_, int num_basis_, int degree_);
    static BSplineBasis from_knots(std::vector<double> interior, double lo,
                                   double hi, int degree);

    // index of the knot span containing x (clamped to the valid range)
    int find_span(double x) const;

    // values of the (degree+1) basis functions that are nonzero at x, for
    // derivative orders 0..nderiv; out(d, j) is the d-th derivative of basis
    // function (span - degree + j).  Standard triangular-table algorithm.
    void ders_at(double x, int nderiv, int span, Eigen::MatrixXd& out) const;

    // dense row of all basis values (or d-th derivatives) at each point
    Eigen::MatrixXd design(const Eigen::VectorXd& x, int deriv = 0) const;

    // evaluate a spline sum_j coef[j] * B_j at x (derivative order d)
    double eval(const Eigen::VectorXd& coef, double x, int d = 0) const;
};

} // namespace simspline
