#pragma once
// Data-adaptive eigenbasis: simultaneous diagonalization of the weighted L2
// form V(g,h) = \int g h w and the roughness penalty J(g,h) = \int g^(m) h^(m)
// over a compact interval.  Realized as the generalized symmetric-definite
// pencil J_B c = rho V_B c in a B-spline basis.
#include "simspline/bspline.hpp"
#include "simspline/types.hpp"
#include <Eigen/Dense>
#include <functional>

namespace simspline {

struct DensityEstimate {
    Interval interval;
    Eigen::VectorXd grid;    // equispaced
    Eigen::VectorXd values;  // floored, renormalized
    double floor = 0;
    double bandwidth = 0;
    double operator()(double s) const;  // linear interpolation, clamped
};

// Gaussian-kernel density with Silverman bandwidth 1.06 sd n^{-1/5},
// floored at 1e-3 of its max and renormalized to integrate to one.
DensityEstimate estimate_density(const Eigen::VectorXd& samples,
                                 Interval interval, int grid_size = 256);

struct EigenSystem {
    Interval interval;
    int m = 3;        // penalty order
    int v = 0;        // number of retained eigenpairs
    Eigen::VectorXd grid;     // quadrature nodes
    Eigen::VectorXd qweight;  // quadrature weights
    Eigen::VectorXd weight;   // w(s) at the nodes
    Eigen::VectorXd rho;      // ascending, >= 0, length v
    Eigen::MatrixXd phi;      // v x G values at nodes
    Eigen::MatrixXd dphi;     // v x G first derivatives at nodes
    BSplineBasis basis;
    Eigen::MatrixXd coef;     // num_basis x v spline coefficients

    // phi values (deriv = 0) or derivatives at arbitrary points, v x P
    Eigen::MatrixXd eval(const Eigen::VectorXd& points, int deriv = 0) const;
    // n x v design matrix of phi values (transposed convenience form)
    Eigen::MatrixXd design(const Eigen::VectorXd& points) const {
        return eval(points, 0).transpose();
    }
};

// sigma0sq: working variance weight (the form's w is sigma0sq * density);
// pass {} for the homoscedastic default sigma0^2 = 1.
EigenSystem build_eigensystem(const DensityEstimate& density,
                              const std::function<double(double)>& sigma0sq,
                              int m, int num_basis, int num_eigen);

// convenience overload with an arbitrary weight function (used by tests)
EigenSystem build_eigensystem_w(Interval interval,
                                const std::function<double(double)>& w, int m,
                                int num_basis, int num_eigen);

struct KernelHandle {
    const EigenSystem* eig;
    double lambda;
};

double kernel_eval(const KernelHandle& k, double s, double t);

// component-wise a_j * lambda rho_j / (1 + lambda rho_j)
Eigen::VectorXd apply_m_lambda(const Eigen::VectorXd& a, double lambda,
                               const Eigen::VectorXd& rho);

} // namespace simspline
