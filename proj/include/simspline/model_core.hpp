#pragma once
// Penalized least-squares fit of the partially linear single-index model:
// alternating eigenbasis ridge solves, GCV tuning, and sphere-path index
// updates, with optional case weights for bootstrap refits.
#include "simspline/eigensystem.hpp"
#include "simspline/rng.hpp"
#include "simspline/types.hpp"
#include <functional>
#include <optional>
#include <vector>

namespace simspline {

struct FitConfig {
    int m = 3;
    int num_basis = 64;
    int v = 0;            // 0 = auto (five-fold CV over v_grid)
    double lambda = 0;    // 0 = select by GCV over the grid below
    int gcv_grid_size = 30;
    double gcv_lo = 1e-8, gcv_hi = 1.0;
    int max_outer_iter = 50;
    double tol = 1e-6;
    int n_init_directions = 100;  // C
    // number of alternating-scheme runs from the best-ranked initial
    // directions; the run with the smallest final GCV score wins
    int n_starts = 5;
    std::uint64_t seed = 0;
    std::vector<int> v_grid = {10, 15, 20, 30, 40};
    int density_grid = 256;

    std::vector<double> gcv_grid() const;  // log-spaced [gcv_lo, gcv_hi]
};

struct SingleIndexFit {
    Eigen::VectorXd a;      // eigenbasis coefficients of g-hat
    Eigen::VectorXd beta;   // unit vector, first nonzero component > 0
    Eigen::VectorXd gamma;  // linear coefficients
    double lambda = 0;
    EigenSystem eig;
    Interval interval;      // index range used (5% extended)
    std::vector<double> objective_trace;
    int n = 0;
    int iterations = 0;
    bool converged = false;
    double gcv = 0;         // GCV score at the selected lambda
    FitConfig config;

    // bias-adjusted coefficients a + M_lambda a
    Eigen::VectorXd a_tilde() const {
        return a + apply_m_lambda(a, lambda, eig.rho);
    }
};

struct Truth {
    std::function<double(double)> g0;
    Eigen::VectorXd beta0;
    Eigen::VectorXd gamma0;
};

// Step 1 of the alternating scheme: C random sphere directions, partially
// linear cubic-spline fit on each candidate index, minimum median |residual|.
Eigen::VectorXd initial_beta(const Dataset& data, const FitConfig& config,
                             Rng& rng,
                             const Eigen::VectorXd* weights = nullptr);

// the top-k candidate directions ranked by median absolute residual
std::vector<Eigen::VectorXd> initial_beta_candidates(
    const Dataset& data, const FitConfig& config, Rng& rng, int k,
    const Eigen::VectorXd* weights = nullptr);

// exact minimizer of the weighted penalized normal equations
// ([Phi,Z]' W [Phi,Z] + n lambda diag(rho,0))^{-1} [Phi,Z]' W y
struct RidgeSolution {
    Eigen::VectorXd a;
    Eigen::VectorXd gamma;
};
RidgeSolution solve_ridge(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& z,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          double lambda, const Eigen::VectorXd& rho);

// GCV(lambda) = n^{-1} ||y - yhat||^2 / (1 - tr(H)/n)^2 with the raw ridge
// fitted values; +inf when tr(H)/n >= 1.
double gcv_score(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& z,
                 const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 double lambda, const Eigen::VectorXd& rho);

// gradient of the mean weighted squared residual with respect to beta,
// using the bias-adjusted link derivative
Eigen::VectorXd grad_beta(const Dataset& data, const SingleIndexFit& fit,
                          const Eigen::VectorXd& w);

// curvilinear path on the unit sphere from beta in direction -b
Eigen::VectorXd beta_path(const Eigen::VectorXd& beta, const Eigen::VectorXd& b,
                          double tau);
std::pair<double, double> tau_bounds(const Eigen::VectorXd& beta,
                                     const Eigen::VectorXd& b);

// sign-fix into the identifiability set: first nonzero component positive
void normalize_direction(Eigen::VectorXd& beta);

SingleIndexFit fit(const Dataset& data, const FitConfig& config,
                   const Eigen::VectorXd* weights = nullptr,
                   const Eigen::VectorXd* beta_start = nullptr);

// g-tilde(s) = sum_j atilde_j phi_j(s), clamped to the fit interval
Eigen::VectorXd predict_g(const SingleIndexFit& fit,
                          const Eigen::VectorXd& s_points);
Eigen::VectorXd predict(const SingleIndexFit& fit, const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& z);

// sqrt of: integral of (gtilde - g0)^2 over the fit interval (256-point
// trapezoid) + ||beta - beta0||^2 + ||gamma - gamma0||^2
double l2_risk(const SingleIndexFit& fit, const Truth& truth);

// same risk with the link integral restricted to domain (intersected with
// the fit interval); used by the simulation harness, where the truth link
// only lives on the range the true index actually visited
double l2_risk_on(const SingleIndexFit& fit, const Truth& truth,
                  Interval domain);

} // namespace simspline
