#include "simspline/eigensystem.hpp"
#include <cmath>
#include <numbers>

namespace simspline {

namespace {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x(i) = t;
        w(i) = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

} // namespace

double DensityEstimate::operator()(double s) const {
    const int G = (int)grid.size();
    if (s <= grid(0)) return values(0);
    if (s >= grid(G - 1)) return values(G - 1);
    double step = (grid(G - 1) - grid(0)) / (G - 1);
    int i = std::min((int)((s - grid(0)) / step), G - 2);
    double t = (s - grid(i)) / step;
    return (1 - t) * values(i) + t * values(i + 1);
}

DensityEstimate estimate_density(const Eigen::VectorXd& samples,
                                 Interval interval, int grid_size) {
    const int n = (int)samples.size();
    if (n < 2) throw NumericalError("density: need at least 2 samples");
    double mean = samples.mean();
    double sd = std::sqrt((samples.array() - mean).square().sum() / n);
    if (sd <= 0) throw NumericalError("density: degenerate sample");
    double h = 1.06 * sd * std::pow((double)n, -0.2);

    DensityEstimate d;
    d.interval = interval;
    d.bandwidth = h;
    d.grid = Eigen::VectorXd::LinSpaced(grid_size, interval.lo, interval.hi);
    d.values.resize(grid_size);
    const double c = 1.0 / (n * h * std::sqrt(2 * std::numbers::pi));
    for (int g = 0; g < grid_size; ++g) {
        double s = 0;
        for (int i = 0; i < n; ++i) {
            double u = (d.grid(g) - samples(i)) / h;
            s += std::exp(-0.5 * u * u);
        }
        d.values(g) = c * s;
    }
    d.floor = 1e-3 * d.values.maxCoeff();
    d.values = d.values.cwiseMax(d.floor);
    // renormalize (trapezoid)
    double step = (interval.hi - interval.lo) / (grid_size - 1);
    double integral =
        step * (d.values.sum() - 0.5 * (d.values(0) + d.values(grid_size - 1)));
    d.values /= integral;
    d.floor /= integral;
    return d;
}

EigenSystem build_eigensystem_w(Interval interval,
                                const std::function<double(double)>& w, int m,
                                int num_basis, int num_eigen) {
    if (m < 2) throw UsageError("eigensystem: m must be >= 2");
    if (num_eigen > num_basis)
        throw UsageError("eigensystem: num_eigen > num_basis");

    const int degree = std::max(3, m + 1);
    BSplineBasis basis(interval.lo, interval.hi, num_basis, degree);
    const int nspan = num_basis - degree;  // interior spans
    const int npts = 4;                    // Gauss-Legendre points per span
    Eigen::VectorXd gx, gw;
    gauss_legendre(npts, gx, gw);

    const int G = nspan * npts;
    Eigen::VectorXd nodes(G), qw(G), wt(G);
    double span_lo = interval.lo;
    double step = (interval.hi - interval.lo) / nspan;
    for (int s = 0; s < nspan; ++s) {
        double a = span_lo + s * step, b = a + step;
        for (int k = 0; k < npts; ++k) {
            nodes(s * npts + k) = 0.5 * (b - a) * gx(k) + 0.5 * (a + b);
            qw(s * npts + k) = 0.5 * (b - a) * gw(k);
        }
    }
    for (int g = 0; g < G; ++g) {
        wt(g) = w(nodes(g));
        if (!(wt(g) > 0)) throw NumericalError("eigensystem: weight not positive");
    }

    Eigen::MatrixXd B0 = basis.design(nodes, 0);
    Eigen::MatrixXd Bm = basis.design(nodes, m);
    Eigen::MatrixXd V = B0.transpose() * (qw.cwiseProduct(wt)).asDiagonal() * B0;
    Eigen::MatrixXd J = Bm.transpose() * qw.asDiagonal() * Bm;

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(J, V);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigensystem: generalized eigensolver failed");

    EigenSystem e;
    e.interval = interval;
    e.m = m;
    e.v = num_eigen;
    e.grid = nodes;
    e.qweight = qw;
    e.weight = wt;
    e.basis = basis;
    e.rho = es.eigenvalues().head(num_eigen).cwiseMax(0.0);
    e.coef = es.eigenvectors().leftCols(num_eigen);
    // deterministic sign convention: largest-magnitude coefficient positive
    for (int j = 0; j < num_eigen; ++j) {
        int imax;
        e.coef.col(j).cwiseAbs().maxCoeff(&imax);
        if (e.coef(imax, j) < 0) e.coef.col(j) = -e.coef.col(j);
    }
    e.phi = (B0 * e.coef).transpose();
    e.dphi = (basis.design(nodes, 1) * e.coef).transpose();
    return e;
}

EigenSystem build_eigensystem(const DensityEstimate& density,
                              const std::function<double(double)>& sigma0sq,
                              int m, int num_basis, int num_eigen) {
    auto w = [&density, &sigma0sq](double s) {
        double s0 = sigma0sq ? sigma0sq(s) : 1.0;
        return s0 * density(s);
    };
    return build_eigensystem_w(density.interval, w, m, num_basis, num_eigen);
}

Eigen::MatrixXd EigenSystem::eval(const Eigen::VectorXd& points,
                                  int deriv) const {
    if (points.size() == 0) return Eigen::MatrixXd(v, 0);
    const double tol = 1e-12 * std::max(1.0, std::abs(interval.hi - interval.lo));
    for (int i = 0; i < points.size(); ++i)
        if (!interval.contains(points(i), tol))
            throw UsageError("eigensystem: evaluation point outside interval");
    return (basis.design(points, deriv) * coef).transpose();
}

double kernel_eval(const KernelHandle& k, double s, double t) {
    const EigenSystem& e = *k.eig;
    Eigen::VectorXd pts(2);
    pts << s, t;
    Eigen::MatrixXd ph = e.eval(pts);
    double acc = 0;
    for (int j = 0; j < e.v; ++j)
        acc += ph(j, 0) * ph(j, 1) / (1.0 + k.lambda * e.rho(j));
    return acc;
}

Eigen::VectorXd apply_m_lambda(const Eigen::VectorXd& a, double lambda,
                               const Eigen::VectorXd& rho) {
    if (a.size() != rho.size())
        throw UsageError("apply_m_lambda: length mismatch");
    return a.array() * (lambda * rho.array()) / (1.0 + lambda * rho.array());
}

} // namespace simspline
