#include "simspline/bspline.hpp"
#include <algorithm>
#include <stdexcept>

namespace simspline {

BSplineBasis::BSplineBasis(double lo_, double hi_, int num_basis_, int degree_) {
    lo = lo_;
    hi = hi_;
    degree = degree_;
    num_basis = num_basis_;
    if (!(hi > lo)) throw std::invalid_argument("bspline: empty interval");
    int n_interior = num_basis - degree - 1;
    if (n_interior < 0) throw std::invalid_argument("bspline: too few basis functions");
    knots.clear();
    knots.reserve(num_basis + degree + 1);
    for (int i = 0; i <= degree; ++i) knots.push_back(lo);
    for (int i = 1; i <= n_interior; ++i)
        knots.push_back(lo + (hi - lo) * i / (n_interior + 1));
    for (int i = 0; i <= degree; ++i) knots.push_back(hi);
}

BSplineBasis BSplineBasis::from_knots(std::vector<double> interior, double lo,
                                      double hi, int degree) {
    BSplineBasis b;
    b.lo = lo;
    b.hi = hi;
    b.degree = degree;
    std::sort(interior.begin(), interior.end());
    b.knots.clear();
    for (int i = 0; i <= degree; ++i) b.knots.push_back(lo);
    for (double t : interior) b.knots.push_back(t);
    for (int i = 0; i <= degree; ++i) b.knots.push_back(hi);
    b.num_basis = (int)b.knots.size() - degree - 1;
    return b;
}

int BSplineBasis::find_span(double x) const {
    int lo_i = degree, hi_i = num_basis; // spans live in [degree, num_basis-1]
    if (x >= knots[num_basis]) return num_basis - 1;
    if (x <= knots[degree]) return degree;
    // binary search for t_i <= x < t_{i+1}
    while (hi_i - lo_i > 1) {
        int mid = (lo_i + hi_i) / 2;
        if (x < knots[mid]) hi_i = mid;
        else lo_i = mid;
    }
    return lo_i;
}

void BSplineBasis::ders_at(double x, int nderiv, int span,
                           Eigen::MatrixXd& out) const {
    const int p = degree;
    Eigen::MatrixXd ndu(p + 1, p + 1);
    Eigen::VectorXd left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left(j) = x - knots[span + 1 - j];
        right(j) = knots[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right(r + 1) + left(j - r);
            double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right(r + 1) * temp;
            saved = left(j - r) * temp;
        }
        ndu(j, j) = saved;
    }
    out.resize(nderiv + 1, p + 1);
    for (int j = 0; j <= p; ++j) out(0, j) = ndu(j, p);
    if (nderiv == 0) return;
    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= nderiv; ++k) {
            double d = 0.0;
            int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            int j1 = (rk >= -1) ? 1 : -rk;
            int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            out(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double fac = p;
    for (int k = 1; k <= nderiv; ++k) {
        for (int j = 0; j <= p; ++j) out(k, j) *= fac;
        fac *= (p - k);
    }
}

Eigen::MatrixXd BSplineBasis::design(const Eigen::VectorXd& x, int deriv) const {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(x.size(), num_basis);
    Eigen::MatrixXd ders;
    for (int i = 0; i < x.size(); ++i) {
        double xi = std::clamp(x(i), lo, hi);
        int span = find_span(xi);
        ders_at(xi, deriv, span, ders);
        for (int j = 0; j <= degree; ++j)
            D(i, span - degree + j) = ders(deriv, j);
    }
    return D;
}

double BSplineBasis::eval(const Eigen::VectorXd& coef, double x, int d) const {
    double xi = std::clamp(x, lo, hi);
    int span = find_span(xi);
    Eigen::MatrixXd ders;
    ders_at(xi, d, span, ders);
    double s = 0.0;
    for (int j = 0; j <= degree; ++j)
        s += ders(d, j) * coef(span - degree + j);
    return s;
}

} // namespace simspline
