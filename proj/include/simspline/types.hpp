#pragma once
#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace simspline {

// Error taxonomy maps onto CLI exit codes: UsageError -> 1,
// NonConvergenceError -> 2, everything else -> 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Interval {
    double lo = 0, hi = 1;
    double length() const { return hi - lo; }
    bool contains(double s, double tol = 0.0) const {
        return s >= lo - tol && s <= hi + tol;
    }
};

struct Dataset {
    Eigen::VectorXd y;  // n
    Eigen::MatrixXd x;  // n x p
    Eigen::MatrixXd z;  // n x q (q may be 0)
    int n() const { return (int)y.size(); }
    int p() const { return (int)x.cols(); }
    int q() const { return (int)z.cols(); }
    void validate() const;
};

inline void Dataset::validate() const {
    if (x.rows() != y.size() || (z.cols() > 0 && z.rows() != y.size()))
        throw UsageError("dataset: row counts disagree");
    if (n() <= p() + q() + 5)
        throw UsageError("dataset: need n > p + q + 5");
    if (!y.allFinite() || !x.allFinite() || (z.size() > 0 && !z.allFinite()))
        throw UsageError("dataset: non-finite entries");
    for (int j = 0; j < p(); ++j) {
        if ((x.col(j).array() - x(0, j)).abs().maxCoeff() == 0.0)
            throw UsageError("dataset: x column " + std::to_string(j + 1) +
                             " is constant");
    }
}

} // namespace simspline
