#pragma once
// Multiplier-bootstrap inference: simultaneous confidence bands, pointwise
// intervals, relevant-hypothesis tests, and joint tests.
#include "simspline/model_core.hpp"
#include <functional>
#include <optional>
#include <vector>

namespace simspline {

struct BootstrapConfig {
    int B = 200;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    int grid_size = 401;
    bool reuse_lambda = false;  // reuse the main-fit lambda in replicates
    // Replicate refits either warm-start at the main fit (cheap) or rerun the
    // full pipeline including the random initializer (default: captures the
    // basin-to-basin variability of the estimator, which warm starts miss).
    enum class Restart { warm, full };
    Restart restart = Restart::full;
    int threads = 0;  // 0 = hardware concurrency
    int replicate_max_iter = 50;
};

// Two-point multipliers: 1 - 1/sqrt(2) w.p. 2/3, 1 + sqrt(2) w.p. 1/3
// (mean 1, variance 1).
Eigen::VectorXd draw_multipliers(int n, Rng& rng);

// order statistic at index ceil(B * level), the inf form of the empirical
// quantile
double empirical_quantile(const std::vector<double>& values, double level);

// One shared bootstrap pass.  G*_b(s) = sqrt(n) lambda^{1/(4m)}
// (gtilde*_b - gtilde)(s) on the grid; optionally also the joint-test
// replicate statistics for a probe point (x0, z0).
struct BootstrapRun {
    Eigen::VectorXd grid;    // equispaced over the interior (2.5%..97.5%
                             // quantiles) of the observed index range
    Eigen::VectorXd center;  // gtilde on grid
    double scale = 0;        // n^{-1/2} lambda^{-1/(4m)}
    Eigen::MatrixXd gstar;   // B_eff x G
    std::vector<double> joint_stats;  // per replicate, if probe given
    int requested_B = 0;
    int dropped = 0;
};

struct JointProbe {
    Eigen::VectorXd x0;
    Eigen::VectorXd z0;
};

BootstrapRun run_bootstrap(const Dataset& data, const SingleIndexFit& fit,
                           const BootstrapConfig& config,
                           const JointProbe* probe = nullptr);

struct BandResult {
    Eigen::VectorXd grid, center, lower, upper;
    double quantile = 0;
    double scale = 0;
    double alpha = 0;
    int B = 0;
};

BandResult band_from_run(const BootstrapRun& run, double alpha);
BandResult bootstrap_band(const Dataset& data, const SingleIndexFit& fit,
                          const BootstrapConfig& config);

std::pair<double, double> pointwise_interval(const Dataset& data,
                                             const SingleIndexFit& fit,
                                             const BootstrapConfig& config,
                                             double s);
std::pair<double, double> pointwise_from_run(const BootstrapRun& run,
                                             double alpha, double s);

struct RelevantTestResult {
    double d_inf_hat = 0;
    double delta = 0;
    double critical = 0;
    double scale = 0;
    bool reject = false;
    std::vector<int> e_plus, e_minus;  // indices into grid
    std::vector<std::pair<double, bool>> sweep;  // (delta, reject)
    double delta_hat_alpha = 0;  // smallest non-rejected delta (sweep only)
};

RelevantTestResult relevant_from_run(const BootstrapRun& run, int n,
                                     const std::function<double(double)>& g_star,
                                     double delta, double alpha);
RelevantTestResult relevant_test(const Dataset& data, const SingleIndexFit& fit,
                                 const BootstrapConfig& config,
                                 const std::function<double(double)>& g_star,
                                 double delta);
RelevantTestResult relevant_sweep(const Dataset& data,
                                  const SingleIndexFit& fit,
                                  const BootstrapConfig& config,
                                  const std::function<double(double)>& g_star,
                                  const std::vector<double>& delta_grid);

// duality baseline: reject when the band is disjoint from the tube
// g_* +- delta at some grid point (no band function obeys the null bound)
bool band_duality_test(const BandResult& band,
                       const std::function<double(double)>& g_star,
                       double delta);

struct JointTestResult {
    double t_hat = 0;
    double critical = 0;
    bool reject = false;
};

// literal_tnb: use the raw uncentered replicate statistic instead of
// recentering it at the main fit
JointTestResult joint_from_run(const BootstrapRun& run,
                               const SingleIndexFit& fit,
                               const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& z0, double y0,
                               double alpha, bool literal_tnb = false);
JointTestResult joint_test(const Dataset& data, const SingleIndexFit& fit,
                           const BootstrapConfig& config,
                           const Eigen::VectorXd& x0, const Eigen::VectorXd& z0,
                           double y0, bool literal_tnb = false);

} // namespace simspline
