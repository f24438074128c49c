#include "simspline/inference.hpp"
#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace simspline {

Eigen::VectorXd draw_multipliers(int n, Rng& rng) {
    if (n < 1) throw UsageError("draw_multipliers: n < 1");
    const double w_lo = 1.0 - 1.0 / std::sqrt(2.0);
    const double w_hi = 1.0 + std::sqrt(2.0);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i)
        w(i) = (rng.uniform() < 2.0 / 3.0) ? w_lo : w_hi;
    return w;
}

double empirical_quantile(const std::vector<double>& values, double level) {
    if (values.empty()) throw UsageError("empirical_quantile: empty input");
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    int B = (int)v.size();
    int idx = (int)std::ceil(B * level);
    idx = std::clamp(idx, 1, B);
    return v[idx - 1];
}

namespace {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? (int)hc : 1;
}

struct ReplicateResult {
    bool ok = false;
    Eigen::VectorXd g_on_grid;
    double joint_raw = 0;
};

ReplicateResult one_replicate(const Dataset& data, const SingleIndexFit& main,
                              const BootstrapConfig& cfg,
                              const Eigen::VectorXd& grid,
                              const JointProbe* probe, std::uint64_t seed_b,
                              const Eigen::VectorXd& w) {
    ReplicateResult res;
    FitConfig fc = main.config;
    fc.v = (int)main.a.size();
    fc.max_outer_iter = cfg.replicate_max_iter;
    fc.seed = seed_b;  // fresh initializer directions in full-restart mode
    fc.n_starts = 1;   // replicates are single-start; the multiplier noise
                       // already randomizes the basin they land in
    if (cfg.reuse_lambda) fc.lambda = main.lambda;
    SingleIndexFit fb;
    if (cfg.restart == BootstrapConfig::Restart::warm)
        fb = fit(data, fc, &w, &main.beta);
    else
        fb = fit(data, fc, &w, nullptr);
    if (!fb.converged) return res;
    res.g_on_grid = predict_g(fb, grid);
    if (probe) {
        Eigen::VectorXd s0(1);
        s0 << probe->x0.dot(fb.beta);
        res.joint_raw = predict_g(fb, s0)(0);
        if (probe->z0.size() > 0) res.joint_raw += probe->z0.dot(fb.gamma);
    }
    res.ok = true;
    return res;
}

} // namespace

BootstrapRun run_bootstrap(const Dataset& data, const SingleIndexFit& main,
                           const BootstrapConfig& cfg,
                           const JointProbe* probe) {
    if (cfg.B < 100) throw UsageError("bootstrap: B must be >= 100");
    if (!(cfg.alpha > 0 && cfg.alpha < 0.5))
        throw UsageError("bootstrap: alpha must lie in (0, 0.5)");
    if (cfg.grid_size < 2) throw UsageError("bootstrap: grid_size must be >= 2");
    BootstrapRun run;
    run.requested_B = cfg.B;
    const int n = data.n();
    Eigen::VectorXd s_obs = data.x * main.beta;
    // The grid spans the interior of the observed index range (2.5%..97.5%
    // empirical quantiles).  The sup-statistic theory needs the index density
    // bounded below on the interval; at the raw extremes the spline estimate
    // is driven by a handful of points and its boundary excursions would
    // dominate both the statistic and the bootstrap quantile.
    std::vector<double> s_sorted(s_obs.data(), s_obs.data() + n);
    std::sort(s_sorted.begin(), s_sorted.end());
    auto quant = [&](double p) {
        double pos = p * (n - 1);
        int i = (int)pos;
        double frac = pos - i;
        return i + 1 < n ? s_sorted[i] * (1 - frac) + s_sorted[i + 1] * frac
                         : s_sorted[i];
    };
    run.grid = Eigen::VectorXd::LinSpaced(cfg.grid_size, quant(0.025),
                                          quant(0.975));
    run.center = predict_g(main, run.grid);
    run.scale = std::pow((double)n, -0.5) *
                std::pow(main.lambda, -1.0 / (4.0 * main.config.m));

    std::vector<ReplicateResult> results(cfg.B);
    std::atomic<int> next{0};
    int nthreads = std::min(resolve_threads(cfg.threads), cfg.B);
    auto worker = [&]() {
        for (;;) {
            int b = next.fetch_add(1);
            if (b >= cfg.B) return;
            Rng rw(cfg.seed, {0x10, (std::uint64_t)b});
            Eigen::VectorXd w = draw_multipliers(n, rw);
            ReplicateResult r = one_replicate(
                data, main, cfg, run.grid, probe,
                splitmix64(cfg.seed ^ splitmix64(0x20 + b)), w);
            if (!r.ok) {  // retry once with a fresh weight draw
                Rng rw2(cfg.seed, {0x11, (std::uint64_t)b});
                Eigen::VectorXd w2 = draw_multipliers(n, rw2);
                r = one_replicate(data, main, cfg, run.grid, probe,
                                  splitmix64(cfg.seed ^ splitmix64(0x21 + b)),
                                  w2);
            }
            results[b] = std::move(r);
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    int kept = 0;
    for (const auto& r : results) kept += r.ok ? 1 : 0;
    run.dropped = cfg.B - kept;
    if (run.dropped > 0.05 * cfg.B)
        throw NumericalError("bootstrap: more than 5% of replicates dropped");

    run.gstar.resize(kept, cfg.grid_size);
    run.joint_stats.clear();
    int row = 0;
    for (const auto& r : results) {
        if (!r.ok) continue;
        run.gstar.row(row) =
            (r.g_on_grid - run.center).transpose() / run.scale;
        if (probe) run.joint_stats.push_back(r.joint_raw);
        ++row;
    }
    return run;
}

BandResult band_from_run(const BootstrapRun& run, double alpha) {
    BandResult b;
    b.grid = run.grid;
    b.center = run.center;
    b.scale = run.scale;
    b.alpha = alpha;
    b.B = (int)run.gstar.rows();
    std::vector<double> tstar(b.B);
    for (int r = 0; r < b.B; ++r)
        tstar[r] = run.gstar.row(r).cwiseAbs().maxCoeff();
    b.quantile = empirical_quantile(tstar, 1.0 - alpha);
    double hw = b.scale * b.quantile;
    b.lower = b.center.array() - hw;
    b.upper = b.center.array() + hw;
    return b;
}

BandResult bootstrap_band(const Dataset& data, const SingleIndexFit& fit,
                          const BootstrapConfig& cfg) {
    return band_from_run(run_bootstrap(data, fit, cfg), cfg.alpha);
}

std::pair<double, double> pointwise_from_run(const BootstrapRun& run,
                                             double alpha, double s) {
    // linear interpolation of G* columns at s
    const int G = (int)run.grid.size();
    double lo = run.grid(0), hi = run.grid(G - 1);
    double sc = std::clamp(s, lo, hi);
    double step = (hi - lo) / (G - 1);
    int i = std::min((int)((sc - lo) / step), G - 2);
    double t = (sc - run.grid(i)) / step;
    std::vector<double> vals(run.gstar.rows());
    double center = (1 - t) * run.center(i) + t * run.center(i + 1);
    for (int r = 0; r < run.gstar.rows(); ++r)
        vals[r] = std::abs((1 - t) * run.gstar(r, i) + t * run.gstar(r, i + 1));
    double q = empirical_quantile(vals, 1.0 - alpha);
    return {center - run.scale * q, center + run.scale * q};
}

std::pair<double, double> pointwise_interval(const Dataset& data,
                                             const SingleIndexFit& fit,
                                             const BootstrapConfig& cfg,
                                             double s) {
    return pointwise_from_run(run_bootstrap(data, fit, cfg), cfg.alpha, s);
}

RelevantTestResult relevant_from_run(const BootstrapRun& run, int n,
                                     const std::function<double(double)>& g_star,
                                     double delta, double alpha) {
    RelevantTestResult res;
    res.delta = delta;
    res.scale = run.scale;
    const int G = (int)run.grid.size();
    Eigen::VectorXd diff(G);
    for (int i = 0; i < G; ++i)
        diff(i) = run.center(i) - g_star(run.grid(i));
    res.d_inf_hat = diff.cwiseAbs().maxCoeff();

    double cutoff = (1.0 - std::pow((double)n, -0.5)) * res.d_inf_hat;
    if (res.d_inf_hat == 0) {
        for (int i = 0; i < G; ++i) {
            res.e_plus.push_back(i);
            res.e_minus.push_back(i);
        }
    } else {
        for (int i = 0; i < G; ++i) {
            if (diff(i) >= cutoff) res.e_plus.push_back(i);
            if (-diff(i) >= cutoff) res.e_minus.push_back(i);
        }
    }

    std::vector<double> tstar(run.gstar.rows());
    for (int r = 0; r < run.gstar.rows(); ++r) {
        double m = -std::numeric_limits<double>::infinity();
        for (int i : res.e_plus) m = std::max(m, run.gstar(r, i));
        for (int i : res.e_minus) m = std::max(m, -run.gstar(r, i));
        tstar[r] = m;
    }
    res.critical = empirical_quantile(tstar, 1.0 - alpha);
    res.reject = res.d_inf_hat > delta + run.scale * res.critical;
    return res;
}

RelevantTestResult relevant_test(const Dataset& data, const SingleIndexFit& fit,
                                 const BootstrapConfig& cfg,
                                 const std::function<double(double)>& g_star,
                                 double delta) {
    if (delta < 0) throw UsageError("relevant_test: delta must be >= 0");
    return relevant_from_run(run_bootstrap(data, fit, cfg), data.n(), g_star,
                             delta, cfg.alpha);
}

RelevantTestResult relevant_sweep(const Dataset& data,
                                  const SingleIndexFit& fit,
                                  const BootstrapConfig& cfg,
                                  const std::function<double(double)>& g_star,
                                  const std::vector<double>& delta_grid) {
    if (delta_grid.empty()) throw UsageError("relevant_sweep: empty grid");
    for (size_t i = 1; i < delta_grid.size(); ++i)
        if (delta_grid[i] < delta_grid[i - 1])
            throw UsageError("relevant_sweep: delta grid must ascend");
    BootstrapRun run = run_bootstrap(data, fit, cfg);
    RelevantTestResult res =
        relevant_from_run(run, data.n(), g_star, delta_grid.front(), cfg.alpha);
    // the critical value does not depend on delta: reuse one pass
    res.delta_hat_alpha = std::numeric_limits<double>::quiet_NaN();
    for (double d : delta_grid) {
        bool rej = res.d_inf_hat > d + run.scale * res.critical;
        res.sweep.emplace_back(d, rej);
        if (!rej && std::isnan(res.delta_hat_alpha)) res.delta_hat_alpha = d;
    }
    return res;
}

bool band_duality_test(const BandResult& band,
                       const std::function<double(double)>& g_star,
                       double delta) {
    // Reject when the band and the tube g_* +- delta are disjoint somewhere:
    // then no function in the band satisfies the null sup-distance bound.
    // (The containment form "tube inside band" is anti-monotone in delta and
    // rejects everything once delta exceeds the band width.)
    for (int i = 0; i < band.grid.size(); ++i) {
        double gs = g_star(band.grid(i));
        if (gs + delta < band.lower(i) || gs - delta > band.upper(i))
            return true;
    }
    return false;
}

JointTestResult joint_from_run(const BootstrapRun& run,
                               const SingleIndexFit& fit,
                               const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& z0, double y0,
                               double alpha, bool literal_tnb) {
    Eigen::VectorXd s0(1);
    s0 << x0.dot(fit.beta);
    double plug = predict_g(fit, s0)(0);
    if (z0.size() > 0) plug += z0.dot(fit.gamma);

    JointTestResult res;
    res.t_hat = (plug - y0) / run.scale;
    std::vector<double> tstar(run.joint_stats.size());
    for (size_t b = 0; b < run.joint_stats.size(); ++b) {
        double centerval = literal_tnb ? y0 : plug;
        tstar[b] = std::abs(run.joint_stats[b] - centerval) / run.scale;
    }
    res.critical = empirical_quantile(tstar, 1.0 - alpha / 2.0);
    res.reject = std::abs(res.t_hat) > res.critical;
    return res;
}

JointTestResult joint_test(const Dataset& data, const SingleIndexFit& fit,
                           const BootstrapConfig& cfg,
                           const Eigen::VectorXd& x0, const Eigen::VectorXd& z0,
                           double y0, bool literal_tnb) {
    if (x0.size() != data.p() || z0.size() != data.q())
        throw UsageError("joint_test: x0/z0 dimension mismatch");
    JointProbe probe{x0, z0};
    BootstrapRun run = run_bootstrap(data, fit, cfg, &probe);
    return joint_from_run(run, fit, x0, z0, y0, cfg.alpha, literal_tnb);
}

} // namespace simspline
