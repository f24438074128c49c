#pragma once
// Synthetic-data settings and Monte-Carlo experiments (coverage, risk,
// relevant-test power, joint test).
#include "simspline/inference.hpp"
#include "simspline/model_core.hpp"
#include <json.hpp>

namespace simspline {

struct SimSetting {
    int n = 200;
    // 1: standard normal errors; 2: heteroscedastic normal with log-variance
    // in the index; 3: signed Beta(2,3) errors
    int error_mode = 1;
    std::uint64_t seed = 0;
    bool center_setting3 = true;  // subtract the analytic conditional mean
};

struct GeneratedData {
    Dataset data;
    Truth truth;
    Interval index_range;  // empirical range of the true index in this sample
};

GeneratedData gen_dataset(const SimSetting& setting);

struct ExperimentReport {
    std::string name;
    nlohmann::json config;
    nlohmann::json cells;  // array of per-cell statistics
    int reps = 0;
    double wall_seconds = 0;
    nlohmann::json to_json() const;
};

// shared knobs for the Monte-Carlo drivers
struct McConfig {
    int reps = 100;
    int B = 200;
    std::uint64_t seed = 0;
    int threads = 0;
    FitConfig fit;
    BootstrapConfig boot;  // B/seed/threads fields overridden per experiment
};

ExperimentReport run_coverage(const std::vector<int>& settings,
                              const std::vector<int>& n_list,
                              const std::vector<double>& alpha_list,
                              const McConfig& mc);
ExperimentReport run_risk(const std::vector<int>& settings,
                          const std::vector<int>& n_list, const McConfig& mc);
ExperimentReport run_power_curve(int setting, const std::vector<int>& n_list,
                                 const std::vector<double>& delta_grid,
                                 const McConfig& mc);
ExperimentReport run_joint(int setting, const std::vector<int>& n_list,
                           const std::vector<double>& y0_list,
                           const std::vector<double>& alpha_list,
                           const McConfig& mc);

} // namespace simspline
