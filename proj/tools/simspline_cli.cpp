// sim-spline command-line front end.
#include "simspline/inference.hpp"
#include "simspline/io.hpp"
#include "simspline/simulation.hpp"
#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace simspline;
using nlohmann::json;

namespace {

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SIM_SPLINE_THREADS")) {
        int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 0;  // library default: all cores
}

SingleIndexFit load_fit(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open fit file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw UsageError(std::string("fit json parse error: ") + e.what());
    }
    return fit_from_json(j);
}

void check_consistency(const SingleIndexFit& f, const Dataset& d) {
    if (d.n() != f.n || d.p() != (int)f.beta.size() ||
        d.q() != (int)f.gamma.size())
        throw UsageError("fit/data mismatch: dimensions (n, p, q) disagree");
}

std::function<double(double)> parse_gstar(const std::string& spec) {
    if (spec == "zero") return [](double) { return 0.0; };
    if (spec.rfind("poly:", 0) == 0) {
        std::vector<double> coefs;
        std::stringstream ss(spec.substr(5));
        std::string tok;
        while (std::getline(ss, tok, ','))
            coefs.push_back(std::strtod(tok.c_str(), nullptr));
        if (coefs.empty()) throw UsageError("--gstar poly: needs coefficients");
        return [coefs](double s) {
            double acc = 0, pw = 1;
            for (double c : coefs) {
                acc += c * pw;
                pw *= s;
            }
            return acc;
        };
    }
    if (spec.rfind("csv:", 0) == 0) {
        std::string path = spec.substr(4);
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open g* table: " + path);
        std::vector<double> ss, gs;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            double a, b;
            if (std::sscanf(line.c_str(), "%lf,%lf", &a, &b) != 2)
                throw UsageError("g* table: expected two numeric columns");
            ss.push_back(a);
            gs.push_back(b);
        }
        if (ss.size() < 2) throw UsageError("g* table: need at least 2 rows");
        return [ss, gs](double s) {
            if (s <= ss.front()) return gs.front();
            if (s >= ss.back()) return gs.back();
            auto it = std::upper_bound(ss.begin(), ss.end(), s);
            size_t i = it - ss.begin();
            double t = (s - ss[i - 1]) / (ss[i] - ss[i - 1]);
            return (1 - t) * gs[i - 1] + t * gs[i];
        };
    }
    throw UsageError("unknown --gstar format: " + spec);
}

json band_to_json(const BandResult& b) {
    auto vec = [](const Eigen::VectorXd& v) {
        json a = json::array();
        for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
        return a;
    };
    return json{{"schema", "sim-spline/1"}, {"type", "band"},
                {"alpha", b.alpha},         {"B", b.B},
                {"quantile", b.quantile},   {"scale", b.scale},
                {"grid", vec(b.grid)},      {"center", vec(b.center)},
                {"lower", vec(b.lower)},    {"upper", vec(b.upper)}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalized spline estimation and multiplier-bootstrap "
                 "inference for partially linear single-index models"};
    app.require_subcommand(1);

    // shared fit flags
    FitConfig fitcfg;
    auto add_fit_flags = [&](CLI::App* sub) {
        sub->add_option("--m", fitcfg.m, "penalty order");
        sub->add_option("--num-basis", fitcfg.num_basis, "B-spline basis size");
        sub->add_option("--v", fitcfg.v, "eigenbasis truncation (0 = auto CV)");
        sub->add_option("--lambda", fitcfg.lambda,
                        "fixed penalty parameter (0 = GCV)");
        sub->add_option("--max-iter", fitcfg.max_outer_iter,
                        "maximum outer iterations");
        sub->add_option("--tol", fitcfg.tol, "relative objective tolerance");
        sub->add_option("--init-directions", fitcfg.n_init_directions,
                        "number of random initial directions");
        sub->add_option("--starts", fitcfg.n_starts,
                        "alternating-scheme runs from the top-ranked "
                        "initial directions (best final GCV wins)");
    };

    std::uint64_t seed = 0;
    int threads = 0;
    std::string input_path, fit_path, out_path = "-", csv_path;

    BootstrapConfig bc;
    std::string restart_mode = "full";
    auto add_boot_flags = [&](CLI::App* sub) {
        sub->add_option("--alpha", bc.alpha, "nominal level");
        sub->add_option("--B", bc.B, "bootstrap replicates");
        sub->add_option("--grid-size", bc.grid_size, "evaluation grid size");
        sub->add_flag("--reuse-lambda", bc.reuse_lambda,
                      "reuse the main-fit lambda in replicates");
        sub->add_option("--restart", restart_mode,
                        "replicate restart mode: full | warm")
            ->check(CLI::IsMember({"full", "warm"}));
        sub->add_option("--replicate-max-iter", bc.replicate_max_iter,
                        "outer iteration cap for replicate refits");
    };

    // fit
    auto* cmd_fit = app.add_subcommand("fit", "fit the model to a CSV dataset");
    cmd_fit->add_option("input", input_path, "input CSV (y, x1.., z1..)")
        ->required();
    cmd_fit->add_option("--out", out_path, "output fit JSON path");
    cmd_fit->add_option("--seed", seed, "master seed");
    add_fit_flags(cmd_fit);

    // band
    auto* cmd_band =
        app.add_subcommand("band", "simultaneous confidence band");
    cmd_band->add_option("fit", fit_path, "fit JSON from 'fit'")->required();
    cmd_band->add_option("input", input_path, "input CSV")->required();
    cmd_band->add_option("--out", out_path, "output band JSON path");
    cmd_band->add_option("--csv", csv_path, "also write band CSV here");
    cmd_band->add_option("--seed", seed, "bootstrap seed");
    cmd_band->add_option("--threads", threads, "worker threads");
    add_boot_flags(cmd_band);

    // test-relevant
    std::string gstar_spec = "zero", sweep_spec;
    double delta = 0;
    auto* cmd_rel = app.add_subcommand("test-relevant",
                                       "relevant-hypothesis test");
    cmd_rel->add_option("fit", fit_path)->required();
    cmd_rel->add_option("input", input_path)->required();
    cmd_rel->add_option("--gstar", gstar_spec,
                        "reference: zero | poly:c0,c1,.. | csv:path");
    cmd_rel->add_option("--delta", delta, "relevance threshold");
    cmd_rel->add_option("--sweep", sweep_spec, "delta sweep lo:hi:steps");
    cmd_rel->add_option("--out", out_path);
    cmd_rel->add_option("--seed", seed);
    cmd_rel->add_option("--threads", threads);
    add_boot_flags(cmd_rel);

    // test-joint
    std::vector<double> x0_in, z0_in;
    double y0 = 0;
    bool literal_tnb = false;
    auto* cmd_joint = app.add_subcommand("test-joint", "joint point test");
    cmd_joint->add_option("fit", fit_path)->required();
    cmd_joint->add_option("input", input_path)->required();
    cmd_joint->add_option("--x0", x0_in, "probe covariate vector")
        ->required()
        ->delimiter(',');
    cmd_joint->add_option("--z0", z0_in, "probe linear covariates")
        ->delimiter(',');
    cmd_joint->add_option("--y0", y0, "hypothesized response")->required();
    cmd_joint->add_flag("--literal-tnb", literal_tnb,
                        "uncentered replicate statistic");
    cmd_joint->add_option("--out", out_path);
    cmd_joint->add_option("--seed", seed);
    cmd_joint->add_option("--threads", threads);
    add_boot_flags(cmd_joint);

    // simulate
    std::string experiment = "coverage", out_prefix = "report";
    std::vector<int> settings{1}, n_list{200};
    std::vector<double> alpha_list{0.05}, y0_list{1.0, 0.0}, delta_grid;
    int reps = 100;
    auto* cmd_sim = app.add_subcommand("simulate", "Monte-Carlo experiments");
    cmd_sim->add_option("--experiment", experiment,
                        "coverage | power | joint | risk")
        ->check(CLI::IsMember({"coverage", "power", "joint", "risk"}));
    cmd_sim->add_option("--setting", settings, "error settings (1,2,3)")
        ->delimiter(',');
    cmd_sim->add_option("--n", n_list, "sample sizes")->delimiter(',');
    cmd_sim->add_option("--alpha", alpha_list, "nominal levels")
        ->delimiter(',');
    cmd_sim->add_option("--y0", y0_list, "joint-test hypothesized values")
        ->delimiter(',');
    cmd_sim->add_option("--delta", delta_grid, "power-curve delta grid")
        ->delimiter(',');
    cmd_sim->add_option("--reps", reps, "Monte-Carlo repetitions");
    cmd_sim->add_option("--B", bc.B, "bootstrap replicates");
    cmd_sim->add_option("--seed", seed, "master seed");
    cmd_sim->add_option("--threads", threads, "worker threads");
    cmd_sim->add_option("--out", out_prefix, "output file prefix");
    add_fit_flags(cmd_sim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        fitcfg.seed = seed;
        bc.seed = seed;
        bc.threads = resolve_threads(threads);
        bc.restart = (restart_mode == "warm") ? BootstrapConfig::Restart::warm
                                              : BootstrapConfig::Restart::full;

        auto write_out = [&](const json& j) {
            if (out_path == "-")
                write_json(std::cout, j);
            else
                write_json_file(out_path, j);
        };

        if (cmd_fit->parsed()) {
            Dataset data = read_dataset_csv(input_path);
            SingleIndexFit f = fit(data, fitcfg);
            write_out(fit_to_json(f));
            std::cerr << "iterations=" << f.iterations
                      << " lambda=" << format_double(f.lambda)
                      << " gcv=" << format_double(f.gcv) << " beta=[";
            for (int i = 0; i < f.beta.size(); ++i)
                std::cerr << (i ? "," : "") << format_double(f.beta(i));
            std::cerr << "] converged=" << (f.converged ? "yes" : "no")
                      << "\n";
            if (!f.converged) return 2;
            return 0;
        }

        if (cmd_band->parsed()) {
            Dataset data = read_dataset_csv(input_path);
            SingleIndexFit f = load_fit(fit_path);
            check_consistency(f, data);
            BandResult b = bootstrap_band(data, f, bc);
            write_out(band_to_json(b));
            if (!csv_path.empty())
                write_band_csv(csv_path, b.grid, b.center, b.lower, b.upper);
            return 0;
        }

        if (cmd_rel->parsed()) {
            Dataset data = read_dataset_csv(input_path);
            SingleIndexFit f = load_fit(fit_path);
            check_consistency(f, data);
            auto gstar = parse_gstar(gstar_spec);
            RelevantTestResult res;
            if (!sweep_spec.empty()) {
                double lo, hi;
                int steps;
                if (std::sscanf(sweep_spec.c_str(), "%lf:%lf:%d", &lo, &hi,
                                &steps) != 3 ||
                    steps < 2 || hi < lo)
                    throw UsageError("--sweep expects lo:hi:steps with hi >= lo");
                std::vector<double> grid(steps);
                for (int i = 0; i < steps; ++i)
                    grid[i] = lo + (hi - lo) * i / (steps - 1);
                res = relevant_sweep(data, f, bc, gstar, grid);
            } else {
                res = relevant_test(data, f, bc, gstar, delta);
            }
            json j{{"schema", "sim-spline/1"},
                   {"type", "relevant-test"},
                   {"d_inf_hat", res.d_inf_hat},
                   {"delta", res.delta},
                   {"critical", res.critical},
                   {"scale", res.scale},
                   {"reject", res.reject},
                   {"e_plus", res.e_plus},
                   {"e_minus", res.e_minus}};
            if (!res.sweep.empty()) {
                json sw = json::array();
                for (auto& [d, rej] : res.sweep)
                    sw.push_back({{"delta", d}, {"reject", rej}});
                j["sweep"] = sw;
                j["delta_hat_alpha"] = res.delta_hat_alpha;
            }
            write_out(j);
            return 0;
        }

        if (cmd_joint->parsed()) {
            Dataset data = read_dataset_csv(input_path);
            SingleIndexFit f = load_fit(fit_path);
            check_consistency(f, data);
            Eigen::VectorXd x0 =
                Eigen::Map<Eigen::VectorXd>(x0_in.data(), x0_in.size());
            Eigen::VectorXd z0 =
                Eigen::Map<Eigen::VectorXd>(z0_in.data(), z0_in.size());
            JointTestResult res =
                joint_test(data, f, bc, x0, z0, y0, literal_tnb);
            write_out(json{{"schema", "sim-spline/1"},
                           {"type", "joint-test"},
                           {"t_hat", res.t_hat},
                           {"critical", res.critical},
                           {"alpha", bc.alpha},
                           {"y0", y0},
                           {"reject", res.reject}});
            return 0;
        }

        if (cmd_sim->parsed()) {
            McConfig mc;
            mc.reps = reps;
            mc.B = bc.B;
            mc.seed = seed;
            mc.threads = resolve_threads(threads);
            mc.fit = fitcfg;
            mc.boot = bc;
            ExperimentReport report;
            if (experiment == "coverage") {
                report = run_coverage(settings, n_list, alpha_list, mc);
            } else if (experiment == "risk") {
                report = run_risk(settings, n_list, mc);
            } else if (experiment == "power") {
                if (delta_grid.empty())
                    for (int i = 0; i < 12; ++i)
                        delta_grid.push_back(1.3 * i / 11);
                report =
                    run_power_curve(settings.front(), n_list, delta_grid, mc);
            } else {
                report = run_joint(settings.front(), n_list, y0_list,
                                   alpha_list, mc);
            }
            write_json_file(out_prefix + ".json", report.to_json());
            // flat figure-data CSV alongside the JSON report
            std::ofstream csv(out_prefix + ".csv");
            if (!csv) throw UsageError("cannot open " + out_prefix + ".csv");
            if (!report.cells.empty()) {
                bool first = true;
                for (auto it = report.cells[0].begin();
                     it != report.cells[0].end(); ++it) {
                    csv << (first ? "" : ",") << it.key();
                    first = false;
                }
                csv << "\n";
                for (const auto& cell : report.cells) {
                    first = true;
                    for (auto it = cell.begin(); it != cell.end(); ++it) {
                        csv << (first ? "" : ",");
                        first = false;
                        if (it->is_number_float())
                            csv << format_double(it->get<double>());
                        else
                            csv << it->dump();
                    }
                    csv << "\n";
                }
            }
            return 0;
        }
        return 3;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NonConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
