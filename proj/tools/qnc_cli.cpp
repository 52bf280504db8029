#include "qnc/constancy.hpp"
#include "qnc/harness.hpp"
#include "qnc/simulate.hpp"
#include "qnc/spectest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <stdexcept>

namespace {

// exit codes: 0 success, 2 config/usage error, 3 data/runtime error
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_or_print(const std::string& out, const std::string& content) {
    if (out.empty() || out == "-") {
        std::cout << content;
        return;
    }
    std::ofstream f(out);
    if (!f) throw DataError("cannot write " + out);
    f << content;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"simulation and testing of non-causal autoregressions"};
    app.require_subcommand(1);
    app.fallthrough(true);

    std::uint64_t seed = 1;
    int threads = 0;
    std::string config_path, out_path;
    app.add_option("--seed", seed, "master seed");
    app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--out", out_path, "output file or directory");

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate an MAR(r,s) path to CSV");
    std::vector<double> sim_phi, sim_psi;
    std::string sim_dist = "gaussian";
    double sim_sigma = 2.0;
    int sim_T = 200;
    sim->add_option("--phi", sim_phi, "causal coefficients");
    sim->add_option("--psi", sim_psi, "non-causal coefficients");
    sim->add_option("--dist", sim_dist, "innovation distribution");
    sim->add_option("--sigma", sim_sigma, "lognormal sigma parameter");
    sim->add_option("--T", sim_T, "sample size")->check(CLI::PositiveNumber);

    // test
    auto* tst = app.add_subcommand("test", "run one test on a series CSV");
    std::string tst_method = "constancy", tst_input;
    int tst_p = 1;
    double tst_level = 0.05, tst_lo = 0.05, tst_hi = 0.95, tst_k = 4.0;
    int tst_B = 200;
    std::string tst_cache = "critvals_cache.txt";
    tst->add_option("--method", tst_method, "constancy | ev | eg")->required();
    tst->add_option("--input", tst_input, "series CSV")->required();
    tst->add_option("--p", tst_p, "QAR order")->check(CLI::PositiveNumber);
    tst->add_option("--level", tst_level, "test level");
    tst->add_option("--lo", tst_lo, "constancy trimming lower bound");
    tst->add_option("--hi", tst_hi, "constancy trimming upper bound");
    tst->add_option("--k", tst_k, "EV subsample constant");
    tst->add_option("--B", tst_B, "EG bootstrap draws");
    tst->add_option("--cache", tst_cache, "critical-value cache file");

    // table
    auto* tab = app.add_subcommand("table", "reproduce a paper table at desk scale");
    std::string tab_id;
    double tab_scale = 0.1;
    std::string tab_cache = "critvals_cache.txt";
    tab->add_option("id", tab_id, "T1 | T2 | T3 | T4 | T5 | T7")->required();
    tab->add_option("--scale", tab_scale, "replication scale in (0,1]");
    tab->add_option("--cache", tab_cache, "critical-value cache file");

    // analyze
    auto* ana = app.add_subcommand("analyze", "empirical pipeline on a series CSV");
    std::string ana_input, ana_transform = "none";
    int ana_max_lag = 12;
    std::vector<std::string> ana_tests;
    double ana_level = 0.05;
    std::string ana_cache = "critvals_cache.txt";
    ana->add_option("--input", ana_input, "series CSV")->required();
    ana->add_option("--transform", ana_transform, "none | diff | detrend");
    ana->add_option("--max-lag", ana_max_lag, "maximum PACF lag");
    ana->add_option("--tests", ana_tests, "subset of constancy ev eg (default all)");
    ana->add_option("--level", ana_level, "test level");
    ana->add_option("--cache", ana_cache, "critical-value cache file");

    // demo-density
    auto* dem = app.add_subcommand("demo-density", "conditional density slices of Y_t | Y_{t-1}");
    double dem_coef = 0.6;
    bool dem_noncausal = false;
    std::string dem_dist = "exponential";
    int dem_T = 5000;
    std::vector<double> dem_pcts{0.10, 0.30, 0.50, 0.70, 0.90};
    dem->add_option("--coef", dem_coef, "AR coefficient");
    dem->add_flag("--noncausal", dem_noncausal, "use the non-causal model");
    dem->add_option("--dist", dem_dist, "innovation distribution");
    dem->add_option("--T", dem_T, "sample size")->check(CLI::PositiveNumber);
    dem->add_option("--percentiles", dem_pcts, "conditioning percentiles");

    // critvals
    auto* cv = app.add_subcommand("critvals", "simulate constancy critical values");
    int cv_p = 1;
    double cv_lo = 0.05, cv_hi = 0.95, cv_level = 0.05;
    int cv_reps = 50000, cv_steps = 2000;
    std::string cv_cache = "critvals_cache.txt";
    cv->add_option("--p", cv_p, "number of slope coefficients")->check(CLI::PositiveNumber);
    cv->add_option("--lo", cv_lo, "trimming lower bound");
    cv->add_option("--hi", cv_hi, "trimming upper bound");
    cv->add_option("--level", cv_level, "test level");
    cv->add_option("--reps", cv_reps, "simulation replications");
    cv->add_option("--steps", cv_steps, "random walk steps");
    cv->add_option("--cache", cv_cache, "cache file");

    // cell: run one Monte Carlo cell from --config
    auto* cel = app.add_subcommand("cell", "run one Monte Carlo cell from a config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*sim) {
        qnc::InnovationSpec innov = qnc::InnovationSpec::from_name(sim_dist);
        innov.lognormal_sigma = sim_sigma;
        qnc::MarModel model(sim_phi, sim_psi, innov);
        std::vector<double> y = qnc::simulate_mar(model, static_cast<std::size_t>(sim_T), seed);
        std::ostringstream os;
        os << std::setprecision(12);
        for (double v : y) os << v << "\n";
        write_or_print(out_path, os.str());
        return 0;
    }

    if (*tst) {
        std::vector<double> series = qnc::read_series_csv(tst_input);
        nlohmann::json j;
        j["p"] = tst_p;
        j["level"] = tst_level;
        j["seed"] = seed;
        if (tst_method == "constancy") {
            qnc::ConstancyOptions opt;
            opt.lo = tst_lo;
            opt.hi = tst_hi;
            opt.level = tst_level;
            opt.threads = threads;
            opt.cache_path = tst_cache;
            qnc::ConstancyResult r = qnc::constancy_test(series, tst_p, opt);
            j["method"] = "constancy";
            j["statistic"] = r.ks_transformed;
            j["critical_value"] = r.critical_values.at(tst_level);
            j["reject"] = r.reject;
            std::ostringstream tn;
            tn << "interval=[" << tst_lo << "," << tst_hi << "]";
            j["tuning"] = tn.str();
        } else if (tst_method == "ev") {
            qnc::EvOptions opt;
            opt.k_sub = tst_k;
            opt.level = tst_level;
            opt.threads = threads;
            qnc::SpecTestResult r = qnc::ev_test(series, tst_p, opt, seed);
            j["method"] = "ev";
            j["statistic"] = r.statistic;
            j["critical_value"] = r.critical_values.at(tst_level);
            j["reject"] = r.reject;
            j["tuning"] = r.tuning;
        } else if (tst_method == "eg") {
            qnc::EgOptions opt;
            opt.B = tst_B;
            opt.level = tst_level;
            opt.threads = threads;
            qnc::SpecTestResult r = qnc::eg_test(series, tst_p, opt, seed);
            j["method"] = "eg";
            j["statistic"] = r.statistic;
            j["critical_value"] = r.critical_values.at(tst_level);
            j["reject"] = r.reject;
            j["tuning"] = r.tuning;
        } else {
            std::cerr << "unknown method: " << tst_method << "\n";
            return 2;
        }
        write_or_print(out_path, j.dump(2) + "\n");
        return 0;
    }

    if (*tab) {
        qnc::run_table(tab_id, tab_scale, seed, threads,
                       out_path.empty() ? "." : out_path, tab_cache);
        return 0;
    }

    if (*ana) {
        nlohmann::json j = qnc::analyze_series(ana_input, ana_transform, ana_max_lag,
                                               ana_tests, ana_level, seed, threads, ana_cache);
        write_or_print(out_path, j.dump(2) + "\n");
        return 0;
    }

    if (*dem) {
        qnc::InnovationSpec innov = qnc::InnovationSpec::from_name(dem_dist);
        qnc::conditional_density_demo(dem_coef, !dem_noncausal, innov,
                                      static_cast<std::size_t>(dem_T), dem_pcts, seed,
                                      out_path.empty() ? "density_slices.csv" : out_path);
        return 0;
    }

    if (*cv) {
        double value = qnc::critical_value(cv_p, cv_lo, cv_hi, cv_level, cv_reps, cv_steps,
                                           seed, qnc::KsNorm::L1, cv_cache, threads);
        std::ostringstream os;
        os << std::setprecision(10) << value << "\n";
        write_or_print(out_path, os.str());
        return 0;
    }

    if (*cel) {
        if (config_path.empty()) {
            std::cerr << "cell requires --config\n";
            return 2;
        }
        qnc::ExperimentConfig cfg = qnc::parse_config_file(config_path);
        if (seed != 1) cfg.seed = seed;
        if (threads != 0) cfg.threads = threads;
        qnc::CellResult r = qnc::run_cell(cfg);
        nlohmann::json j;
        j["cell_id"] = cfg.cell_id;
        j["test"] = cfg.test;
        j["rejection_rate"] = r.rejection_rate;
        j["replications"] = r.replications;
        j["mean_stat"] = r.mean_stat;
        j["runtime_s"] = r.runtime_s;
        j["errors"] = r.errors;
        write_or_print(out_path, j.dump(2) + "\n");
        return 0;
    }

    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
