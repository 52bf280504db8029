#pragma once

#include "qnc/constancy.hpp"
#include "qnc/simulate.hpp"
#include "qnc/spectest.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace qnc {

// one Monte Carlo cell: DGP + test + tuning
struct ExperimentConfig {
    std::string cell_id;
    std::string test = "constancy"; // constancy | ev | eg
    std::string dist = "gaussian";
    double lognormal_sigma = 2.0;
    std::vector<double> phi;
    std::vector<double> psi;
    bool arch = false;
    std::vector<double> gamma{0.2, 0.8};
    int T = 200;
    int replications = 100;
    double level = 0.05;
    double lo = 0.05, hi = 0.95; // constancy trimming
    double k_sub = 4.0;          // EV subsample constant
    std::string ev_centering = "bt"; // none | sqrt | bt
    int B = 200;                 // EG bootstrap draws
    std::uint64_t seed = 1;
    int threads = 0;
    std::string cache_path = "critvals_cache.txt";
    std::string out_dir = ".";

    InnovationSpec innovation() const;
};

struct CellResult {
    double rejection_rate = 0.0;
    int replications = 0;
    double mean_stat = 0.0;
    double runtime_s = 0.0;
    int errors = 0;
};

CellResult run_cell(const ExperimentConfig& cfg);

// table presets reproducing the paper's grids; writes <id>.csv and <id>.txt
// under out_dir. scale in (0,1] multiplies replication counts.
void run_table(const std::string& table_id, double scale, std::uint64_t seed,
               int threads, const std::string& out_dir,
               const std::string& cache_path = "critvals_cache.txt");

std::vector<double> read_series_csv(const std::string& path);

nlohmann::json analyze_series(const std::string& csv_path, const std::string& transform,
                              int max_lag, const std::vector<std::string>& tests,
                              double level, std::uint64_t seed, int threads,
                              const std::string& cache_path);

// density slices of Y_t | Y_{t-1} near given percentiles of the lagged value;
// returns {grid, one density column per percentile} and optionally writes CSV
struct DensitySlices {
    std::vector<double> grid;
    std::vector<double> x_values; // conditioning points
    std::vector<std::vector<double>> density; // per percentile
};
DensitySlices conditional_density_demo(double coef, bool causal,
                                       const InnovationSpec& innovation, std::size_t T,
                                       const std::vector<double>& percentiles,
                                       std::uint64_t seed,
                                       const std::string& out_csv = "");

// tiny key=value config reader (supports quoted strings, comma lists,
// [a, b] intervals and params = {sigma = 2.0})
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& line);

} // namespace qnc
