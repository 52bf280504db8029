#pragma once

#include "qnc/quantreg.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qnc {

enum class KsNorm { L1, Linf, L2 };

struct ConstancyOptions {
    double lo = 0.05;
    double hi = 0.95;
    double level = 0.05;
    KsNorm norm = KsNorm::L1;
    int cv_steps = 2000;
    int cv_reps = 50000;
    std::uint64_t cv_seed = 1770511;
    std::string cache_path; // critical-value cache file; empty = no caching
    int threads = 0;        // 0 = hardware concurrency
    // precomputed critical values (level -> value); skips simulation when set
    std::map<double, double> preset_cv;
};

struct ConstancyResult {
    double ks_raw = 0.0;
    double ks_transformed = 0.0;
    std::map<double, double> critical_values; // level -> value
    double lo = 0.0, hi = 0.0;
    Eigen::VectorXd phi_hat;
    double level = 0.05;
    bool reject = false;
};

struct ScoreEstimates {
    std::vector<double> fhat;  // f(F^-1(tau)) on the grid
    std::vector<double> score; // f'(F^-1(tau)) / f(F^-1(tau))
};

// standardized slope process V_T(tau) on the fit grid restricted to [lo,hi];
// fhat gives the density scaling per grid point
Eigen::MatrixXd v_process(const QarFit& fit, const Eigen::VectorXd& phi_hat,
                          const std::vector<double>& fhat, double lo, double hi);
// convenience overload using the sparsity-based density estimate
Eigen::MatrixXd v_process(const QarFit& fit, const Eigen::VectorXd& phi_hat,
                          double lo, double hi);

// density and score at empirical residual quantiles, from the median-fit
// residuals via adaptive KDE
ScoreEstimates score_estimates(const QarFit& fit, double lo, double hi);

// martingale transform of V on a uniform grid with score vector g = (1, score)
Eigen::MatrixXd khmaladze_transform(const Eigen::MatrixXd& V,
                                    const std::vector<double>& score,
                                    const std::vector<double>& grid);

// (1-level)-quantile of sup over [lo,hi] of the norm of p independent Brownian
// motions, by Gaussian random walk; cached on disk when cache_path nonempty
double critical_value(int p, double lo, double hi, double level, int reps, int steps,
                      std::uint64_t seed, KsNorm norm = KsNorm::L1,
                      const std::string& cache_path = "", int threads = 0);

ConstancyResult constancy_test(const std::vector<double>& series, int p,
                               const ConstancyOptions& opt);
// variant on an explicit design (AR-ARCH experiments); slopes are all columns
// of X except the intercept
ConstancyResult constancy_test_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                      const ConstancyOptions& opt);

// tau grid lo..hi with step 0.01
std::vector<double> interval_grid(double lo, double hi);

// linear-interpolation empirical quantile
double empirical_quantile(std::vector<double> sorted_or_not, double p);

} // namespace qnc
