#pragma once

#include "qnc/quantreg.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qnc {

struct SpecTestResult {
    std::string method; // "ev" or "eg"
    double statistic = 0.0;
    std::map<double, double> critical_values;     // level -> value
    std::vector<double> resample_distribution;    // subsample or bootstrap stats
    double level = 0.05;
    bool reject = false;
    std::string tuning;
};

enum class SubsampleCentering { None, SqrtBT, BT };

struct EvOptions {
    double k_sub = 4.0; // b = floor(k * T^{2/5})
    bool standardize = true;
    SubsampleCentering centering = SubsampleCentering::BT;
    double level = 0.05;
    int threads = 0;
    std::vector<double> tau_grid; // empty = default 99 points
};

enum class EgDensity { Location, KernelPerT };

struct EgOptions {
    int B = 200;
    double level = 0.05;
    EgDensity density = EgDensity::Location;
    int threads = 0;
    std::vector<double> tau_grid;
};

// closed-form CvM statistic of the residual characteristic-function process
// with standard normal weight over x
double ev_statistic(const QarFit& fit, bool standardize = true);

SpecTestResult ev_test(const std::vector<double>& series, int p, const EvOptions& opt,
                       std::uint64_t seed);
SpecTestResult ev_test_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                              const EvOptions& opt, std::uint64_t seed);

// kernel estimate of the conditional density at the fitted tau-quantile of row
// t, smoothing over M grid points tau_j drawn uniformly from the fit grid;
// h <= 0 selects 1.06 * sd_j(X_t' theta(tau_j)) * M^{-1/5}
double kernel_cond_density(const QarFit& fit, int t, double tau, int M, double h,
                           std::uint64_t seed);

// CvM statistic of the projected indicator-marked residual process
double eg_statistic(const QarFit& fit, EgDensity density = EgDensity::Location,
                    std::uint64_t seed = 0);

std::vector<double> multiplier_sample(std::size_t n, std::uint64_t seed);

SpecTestResult eg_test(const std::vector<double>& series, int p, const EgOptions& opt,
                       std::uint64_t seed);
SpecTestResult eg_test_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                              const EgOptions& opt, std::uint64_t seed);

int subsample_size(double k, std::size_t T);

} // namespace qnc
