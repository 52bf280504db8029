#pragma once

#include <Eigen/Dense>

#include <vector>

namespace qnc {

// Exact check-loss minimizer (exterior-point simplex on the LP formulation).
// Returns a vertex solution: at least X.cols() residuals are exactly zero.
Eigen::VectorXd fit_qr(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double tau);

// Variant carrying the optimal basis for warm starts across nearby tau.
struct QrSolution {
    Eigen::VectorXd coef;
    std::vector<int> basis;
};
QrSolution fit_qr_basis(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double tau,
                        const std::vector<int>* warm_start = nullptr);

double check_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                  const Eigen::VectorXd& coef, double tau);

struct QarFit {
    int p = 0;
    std::vector<double> tau_grid;
    Eigen::MatrixXd coef;      // grid x (p+1), intercept first
    Eigen::MatrixXd residuals; // grid x T_eff
    Eigen::MatrixXd X;         // T_eff x (p+1)
    Eigen::VectorXd y;         // T_eff
    Eigen::MatrixXd sigma0;    // X'X / T_eff

    int t_eff() const { return static_cast<int>(y.size()); }
    // linear interpolation of a coefficient path at tau (clamped to grid range)
    double coef_at(double tau, int j) const;
};

QarFit fit_qar(const std::vector<double>& series, int p, const std::vector<double>& tau_grid);
// same, but on an explicit design (used by the AR-ARCH experiments)
QarFit fit_qar_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                      const std::vector<double>& tau_grid);

std::vector<double> default_tau_grid(); // 0.01..0.99, 99 points

double hall_sheather_bandwidth(double tau, std::size_t T, double alpha = 0.05);

// difference-quotient sparsity 1/f(F^-1(tau)) from the intercept path, with
// monotone-rearrangement fallback; f floored at 1e-6
double sparsity(const QarFit& fit, double tau);

// Sigma1^-1 Sigma0 Sigma1^-1 under the location-model simplification
Eigen::MatrixXd covariance(const QarFit& fit, double tau);

Eigen::VectorXd ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X);

std::vector<double> pacf(const std::vector<double>& series, int max_lag);
int select_order(const std::vector<double>& series, int max_lag);

// lagged design: rows (1, Y_{t-1}, ..., Y_{t-p}) for t = p..T-1
void lagged_design(const std::vector<double>& series, int p,
                   Eigen::VectorXd& y, Eigen::MatrixXd& X);

} // namespace qnc
