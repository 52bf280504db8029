#pragma once

#include "qnc/simulate.hpp"

#include <map>

namespace qnc {

// autocovariance at lag h via the equivalent all-causal representation
double acgf(const MarModel& model, int h);

// all-pass filter weights rho_{-1..J}: rho_{-1} = -psi, rho_j = psi^j - psi^{j+2}
std::map<int, double> allpass_weights(double psi, double tol = 1e-14);

// Corr(u~^2_t, u~^2_{t+h}) for the all-pass filtered series
double allpass_sq_acf(double psi, double kappa4, double sigma2, int h);

// multiplicative factor in E(u~^3) = factor * E(u^3)
double allpass_skewness_factor(double psi);

// Cov(u~^3_t, u~^3_{t+1}) from moments of u up to order 6
double allpass_cube_cov_lag1(double psi, double Eu2, double Eu3, double Eu4, double Eu6);

} // namespace qnc
