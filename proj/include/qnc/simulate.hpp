#pragma once

#include "qnc/distributions.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace qnc {

// MAR(r,s): phi(L) psi(L^-1) Y_t = u_t, both polynomials with roots strictly
// outside the unit circle.
struct MarModel {
    std::vector<double> phi; // causal coefficients phi_1..phi_r
    std::vector<double> psi; // non-causal coefficients psi_1..psi_s
    InnovationSpec innovation;

    MarModel() = default;
    MarModel(std::vector<double> phi_, std::vector<double> psi_, InnovationSpec innov);

    int r() const { return static_cast<int>(phi.size()); }
    int s() const { return static_cast<int>(psi.size()); }
    int p() const { return r() + s(); }
};

struct ArchSpec {
    std::vector<double> gamma; // gamma_0..gamma_q, gamma_0 > 0, rest >= 0
};

// spectral radius of the companion matrix of 1 - c1 z - ... - cr z^r; < 1 iff
// all roots outside the unit circle
double companion_spectral_radius(const std::vector<double>& coef);

// finite truncation of the two-sided MA weights rho_j of Eq. Y_t = sum rho_j u_{t-j}
std::map<int, double> two_sided_weights(const MarModel& model, double tol = 1e-12);

std::vector<double> simulate_mar(const MarModel& model, std::size_t T, std::uint64_t seed);

// all-pass filtered innovations: rho_{-1} = -psi, rho_j = psi^j - psi^{j+2}, j >= 0
std::vector<double> simulate_allpass(double psi, const InnovationSpec& innovation,
                                     std::size_t T, std::uint64_t seed);

struct ArArchPath {
    std::vector<double> y;
    std::vector<double> v; // true scaled innovations v_t = sigma_t u_t
};

// AR(1)/non-causal AR(1) with linear-ARCH scale sigma_t = g0 + g1|v_{t-1}|
ArArchPath simulate_ar_arch(const MarModel& model, const ArchSpec& arch,
                            std::size_t T, std::uint64_t seed);

} // namespace qnc
