#include "qnc/moments.hpp"
#include "qnc/distributions.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qnc {

namespace {

// coefficients of the product polynomial phi(z)*psi(z), returned as the
// combined AR coefficient vector c with product = 1 - sum c_k z^k
std::vector<double> combined_ar_coefficients(const MarModel& m) {
    std::vector<double> a(m.phi.size() + 1, 0.0);
    a[0] = 1.0;
    for (std::size_t i = 0; i < m.phi.size(); ++i) a[i + 1] = -m.phi[i];
    std::vector<double> b(m.psi.size() + 1, 0.0);
    b[0] = 1.0;
    for (std::size_t i = 0; i < m.psi.size(); ++i) b[i + 1] = -m.psi[i];
    std::vector<double> prod(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) prod[i + j] += a[i] * b[j];
    std::vector<double> coef(prod.size() - 1);
    for (std::size_t k = 1; k < prod.size(); ++k) coef[k - 1] = -prod[k];
    return coef;
}

} // namespace

double acgf(const MarModel& model, int h) {
    double sigma2;
    try {
        sigma2 = central_moment(model.innovation, 2);
    } catch (const std::domain_error&) {
        throw std::domain_error("acgf: innovation variance does not exist");
    }
    std::vector<double> coef = combined_ar_coefficients(model);
    const double rad = companion_spectral_radius(coef);
    if (rad >= 1.0) throw std::invalid_argument("acgf: non-stationary model");

    const double tol = 1e-16;
    int J = 64;
    if (rad > 0.0)
        J = std::max<int>(64, static_cast<int>(std::ceil(std::log(tol * (1.0 - rad)) / std::log(rad))));
    std::vector<double> c(static_cast<std::size_t>(J) + 1, 0.0);
    c[0] = 1.0;
    for (int j = 1; j <= J; ++j)
        for (int i = 1; i <= std::min<int>(j, static_cast<int>(coef.size())); ++i)
            c[static_cast<std::size_t>(j)] += coef[static_cast<std::size_t>(i - 1)] * c[static_cast<std::size_t>(j - i)];

    const int ah = std::abs(h);
    double g = 0.0;
    for (int j = 0; j + ah <= J; ++j)
        g += c[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(j + ah)];
    return sigma2 * g;
}

std::map<int, double> allpass_weights(double psi, double tol) {
    if (!(std::abs(psi) < 1.0)) throw std::invalid_argument("allpass_weights: |psi| must be < 1");
    std::map<int, double> rho;
    rho[-1] = -psi;
    double pj = 1.0; // psi^j
    const double p2 = psi * psi;
    for (int j = 0;; ++j) {
        double w = pj * (1.0 - p2);
        rho[j] = w;
        pj *= psi;
        if (std::abs(pj) < tol && j > 2) break;
        if (j > 20000) break;
    }
    return rho;
}

double allpass_sq_acf(double psi, double kappa4, double sigma2, int h) {
    if (h == 0) return 1.0;
    std::map<int, double> rho = allpass_weights(psi);
    double s22 = 0.0, s11 = 0.0, s4 = 0.0;
    for (auto [j, w] : rho) {
        s4 += w * w * w * w;
        auto it = rho.find(j + std::abs(h));
        if (it != rho.end()) {
            s22 += w * w * it->second * it->second;
            s11 += w * it->second;
        }
    }
    const double s4pow = sigma2 * sigma2;
    return (kappa4 * s22 + 2.0 * s4pow * s11 * s11) / (kappa4 * s4 + 2.0 * s4pow);
}

double allpass_skewness_factor(double psi) {
    if (!(std::abs(psi) < 1.0)) throw std::invalid_argument("allpass_skewness_factor: |psi| must be < 1");
    return 1.0 - 3.0 * psi * psi * (psi + 1.0) / (psi * psi + psi + 1.0);
}

// Closed form re-derived from the joint cumulants of the filtered series; the
// published alpha_2..alpha_4 disagree with brute-force simulation, this set
// matches it (alpha_1 coincides with the published one).
double allpass_cube_cov_lag1(double psi, double Eu2, double Eu3, double Eu4, double Eu6) {
    const double p2 = psi * psi;
    const double p3 = psi * p2;
    const double p4 = p2 * p2;
    const double p5 = p3 * p2;
    const double p6 = p3 * p3;
    const double q = std::pow(1.0 - p2, 3);
    const double d1 = p4 + p2 + 1.0;      // (psi^2-psi+1)(psi^2+psi+1)
    const double dm = p2 - psi + 1.0;
    const double dp = p2 + psi + 1.0;
    const double a1 = -3.0 * p5 * q / d1;
    const double a2 = 3.0 * p3 * (1.0 - p2) * (15.0 * p6 - 31.0 * p4 + 14.0 * p2 - 1.0) / d1;
    const double a3 = 3.0 * p2 * q *
                      (10.0 * p5 + 10.0 * p4 + 4.0 * p3 + 3.0 * p2 - 3.0 * psi - 3.0) /
                      (dm * dp * dp);
    const double a4 = -9.0 * p3 * (1.0 - p2) * (10.0 * p6 - 21.0 * p4 + 9.0 * p2 - 1.0) / d1;
    return a1 * Eu6 + (a2 * Eu4 + a4 * Eu2 * Eu2) * Eu2 + a3 * Eu3 * Eu3;
}

} // namespace qnc
