#include "qnc/simulate.hpp"
#include "qnc/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qnc {

namespace {

// truncation horizon so the dropped weight tail is below tol
int horizon(double radius, double tol) {
    if (radius <= 0.0) return 8;
    // tail of sum c^j beyond J is c^J/(1-c); solve c^J < tol*(1-c)
    double J = std::log(tol * (1.0 - radius)) / std::log(radius);
    int j = static_cast<int>(std::ceil(J));
    return std::max(j, 16);
}

double model_radius(const MarModel& m) {
    double r = 0.0;
    if (!m.phi.empty()) r = std::max(r, companion_spectral_radius(m.phi));
    if (!m.psi.empty()) r = std::max(r, companion_spectral_radius(m.psi));
    return r;
}

} // namespace

double companion_spectral_radius(const std::vector<double>& coef) {
    const int r = static_cast<int>(coef.size());
    if (r == 0) return 0.0;
    if (r == 1) return std::abs(coef[0]);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(r, r);
    for (int j = 0; j < r; ++j) C(0, j) = coef[static_cast<std::size_t>(j)];
    for (int i = 1; i < r; ++i) C(i, i - 1) = 1.0;
    Eigen::VectorXcd ev = C.eigenvalues();
    double rad = 0.0;
    for (int i = 0; i < r; ++i) rad = std::max(rad, std::abs(ev(i)));
    return rad;
}

MarModel::MarModel(std::vector<double> phi_, std::vector<double> psi_, InnovationSpec innov)
    : phi(std::move(phi_)), psi(std::move(psi_)), innovation(innov) {
    if (!phi.empty() && companion_spectral_radius(phi) >= 1.0 - 1e-10)
        throw std::invalid_argument("MarModel: causal polynomial has a root inside the unit circle");
    if (!psi.empty() && companion_spectral_radius(psi) >= 1.0 - 1e-10)
        throw std::invalid_argument("MarModel: non-causal polynomial has a root inside the unit circle");
}

std::map<int, double> two_sided_weights(const MarModel& model, double tol) {
    // one-sided expansions: a_j for 1/phi(L) (j >= 0), b_j for 1/psi(L^-1) (j <= 0)
    const double rad = model_radius(model);
    if (rad >= 1.0) throw std::invalid_argument("two_sided_weights: non-stationary model");
    const int J = horizon(rad, tol);

    std::vector<double> a(static_cast<std::size_t>(J) + 1, 0.0);
    a[0] = 1.0;
    for (int j = 1; j <= J; ++j)
        for (int i = 1; i <= std::min<int>(j, model.r()); ++i)
            a[static_cast<std::size_t>(j)] += model.phi[static_cast<std::size_t>(i - 1)] * a[static_cast<std::size_t>(j - i)];

    std::vector<double> b(static_cast<std::size_t>(J) + 1, 0.0); // b[k] = weight at lag -k
    b[0] = 1.0;
    for (int k = 1; k <= J; ++k)
        for (int i = 1; i <= std::min<int>(k, model.s()); ++i)
            b[static_cast<std::size_t>(k)] += model.psi[static_cast<std::size_t>(i - 1)] * b[static_cast<std::size_t>(k - i)];

    std::map<int, double> rho;
    for (int j = -J; j <= J; ++j) {
        double w = 0.0;
        // rho_j = sum_k a_{j+k} b_k over valid k
        for (int k = std::max(0, -j); k <= J - std::max(0, j); ++k) {
            int aj = j + k;
            if (aj < 0 || aj > J) continue;
            w += a[static_cast<std::size_t>(aj)] * b[static_cast<std::size_t>(k)];
        }
        if (w != 0.0) rho[j] = w;
    }
    return rho;
}

std::vector<double> simulate_mar(const MarModel& model, std::size_t T, std::uint64_t seed) {
    if (T < 1) throw std::invalid_argument("simulate_mar: T must be >= 1");
    const double rad = model_radius(model);
    if (rad >= 1.0) throw std::invalid_argument("simulate_mar: non-stationary model");
    const int J = horizon(rad, 1e-12);
    const std::int64_t lo = 1 - static_cast<std::int64_t>(J);
    const std::int64_t hi = static_cast<std::int64_t>(T) + J;
    const std::size_t n = static_cast<std::size_t>(hi - lo + 1);

    // innovations keyed by absolute time index so output is J-invariant
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i)
        u[i] = draw_at(model.innovation, seed, lo + static_cast<std::int64_t>(i));

    // backward recursion for the non-causal part: Z_t = psi-combination of future Z + u_t
    std::vector<double> z(n, 0.0);
    const int s = model.s();
    for (std::int64_t i = static_cast<std::int64_t>(n) - 1; i >= 0; --i) {
        double v = u[static_cast<std::size_t>(i)];
        for (int k = 1; k <= s; ++k)
            if (i + k < static_cast<std::int64_t>(n))
                v += model.psi[static_cast<std::size_t>(k - 1)] * z[static_cast<std::size_t>(i + k)];
        z[static_cast<std::size_t>(i)] = v;
    }

    // forward recursion for the causal part: Y_t = phi-combination of past Y + Z_t
    std::vector<double> y(n, 0.0);
    const int r = model.r();
    for (std::size_t i = 0; i < n; ++i) {
        double v = z[i];
        for (int k = 1; k <= r; ++k)
            if (static_cast<std::int64_t>(i) - k >= 0)
                v += model.phi[static_cast<std::size_t>(k - 1)] * y[i - static_cast<std::size_t>(k)];
        y[i] = v;
    }

    return std::vector<double>(y.begin() + (0 - lo + 1), y.begin() + (0 - lo + 1) + static_cast<std::int64_t>(T));
}

std::vector<double> simulate_allpass(double psi, const InnovationSpec& innovation,
                                     std::size_t T, std::uint64_t seed) {
    if (!(std::abs(psi) < 1.0) || psi == 0.0)
        throw std::invalid_argument("simulate_allpass: psi must be in (-1,1), nonzero");
    const int J = horizon(std::abs(psi), 1e-12);
    std::vector<double> rho(static_cast<std::size_t>(J) + 1);
    for (int j = 0; j <= J; ++j)
        rho[static_cast<std::size_t>(j)] = std::pow(psi, j) - std::pow(psi, j + 2);

    std::vector<double> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::int64_t at = static_cast<std::int64_t>(t) + 1;
        double v = -psi * draw_at(innovation, seed, at + 1); // rho_{-1} term
        for (int j = 0; j <= J; ++j)
            v += rho[static_cast<std::size_t>(j)] * draw_at(innovation, seed, at - j);
        out[t] = v;
    }
    return out;
}

ArArchPath simulate_ar_arch(const MarModel& model, const ArchSpec& arch,
                            std::size_t T, std::uint64_t seed) {
    if (model.p() != 1)
        throw std::invalid_argument("simulate_ar_arch: model must be MAR(1,0) or MAR(0,1)");
    if (arch.gamma.size() != 2 || arch.gamma[0] <= 0.0 || arch.gamma[1] < 0.0)
        throw std::invalid_argument("simulate_ar_arch: need gamma = (g0 > 0, g1 >= 0)");
    const bool causal = model.r() == 1;
    const double coef = causal ? model.phi[0] : model.psi[0];
    const int J = horizon(std::abs(coef), 1e-12) + 64;
    const std::int64_t lo = 1 - static_cast<std::int64_t>(J);
    const std::int64_t hi = static_cast<std::int64_t>(T) + J;
    const std::size_t n = static_cast<std::size_t>(hi - lo + 1);

    // scale recursion runs forward regardless of causal direction
    std::vector<double> v(n);
    double vprev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sigma = arch.gamma[0] + arch.gamma[1] * std::abs(vprev);
        v[i] = sigma * draw_at(model.innovation, seed, lo + static_cast<std::int64_t>(i));
        vprev = v[i];
    }

    std::vector<double> y(n, 0.0);
    if (causal) {
        for (std::size_t i = 0; i < n; ++i)
            y[i] = (i > 0 ? coef * y[i - 1] : 0.0) + v[i];
    } else {
        // Y*_t = psi Y*_{t+1} - psi v_{t+1}, backward from zero terminal
        for (std::int64_t i = static_cast<std::int64_t>(n) - 2; i >= 0; --i)
            y[static_cast<std::size_t>(i)] =
                coef * (y[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i + 1)]);
    }

    ArArchPath out;
    const std::size_t off = static_cast<std::size_t>(0 - lo + 1);
    out.y.assign(y.begin() + static_cast<std::int64_t>(off), y.begin() + static_cast<std::int64_t>(off + T));
    out.v.assign(v.begin() + static_cast<std::int64_t>(off), v.begin() + static_cast<std::int64_t>(off + T));
    return out;
}

} // namespace qnc
