#include "qnc/quantreg.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qnc {

namespace {

// greedy selection of k linearly independent rows, preferring small |resid|
std::vector<int> initial_basis(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols());
    Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    Eigen::VectorXd resid = y - X * beta;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(resid(a)) < std::abs(resid(b)); });

    std::vector<int> basis;
    Eigen::MatrixXd Q(k, k); // orthonormalized picked rows
    int picked = 0;
    for (int idx : order) {
        Eigen::VectorXd v = X.row(idx).transpose();
        for (int j = 0; j < picked; ++j) v -= Q.col(j).dot(v) * Q.col(j);
        const double norm = v.norm();
        if (norm > 1e-9 * (1.0 + X.row(idx).norm())) {
            Q.col(picked) = v / norm;
            basis.push_back(idx);
            if (++picked == k) break;
        }
    }
    if (picked < k) throw std::invalid_argument("fit_qr: rank-deficient design");
    return basis;
}

} // namespace

QrSolution fit_qr_basis(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double tau,
                        const std::vector<int>* warm_start) {
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols());
    if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("fit_qr: tau must be in (0,1)");
    if (n < k) throw std::invalid_argument("fit_qr: fewer rows than parameters");

    std::vector<int> basis;
    if (warm_start && static_cast<int>(warm_start->size()) == k) basis = *warm_start;
    else basis = initial_basis(y, X);

    Eigen::MatrixXd B(k, k);
    Eigen::VectorXd yb(k);
    const double opt_tol = 1e-9;
    const double zero_tol = 1e-10 * (1.0 + y.cwiseAbs().maxCoeff());
    const int max_iter = 50 * n + 1000;

    Eigen::VectorXd beta;
    Eigen::VectorXd e;
    std::vector<char> in_basis(static_cast<std::size_t>(n));

    for (int iter = 0; iter < max_iter; ++iter) {
        for (int j = 0; j < k; ++j) {
            B.row(j) = X.row(basis[static_cast<std::size_t>(j)]);
            yb(j) = y(basis[static_cast<std::size_t>(j)]);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        if (std::abs(lu.determinant()) < 1e-300) {
            // singular warm start; rebuild from scratch
            basis = initial_basis(y, X);
            continue;
        }
        beta = lu.solve(yb);
        e = y - X * beta;
        Eigen::MatrixXd Binv = lu.inverse();
        Eigen::MatrixXd D = X * Binv; // D(t,h) = x_t' (B^-1 e_h)

        std::fill(in_basis.begin(), in_basis.end(), 0);
        for (int j = 0; j < k; ++j) in_basis[static_cast<std::size_t>(basis[static_cast<std::size_t>(j)])] = 1;

        // s_h = sum over nonbasic t of w_t D(t,h), w_t = (1-tau) if e<0 else -tau
        Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
        for (int t = 0; t < n; ++t) {
            if (in_basis[static_cast<std::size_t>(t)]) continue;
            const double w = e(t) < 0.0 ? (1.0 - tau) : -tau;
            for (int h = 0; h < k; ++h) s(h) += w * D(t, h);
        }

        // entering direction: minimize one-sided derivative over (h, sigma)
        int best_h = -1;
        double best_sigma = 0.0, best_deriv = -opt_tol;
        for (int h = 0; h < k; ++h) {
            const double d_plus = s(h) + (1.0 - tau);
            const double d_minus = -s(h) + tau;
            if (d_plus < best_deriv) { best_deriv = d_plus; best_h = h; best_sigma = 1.0; }
            if (d_minus < best_deriv) { best_deriv = d_minus; best_h = h; best_sigma = -1.0; }
        }
        if (best_h < 0) break; // optimal

        // line search along the direction; residual t crosses zero at alpha = e_t/g_t
        struct Crossing { double alpha, gain; int t; };
        std::vector<Crossing> crossings;
        crossings.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) {
            if (in_basis[static_cast<std::size_t>(t)]) continue;
            const double g = best_sigma * D(t, best_h);
            if (g == 0.0) continue;
            if (std::abs(e(t)) <= zero_tol) {
                crossings.push_back({0.0, std::abs(g), t});
            } else {
                const double a = e(t) / g;
                if (a > 0.0) crossings.push_back({a, std::abs(g), t});
            }
        }
        std::sort(crossings.begin(), crossings.end(), [](const Crossing& a, const Crossing& b) {
            return a.alpha != b.alpha ? a.alpha < b.alpha : a.t < b.t;
        });

        double deriv = best_deriv;
        int enter = -1;
        for (const Crossing& c : crossings) {
            deriv += c.gain;
            if (deriv >= 0.0) { enter = c.t; break; }
        }
        if (enter < 0) break; // objective flat to the horizon; treat as optimal
        basis[static_cast<std::size_t>(best_h)] = enter;
    }

    QrSolution sol;
    sol.coef = beta;
    sol.basis = basis;
    return sol;
}

Eigen::VectorXd fit_qr(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double tau) {
    return fit_qr_basis(y, X, tau).coef;
}

double check_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                  const Eigen::VectorXd& coef, double tau) {
    Eigen::VectorXd e = y - X * coef;
    double s = 0.0;
    for (int t = 0; t < e.size(); ++t)
        s += e(t) * (tau - (e(t) < 0.0 ? 1.0 : 0.0));
    return s;
}

double QarFit::coef_at(double tau, int j) const {
    const std::size_t n = tau_grid.size();
    if (tau <= tau_grid.front()) return coef(0, j);
    if (tau >= tau_grid.back()) return coef(static_cast<int>(n) - 1, j);
    auto it = std::upper_bound(tau_grid.begin(), tau_grid.end(), tau);
    const int hi = static_cast<int>(it - tau_grid.begin());
    const int lo = hi - 1;
    const double w = (tau - tau_grid[static_cast<std::size_t>(lo)]) /
                     (tau_grid[static_cast<std::size_t>(hi)] - tau_grid[static_cast<std::size_t>(lo)]);
    return (1.0 - w) * coef(lo, j) + w * coef(hi, j);
}

void lagged_design(const std::vector<double>& series, int p,
                   Eigen::VectorXd& y, Eigen::MatrixXd& X) {
    const int T = static_cast<int>(series.size());
    const int n = T - p;
    if (n < 1) throw std::invalid_argument("lagged_design: series too short");
    y.resize(n);
    X.resize(n, p + 1);
    for (int i = 0; i < n; ++i) {
        const int t = i + p;
        y(i) = series[static_cast<std::size_t>(t)];
        X(i, 0) = 1.0;
        for (int j = 1; j <= p; ++j) X(i, j) = series[static_cast<std::size_t>(t - j)];
    }
}

QarFit fit_qar_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                      const std::vector<double>& tau_grid) {
    const int n = static_cast<int>(y.size());
    const int k = static_cast<int>(X.cols());
    if (n <= 3 * k) throw std::invalid_argument("fit_qar: series too short");
    for (double t : tau_grid)
        if (!(t > 0.0 && t < 1.0)) throw std::domain_error("fit_qar: grid must be inside (0,1)");

    QarFit fit;
    fit.p = k - 1;
    fit.tau_grid = tau_grid;
    fit.X = X;
    fit.y = y;
    fit.sigma0 = X.transpose() * X / static_cast<double>(n);
    const int G = static_cast<int>(tau_grid.size());
    fit.coef.resize(G, k);
    fit.residuals.resize(G, n);

    std::vector<int> warm;
    for (int g = 0; g < G; ++g) {
        QrSolution sol = fit_qr_basis(y, X, tau_grid[static_cast<std::size_t>(g)],
                                      warm.empty() ? nullptr : &warm);
        warm = sol.basis;
        fit.coef.row(g) = sol.coef.transpose();
        fit.residuals.row(g) = (y - X * sol.coef).transpose();
    }
    return fit;
}

QarFit fit_qar(const std::vector<double>& series, int p, const std::vector<double>& tau_grid) {
    if (static_cast<int>(series.size()) <= 3 * (p + 1))
        throw std::invalid_argument("fit_qar: series too short");
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    lagged_design(series, p, y, X);
    return fit_qar_design(y, X, tau_grid);
}

std::vector<double> default_tau_grid() {
    std::vector<double> g(99);
    for (int i = 0; i < 99; ++i) g[static_cast<std::size_t>(i)] = (i + 1) / 100.0;
    return g;
}

double hall_sheather_bandwidth(double tau, std::size_t T, double alpha) {
    boost::math::normal_distribution<double> N;
    const double z = boost::math::quantile(N, 1.0 - alpha / 2.0);
    const double q = boost::math::quantile(N, tau);
    const double phi = boost::math::pdf(N, q);
    double h = std::pow(static_cast<double>(T), -1.0 / 3.0) * std::pow(z, 2.0 / 3.0) *
               std::pow(1.5 * phi * phi / (2.0 * q * q + 1.0), 1.0 / 3.0);
    // clip so [tau-h, tau+h] stays inside (0,1)
    const double margin = 1e-4;
    h = std::min(h, tau - margin);
    h = std::min(h, 1.0 - tau - margin);
    return std::max(h, margin);
}

double sparsity(const QarFit& fit, double tau) {
    const double h = hall_sheather_bandwidth(tau, static_cast<std::size_t>(fit.t_eff()));
    const double lo = std::max(tau - h, fit.tau_grid.front());
    const double hi = std::min(tau + h, fit.tau_grid.back());
    double s = (fit.coef_at(hi, 0) - fit.coef_at(lo, 0)) / (hi - lo);
    if (s <= 0.0) {
        // non-monotone intercept path: monotone rearrangement, then retry
        const int G = static_cast<int>(fit.tau_grid.size());
        std::vector<double> path(static_cast<std::size_t>(G));
        for (int g = 0; g < G; ++g) path[static_cast<std::size_t>(g)] = fit.coef(g, 0);
        std::sort(path.begin(), path.end());
        QarFit tmp;
        tmp.tau_grid = fit.tau_grid;
        tmp.coef.resize(G, 1);
        for (int g = 0; g < G; ++g) tmp.coef(g, 0) = path[static_cast<std::size_t>(g)];
        s = (tmp.coef_at(hi, 0) - tmp.coef_at(lo, 0)) / (hi - lo);
    }
    return std::min(std::max(s, 1e-300), 1e6); // f floored at 1e-6
}

Eigen::MatrixXd covariance(const QarFit& fit, double tau) {
    const double f = std::max(1.0 / sparsity(fit, tau), 1e-6);
    Eigen::MatrixXd s0inv = fit.sigma0.inverse();
    return s0inv / (f * f);
}

Eigen::VectorXd ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    return X.colPivHouseholderQr().solve(y);
}

std::vector<double> pacf(const std::vector<double>& series, int max_lag) {
    const int T = static_cast<int>(series.size());
    if (max_lag < 1 || max_lag >= T) throw std::invalid_argument("pacf: bad max_lag");
    double mu = std::accumulate(series.begin(), series.end(), 0.0) / T;
    std::vector<double> gamma(static_cast<std::size_t>(max_lag) + 1, 0.0);
    for (int k = 0; k <= max_lag; ++k) {
        double s = 0.0;
        for (int t = 0; t < T - k; ++t)
            s += (series[static_cast<std::size_t>(t)] - mu) * (series[static_cast<std::size_t>(t + k)] - mu);
        gamma[static_cast<std::size_t>(k)] = s / T;
    }
    if (gamma[0] <= 0.0) throw std::invalid_argument("pacf: constant series");

    // Durbin-Levinson
    std::vector<double> out(static_cast<std::size_t>(max_lag));
    std::vector<double> phi_prev(static_cast<std::size_t>(max_lag) + 1, 0.0);
    std::vector<double> phi_cur(static_cast<std::size_t>(max_lag) + 1, 0.0);
    double err = gamma[0];
    for (int k = 1; k <= max_lag; ++k) {
        double num = gamma[static_cast<std::size_t>(k)];
        for (int j = 1; j < k; ++j)
            num -= phi_prev[static_cast<std::size_t>(j)] * gamma[static_cast<std::size_t>(k - j)];
        const double a = err > 0.0 ? num / err : 0.0;
        phi_cur[static_cast<std::size_t>(k)] = a;
        for (int j = 1; j < k; ++j)
            phi_cur[static_cast<std::size_t>(j)] =
                phi_prev[static_cast<std::size_t>(j)] - a * phi_prev[static_cast<std::size_t>(k - j)];
        err *= (1.0 - a * a);
        out[static_cast<std::size_t>(k - 1)] = a;
        phi_prev = phi_cur;
    }
    return out;
}

int select_order(const std::vector<double>& series, int max_lag) {
    std::vector<double> pa = pacf(series, max_lag);
    const double band = 1.96 / std::sqrt(static_cast<double>(series.size()));
    int p = 0;
    for (int k = 1; k <= max_lag; ++k)
        if (std::abs(pa[static_cast<std::size_t>(k - 1)]) > band) p = k;
    return p;
}

} // namespace qnc
