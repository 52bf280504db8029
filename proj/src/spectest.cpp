#include "qnc/spectest.hpp"
#include "qnc/constancy.hpp"
#include "qnc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qnc {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

Eigen::MatrixXd studentized_design(const Eigen::MatrixXd& X, bool standardize) {
    Eigen::MatrixXd Xs = X;
    if (!standardize) return Xs;
    const int n = static_cast<int>(X.rows());
    for (int j = 1; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        double sd = std::sqrt((X.col(j).array() - mean).square().sum() / std::max(1, n - 1));
        if (sd <= 0.0) sd = 1.0;
        Xs.col(j) = (X.col(j).array() - mean) / sd;
    }
    return Xs;
}

Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::MatrixXd& Xs) {
    const int n = static_cast<int>(Xs.rows());
    Eigen::VectorXd sq = Xs.rowwise().squaredNorm();
    Eigen::MatrixXd D = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                        2.0 * (Xs * Xs.transpose());
    return (-0.5 * D.cwiseMax(0.0)).array().exp().matrix();
}

Eigen::MatrixXd psi_matrix(const QarFit& fit) {
    const int G = static_cast<int>(fit.tau_grid.size());
    const int n = fit.t_eff();
    Eigen::MatrixXd Psi(G, n);
    for (int g = 0; g < G; ++g)
        for (int t = 0; t < n; ++t)
            Psi(g, t) = (fit.residuals(g, t) <= 0.0 ? 1.0 : 0.0) - fit.tau_grid[static_cast<std::size_t>(g)];
    return Psi;
}

int thread_count(int requested) {
    if (requested > 0) return requested;
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    return hw > 0 ? hw : 1;
}

// conditional density of Y|X_t at the tau_g fitted quantile, smoothing the
// fitted quantile path over the whole grid
double cond_density_grid(const Eigen::VectorXd& fitted_t, int g) {
    const int G = static_cast<int>(fitted_t.size());
    const double mean = fitted_t.mean();
    double sd = std::sqrt((fitted_t.array() - mean).square().sum() / std::max(1, G - 1));
    double h = 1.06 * sd * std::pow(static_cast<double>(G), -0.2);
    h = std::max(h, 1e-4);
    double s = 0.0;
    for (int j = 0; j < G; ++j) {
        const double z = (fitted_t(g) - fitted_t(j)) / h;
        s += kInvSqrt2Pi * std::exp(-0.5 * z * z);
    }
    return std::max(s / (G * h), 1e-6);
}

struct EgCore {
    double stat = 0.0;
    Eigen::VectorXd boot; // B bootstrap replicates (empty if B == 0)
};

EgCore eg_core(const QarFit& fit, EgDensity density, int B, std::uint64_t seed, int threads) {
    const int n = fit.t_eff();
    const int G = static_cast<int>(fit.tau_grid.size());
    const int k = fit.p + 1;
    const double sqn = std::sqrt(static_cast<double>(n));

    // componentwise indicator over the lag coordinates
    Eigen::MatrixXd Ind = Eigen::MatrixXd::Ones(n, n);
    for (int c = 1; c < k; ++c)
        for (int j = 0; j < n; ++j)
            for (int t = 0; t < n; ++t)
                if (fit.X(t, c) > fit.X(j, c)) Ind(j, t) = 0.0;

    Eigen::MatrixXd Psi = psi_matrix(fit);

    Eigen::MatrixXd Wmat;
    if (B > 0) {
        Wmat.resize(n, B);
        const double omega = (std::sqrt(5.0) + 1.0) / 2.0;
        const double pr = omega / std::sqrt(5.0);
        Rng rng(seed);
        for (int t = 0; t < n; ++t)
            for (int b = 0; b < B; ++b)
                Wmat(t, b) = rng.next_uniform() < pr ? 1.0 - omega : omega;
    }

    // location-model projection (tau-independent): proj = Ind - (Ind X / n) A^-1 X'
    Eigen::MatrixXd proj_loc;
    Eigen::MatrixXd fitted; // n x G fitted quantiles, for the per-t density mode
    if (density == EgDensity::Location) {
        Eigen::MatrixXd A = fit.sigma0;
        A += 1e-10 * A.trace() * Eigen::MatrixXd::Identity(k, k);
        Eigen::MatrixXd D = Ind * fit.X / static_cast<double>(n);
        proj_loc = Ind - D * A.ldlt().solve(fit.X.transpose());
    } else {
        fitted = fit.X * fit.coef.transpose();
    }

    EgCore out;
    if (B > 0) out.boot = Eigen::VectorXd::Zero(B);
    std::mutex mtx;
    std::atomic<int> next{0};
    auto worker = [&]() {
        double stat_loc = 0.0;
        Eigen::VectorXd boot_loc = B > 0 ? Eigen::VectorXd::Zero(B) : Eigen::VectorXd();
        for (;;) {
            const int g = next.fetch_add(1);
            if (g >= G) break;
            Eigen::MatrixXd H;
            if (density == EgDensity::Location) {
                H = proj_loc.array().rowwise() * Psi.row(g).array();
            } else {
                // per-t kernel-density-weighted projection
                Eigen::MatrixXd delta(n, k); // delta_t = f_t(tau_g) X_t
                for (int t = 0; t < n; ++t)
                    delta.row(t) = cond_density_grid(fitted.row(t).transpose(), g) * fit.X.row(t);
                Eigen::MatrixXd A = delta.transpose() * delta / static_cast<double>(n);
                A += 1e-8 * A.trace() * Eigen::MatrixXd::Identity(k, k);
                Eigen::MatrixXd D = Ind * delta / static_cast<double>(n);
                Eigen::MatrixXd proj = Ind - D * A.ldlt().solve(delta.transpose());
                H = proj.array().rowwise() * Psi.row(g).array();
            }
            Eigen::VectorXd S = H.rowwise().sum() / sqn;
            stat_loc += S.squaredNorm() / static_cast<double>(n) / G;
            if (B > 0) {
                Eigen::MatrixXd V = H * Wmat / sqn;
                boot_loc += V.colwise().squaredNorm().transpose() / static_cast<double>(n) / G;
            }
        }
        std::lock_guard<std::mutex> lock(mtx);
        out.stat += stat_loc;
        if (B > 0) out.boot += boot_loc;
    };
    std::vector<std::thread> pool;
    const int nt = std::min(thread_count(threads), G);
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

} // namespace

int subsample_size(double k, std::size_t T) {
    return static_cast<int>(std::floor(k * std::pow(static_cast<double>(T), 0.4)));
}

double ev_statistic(const QarFit& fit, bool standardize) {
    const int n = fit.t_eff();
    const int G = static_cast<int>(fit.tau_grid.size());
    Eigen::MatrixXd K = gaussian_kernel_matrix(studentized_design(fit.X, standardize));
    Eigen::MatrixXd Psi = psi_matrix(fit);
    Eigen::MatrixXd M = Psi * K; // G x n
    double stat = 0.0;
    for (int g = 0; g < G; ++g) stat += M.row(g).dot(Psi.row(g));
    return stat / (static_cast<double>(G) * static_cast<double>(n));
}

namespace {

SpecTestResult ev_core(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int p,
                       const EvOptions& opt, std::uint64_t /*seed*/) {
    const std::vector<double> grid = opt.tau_grid.empty() ? default_tau_grid() : opt.tau_grid;
    const int n = static_cast<int>(y.size());
    const std::size_t T = static_cast<std::size_t>(n + p); // underlying series length
    const int b = subsample_size(opt.k_sub, T);
    if (b <= 3 * (p + 1)) throw std::invalid_argument("ev_test: subsample size too small");
    const int nb = b - p; // rows per subsample window
    if (nb >= n) throw std::invalid_argument("ev_test: subsample size not below sample size");

    QarFit full = fit_qar_design(y, X, grid);
    const double stat = ev_statistic(full, opt.standardize);

    const int W = n - nb + 1; // overlapping windows over the design rows
    std::vector<double> sub(static_cast<std::size_t>(W));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int w = next.fetch_add(1);
            if (w >= W) break;
            QarFit f = fit_qar_design(y.segment(w, nb), X.middleRows(w, nb), grid);
            sub[static_cast<std::size_t>(w)] = ev_statistic(f, opt.standardize);
        }
    };
    std::vector<std::thread> pool;
    const int nt = std::min(thread_count(opt.threads), W);
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    double center = 0.0;
    const double ratio = static_cast<double>(b) / static_cast<double>(T);
    if (opt.centering == SubsampleCentering::BT) center = ratio * stat;
    else if (opt.centering == SubsampleCentering::SqrtBT) center = std::sqrt(ratio) * stat;
    for (double& s : sub) s -= center;

    SpecTestResult res;
    res.method = "ev";
    res.statistic = stat;
    res.resample_distribution = sub;
    res.level = opt.level;
    for (double lv : {0.01, 0.05, 0.10})
        res.critical_values[lv] = empirical_quantile(sub, 1.0 - lv);
    res.reject = stat > empirical_quantile(sub, 1.0 - opt.level);
    std::ostringstream tn;
    tn << "b=" << b << " windows=" << W << " centering="
       << (opt.centering == SubsampleCentering::None
               ? "none"
               : (opt.centering == SubsampleCentering::BT ? "b/T" : "sqrt(b/T)"));
    res.tuning = tn.str();
    return res;
}

} // namespace

SpecTestResult ev_test(const std::vector<double>& series, int p, const EvOptions& opt,
                       std::uint64_t seed) {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    lagged_design(series, p, y, X);
    return ev_core(y, X, p, opt, seed);
}

SpecTestResult ev_test_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                              const EvOptions& opt, std::uint64_t seed) {
    return ev_core(y, X, static_cast<int>(X.cols()) - 1, opt, seed);
}

double kernel_cond_density(const QarFit& fit, int t, double tau, int M, double h,
                           std::uint64_t seed) {
    if (t < 0 || t >= fit.t_eff()) throw std::invalid_argument("kernel_cond_density: bad row index");
    const int G = static_cast<int>(fit.tau_grid.size());
    Rng rng(seed);
    Eigen::VectorXd xt = fit.X.row(t).transpose();
    std::vector<double> fv(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        int idx = std::min(G - 1, static_cast<int>(rng.next_uniform() * G));
        fv[static_cast<std::size_t>(j)] = fit.coef.row(idx) * xt;
    }
    double center = 0.0;
    for (int j = 0; j < fit.p + 1; ++j) center += fit.coef_at(tau, j) * xt(j);

    if (h <= 0.0) {
        double mean = 0.0;
        for (double v : fv) mean += v;
        mean /= M;
        double ss = 0.0;
        for (double v : fv) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / std::max(1, M - 1));
        h = std::max(1.06 * sd * std::pow(static_cast<double>(M), -0.2), 1e-4);
    }
    double s = 0.0;
    for (double v : fv) {
        const double z = (center - v) / h;
        s += kInvSqrt2Pi * std::exp(-0.5 * z * z);
    }
    return std::max(s / (M * h), 1e-6);
}

double eg_statistic(const QarFit& fit, EgDensity density, std::uint64_t seed) {
    return eg_core(fit, density, 0, seed, 0).stat;
}

std::vector<double> multiplier_sample(std::size_t n, std::uint64_t seed) {
    const double omega = (std::sqrt(5.0) + 1.0) / 2.0;
    const double pr = omega / std::sqrt(5.0);
    Rng rng(seed);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = rng.next_uniform() < pr ? 1.0 - omega : omega;
    return out;
}

namespace {

SpecTestResult eg_run(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                      const EgOptions& opt, std::uint64_t seed) {
    if (opt.B < 200) throw std::invalid_argument("eg_test: B must be >= 200");
    const std::vector<double> grid = opt.tau_grid.empty() ? default_tau_grid() : opt.tau_grid;
    QarFit fit = fit_qar_design(y, X, grid);
    EgCore core = eg_core(fit, opt.density, opt.B, seed, opt.threads);

    SpecTestResult res;
    res.method = "eg";
    res.statistic = core.stat;
    res.resample_distribution.assign(core.boot.data(), core.boot.data() + core.boot.size());
    res.level = opt.level;
    for (double lv : {0.01, 0.05, 0.10})
        res.critical_values[lv] = empirical_quantile(res.resample_distribution, 1.0 - lv);
    res.reject = core.stat > empirical_quantile(res.resample_distribution, 1.0 - opt.level);
    std::ostringstream tn;
    tn << "B=" << opt.B << " density="
       << (opt.density == EgDensity::Location ? "location" : "kernel");
    res.tuning = tn.str();
    return res;
}

} // namespace

SpecTestResult eg_test(const std::vector<double>& series, int p, const EgOptions& opt,
                       std::uint64_t seed) {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    lagged_design(series, p, y, X);
    return eg_run(y, X, opt, seed);
}

SpecTestResult eg_test_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                              const EgOptions& opt, std::uint64_t seed) {
    return eg_run(y, X, opt, seed);
}

} // namespace qnc
