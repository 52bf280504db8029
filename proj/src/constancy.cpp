#include "qnc/constancy.hpp"
#include "qnc/kde.hpp"
#include "qnc/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qnc {

namespace {

double path_norm(const Eigen::VectorXd& v, KsNorm norm) {
    switch (norm) {
        case KsNorm::L1: return v.cwiseAbs().sum();
        case KsNorm::Linf: return v.cwiseAbs().maxCoeff();
        case KsNorm::L2: return v.norm();
    }
    return 0.0;
}

std::string cache_key(int p, double lo, double hi, double level, int steps, int reps,
                      std::uint64_t seed, KsNorm norm) {
    std::ostringstream os;
    os << p << " " << lo << " " << hi << " " << level << " " << steps << " " << reps
       << " " << seed << " " << static_cast<int>(norm);
    return os.str();
}

// matrix inverse square root of a symmetric positive definite matrix
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) <= 0.0) throw std::invalid_argument("v_process: singular standardizer");
        ev(i) = 1.0 / std::sqrt(ev(i));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<int> grid_indices(const std::vector<double>& grid, double lo, double hi) {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(grid.size()); ++i)
        if (grid[static_cast<std::size_t>(i)] >= lo - 1e-9 && grid[static_cast<std::size_t>(i)] <= hi + 1e-9)
            idx.push_back(i);
    return idx;
}

} // namespace

std::vector<double> interval_grid(double lo, double hi) {
    std::vector<double> g;
    for (int k = 0;; ++k) {
        double t = lo + 0.01 * k;
        if (t > hi + 1e-9) break;
        g.push_back(std::round(t * 100.0) / 100.0);
    }
    return g;
}

double empirical_quantile(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    double idx = p * static_cast<double>(n - 1);
    std::size_t lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min(lo + 1, n - 1);
    double w = idx - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
}

Eigen::MatrixXd v_process(const QarFit& fit, const Eigen::VectorXd& phi_hat,
                          const std::vector<double>& fhat, double lo, double hi) {
    const int p = fit.p;
    if (p < 1) throw std::invalid_argument("v_process: need at least one slope");
    std::vector<int> idx = grid_indices(fit.tau_grid, lo, hi);
    if (idx.empty()) throw std::invalid_argument("v_process: grid does not cover interval");
    if (fhat.size() != idx.size()) throw std::invalid_argument("v_process: fhat size mismatch");

    // standardizer: inverse square root of the slope block of Sigma0^-1
    Eigen::MatrixXd s0inv = fit.sigma0.inverse();
    Eigen::MatrixXd M = s0inv.block(1, 1, p, p);
    Eigen::MatrixXd Minvhalf = inv_sqrt(M);

    const double sqT = std::sqrt(static_cast<double>(fit.t_eff()));
    Eigen::MatrixXd V(static_cast<int>(idx.size()), p);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        Eigen::VectorXd d = fit.coef.row(idx[i]).segment(1, p).transpose() - phi_hat;
        V.row(static_cast<int>(i)) = (sqT * fhat[i]) * (Minvhalf * d).transpose();
    }
    return V;
}

Eigen::MatrixXd v_process(const QarFit& fit, const Eigen::VectorXd& phi_hat,
                          double lo, double hi) {
    std::vector<int> idx = grid_indices(fit.tau_grid, lo, hi);
    std::vector<double> fhat(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        fhat[i] = 1.0 / sparsity(fit, fit.tau_grid[static_cast<std::size_t>(idx[i])]);
    return v_process(fit, phi_hat, fhat, lo, hi);
}

ScoreEstimates score_estimates(const QarFit& fit, double lo, double hi) {
    // residuals from the grid point nearest the median
    int med = 0;
    double best = 1e9;
    for (int g = 0; g < static_cast<int>(fit.tau_grid.size()); ++g) {
        double d = std::abs(fit.tau_grid[static_cast<std::size_t>(g)] - 0.5);
        if (d < best) { best = d; med = g; }
    }
    std::vector<double> e(static_cast<std::size_t>(fit.residuals.cols()));
    for (int t = 0; t < fit.residuals.cols(); ++t)
        e[static_cast<std::size_t>(t)] = fit.residuals(med, t);
    AdaptiveKde kde(e);

    std::vector<double> sorted = e;
    std::sort(sorted.begin(), sorted.end());

    std::vector<int> idx = grid_indices(fit.tau_grid, lo, hi);
    ScoreEstimates out;
    out.fhat.resize(idx.size());
    out.score.resize(idx.size());
    const std::size_t n = sorted.size();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double tau = fit.tau_grid[static_cast<std::size_t>(idx[i])];
        double pos = tau * static_cast<double>(n - 1);
        std::size_t a = static_cast<std::size_t>(pos);
        std::size_t b = std::min(a + 1, n - 1);
        double w = pos - static_cast<double>(a);
        const double q = (1.0 - w) * sorted[a] + w * sorted[b];
        double f = std::max(kde.density(q), 1e-10);
        out.fhat[i] = f;
        out.score[i] = kde.density_deriv(q) / f;
    }
    return out;
}

Eigen::MatrixXd khmaladze_transform(const Eigen::MatrixXd& V,
                                    const std::vector<double>& score,
                                    const std::vector<double>& grid) {
    const int G = static_cast<int>(grid.size());
    if (V.rows() != G || static_cast<int>(score.size()) != G)
        throw std::invalid_argument("khmaladze_transform: size mismatch");
    if (G < 2) return V;
    const double dtau = grid[1] - grid[0];

    // g(tau) = (1, score)'; C(z) = int_z^hi g g' by trapezoid, accumulated from above
    std::vector<Eigen::Matrix2d> C(static_cast<std::size_t>(G), Eigen::Matrix2d::Zero());
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    auto gvec = [&](int k) {
        Eigen::Vector2d g;
        g << 1.0, score[static_cast<std::size_t>(k)];
        return g;
    };
    for (int k = G - 2; k >= 0; --k) {
        acc += 0.5 * (gvec(k) * gvec(k).transpose() + gvec(k + 1) * gvec(k + 1).transpose()) * dtau;
        C[static_cast<std::size_t>(k)] = acc;
    }

    Eigen::MatrixXd Vt(G, V.cols());
    for (int comp = 0; comp < V.cols(); ++comp) {
        // inner integral int_x^hi g dV, cumulative from above
        std::vector<Eigen::Vector2d> inner(static_cast<std::size_t>(G), Eigen::Vector2d::Zero());
        Eigen::Vector2d accv = Eigen::Vector2d::Zero();
        for (int k = G - 2; k >= 0; --k) {
            accv += gvec(k) * (V(k + 1, comp) - V(k, comp));
            inner[static_cast<std::size_t>(k)] = accv;
        }
        // outer Riemann sum, truncated one grid step below the upper end
        std::vector<double> integ(static_cast<std::size_t>(G), 0.0);
        for (int k = 0; k < G - 1; ++k) {
            Eigen::Matrix2d Ck = C[static_cast<std::size_t>(k)];
            Ck += 1e-8 * Ck.trace() * Eigen::Matrix2d::Identity();
            integ[static_cast<std::size_t>(k)] = gvec(k).dot(Ck.ldlt().solve(inner[static_cast<std::size_t>(k)]));
        }
        double cum = 0.0;
        Vt(0, comp) = V(0, comp);
        for (int k = 1; k < G; ++k) {
            cum += integ[static_cast<std::size_t>(k - 1)] * dtau;
            Vt(k, comp) = V(k, comp) - cum;
        }
    }
    return Vt;
}

double critical_value(int p, double lo, double hi, double level, int reps, int steps,
                      std::uint64_t seed, KsNorm norm, const std::string& cache_path,
                      int threads) {
    const std::string key = cache_key(p, lo, hi, level, steps, reps, seed, norm);
    if (!cache_path.empty()) {
        std::ifstream in(cache_path);
        std::string line;
        while (std::getline(in, line)) {
            auto pos = line.rfind(" -> ");
            if (pos != std::string::npos && line.substr(0, pos) == key)
                return std::stod(line.substr(pos + 4));
        }
    }

    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    std::vector<double> sups(static_cast<std::size_t>(reps));
    boost::math::normal_distribution<double> N;
    const int ilo = static_cast<int>(std::ceil(lo * steps - 1e-9));
    const int ihi = static_cast<int>(std::floor(hi * steps + 1e-9));
    const double sd = 1.0 / std::sqrt(static_cast<double>(steps));

    auto worker = [&](int rep_lo, int rep_hi) {
        Eigen::VectorXd w(p);
        for (int rep = rep_lo; rep < rep_hi; ++rep) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
            w.setZero();
            double sup = 0.0;
            for (int k = 1; k <= ihi; ++k) {
                for (int c = 0; c < p; ++c)
                    w(c) += sd * boost::math::quantile(N, rng.next_uniform());
                if (k >= ilo) sup = std::max(sup, path_norm(w, norm));
            }
            sups[static_cast<std::size_t>(rep)] = sup;
        }
    };
    std::vector<std::thread> pool;
    const int chunk = (reps + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int a = t * chunk, b = std::min(reps, (t + 1) * chunk);
        if (a >= b) break;
        pool.emplace_back(worker, a, b);
    }
    for (auto& th : pool) th.join();

    const double value = empirical_quantile(sups, 1.0 - level);
    if (!cache_path.empty()) {
        static std::mutex mtx;
        std::lock_guard<std::mutex> lock(mtx);
        std::ofstream out(cache_path, std::ios::app);
        out << key << " -> " << std::setprecision(17) << value << "\n";
    }
    return value;
}

namespace {

ConstancyResult constancy_core(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                               const ConstancyOptions& opt) {
    std::vector<double> grid = interval_grid(opt.lo, opt.hi);
    QarFit fit = fit_qar_design(y, X, grid);

    Eigen::VectorXd beta = ols(y, X);
    Eigen::VectorXd phi_hat = beta.segment(1, fit.p);

    ScoreEstimates sc = score_estimates(fit, opt.lo, opt.hi);
    Eigen::MatrixXd V = v_process(fit, phi_hat, sc.fhat, opt.lo, opt.hi);
    Eigen::MatrixXd Vt = khmaladze_transform(V, sc.score, grid);

    ConstancyResult res;
    res.lo = opt.lo;
    res.hi = opt.hi;
    res.level = opt.level;
    res.phi_hat = phi_hat;
    for (int k = 0; k < V.rows(); ++k) {
        res.ks_raw = std::max(res.ks_raw, path_norm(V.row(k).transpose(), opt.norm));
        res.ks_transformed = std::max(res.ks_transformed, path_norm(Vt.row(k).transpose(), opt.norm));
    }
    if (!opt.preset_cv.empty()) {
        res.critical_values = opt.preset_cv;
    } else {
        for (double lv : {0.01, 0.05, 0.10})
            res.critical_values[lv] = critical_value(fit.p, opt.lo, opt.hi, lv, opt.cv_reps,
                                                     opt.cv_steps, opt.cv_seed, opt.norm,
                                                     opt.cache_path, opt.threads);
    }
    auto it = res.critical_values.find(opt.level);
    const double cv = it != res.critical_values.end()
                          ? it->second
                          : critical_value(fit.p, opt.lo, opt.hi, opt.level, opt.cv_reps,
                                           opt.cv_steps, opt.cv_seed, opt.norm,
                                           opt.cache_path, opt.threads);
    res.reject = res.ks_transformed > cv;
    return res;
}

} // namespace

ConstancyResult constancy_test(const std::vector<double>& series, int p,
                               const ConstancyOptions& opt) {
    if (series.size() < 50) throw std::invalid_argument("constancy_test: series too short");
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    lagged_design(series, p, y, X);
    return constancy_core(y, X, opt);
}

ConstancyResult constancy_test_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                      const ConstancyOptions& opt) {
    if (y.size() < 50) throw std::invalid_argument("constancy_test: series too short");
    return constancy_core(y, X, opt);
}

} // namespace qnc
