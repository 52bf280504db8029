// Acceptance gate: one line per criterion, PASS/FAIL, nonzero exit on any FAIL.
// argv[1] must be the path to the CLI binary (used by the determinism check).

#include "qnc/constancy.hpp"
#include "qnc/distributions.hpp"
#include "qnc/harness.hpp"
#include "qnc/moments.hpp"
#include "qnc/quantreg.hpp"
#include "qnc/rng.hpp"
#include "qnc/simulate.hpp"
#include "qnc/spectest.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace qnc;

namespace {

int failures = 0;
const char* kCache = "acceptance_cv_cache.txt";
constexpr std::uint64_t kSeed = 1770511;

void report(int id, const std::string& what, bool pass, const std::string& detail) {
    std::cout << "criterion " << id << " (" << what << "): " << (pass ? "PASS" : "FAIL")
              << " — " << detail << "\n"
              << std::flush;
    if (!pass) ++failures;
}

ExperimentConfig base_cfg(const std::string& test, const std::string& dist, double coef,
                          bool causal, int T, int reps) {
    ExperimentConfig cfg;
    cfg.test = test;
    cfg.dist = dist;
    if (causal) cfg.phi = {coef};
    else cfg.psi = {coef};
    cfg.T = T;
    cfg.replications = reps;
    cfg.seed = kSeed;
    cfg.cache_path = kCache;
    std::ostringstream id;
    id << "acc-" << test << "-" << dist << "-" << (causal ? "phi" : "psi") << coef << "-T" << T;
    cfg.cell_id = id.str();
    return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string pct(double r) {
    std::ostringstream os;
    os.precision(3);
    os << 100.0 * r << "%";
    return os.str();
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// ---- criterion 11: fast oracle suite -------------------------------------

bool oracle_acgf() {
    InnovationSpec g;
    MarModel causal({0.5}, {}, g), noncausal({}, {0.5}, g);
    for (int h = 0; h <= 6; ++h)
        if (std::abs(acgf(causal, h) - acgf(noncausal, h)) > 1e-10) return false;
    return true;
}

bool oracle_allpass_sums() {
    auto rho = allpass_weights(0.5);
    double e = 0.0;
    for (auto [j, w] : rho) e += w * w;
    if (std::abs(e - 1.0) > 1e-12) return false;
    for (int h = 1; h <= 4; ++h) {
        double s = 0.0;
        for (auto [j, w] : rho) {
            auto it = rho.find(j + h);
            if (it != rho.end()) s += w * it->second;
        }
        if (std::abs(s) > 1e-12) return false;
    }
    return true;
}

bool oracle_skewness() {
    return std::abs(allpass_skewness_factor(0.5) - 0.357142857142857) < 1e-12;
}

bool oracle_higher_moments_vs_sim() {
    InnovationSpec e = InnovationSpec::from_name("exponential");
    const double psi = 0.5;
    auto x = simulate_allpass(psi, e, 1000000, 51);
    const std::size_t n = x.size();
    std::vector<double> sq(n), cu(n);
    for (std::size_t t = 0; t < n; ++t) {
        sq[t] = x[t] * x[t];
        cu[t] = sq[t] * x[t];
    }
    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    // lag-1 moments with crude batch standard errors (20 batches)
    auto lag1_cov = [&](const std::vector<double>& v, double& se) {
        const double m = mean(v);
        const int B = 20;
        const std::size_t len = (n - 1) / B;
        std::vector<double> batch(B, 0.0);
        for (int b = 0; b < B; ++b) {
            double s = 0.0;
            for (std::size_t t = static_cast<std::size_t>(b) * len + 1; t <= (b + 1) * len; ++t)
                s += (v[t] - m) * (v[t - 1] - m);
            batch[static_cast<std::size_t>(b)] = s / static_cast<double>(len);
        }
        double bm = mean(batch), ss = 0.0;
        for (double bv : batch) ss += (bv - bm) * (bv - bm);
        se = std::sqrt(ss / (B - 1.0) / B);
        return bm;
    };
    double se_sq = 0.0, se_cu = 0.0;
    const double cov_sq = lag1_cov(sq, se_sq);
    const double cov_cu = lag1_cov(cu, se_cu);
    double var_sq = 0.0;
    const double msq = mean(sq);
    for (double v : sq) var_sq += (v - msq) * (v - msq);
    var_sq /= static_cast<double>(n - 1);

    const double kappa4 = central_moment(e, 4) - 3.0;
    const double rho_theory = allpass_sq_acf(psi, kappa4, 1.0, 1);
    const double cov_theory = allpass_cube_cov_lag1(psi, 1.0, central_moment(e, 3),
                                                    central_moment(e, 4), central_moment(e, 6));
    const bool ok_sq = std::abs(cov_sq / var_sq - rho_theory) < 3.0 * se_sq / var_sq + 1e-9;
    const bool ok_cu = std::abs(cov_cu - cov_theory) < 3.0 * se_cu + 1e-9;
    return ok_sq && ok_cu;
}

bool oracle_ev_quadrature() {
    MarModel m({0.5}, {}, InnovationSpec::from_name("exponential"));
    auto series = simulate_mar(m, 81, 141);
    std::vector<double> grid = {0.25, 0.5, 0.75};
    QarFit fit = fit_qar(series, 1, grid);
    const double closed = ev_statistic(fit, false);
    const int n = fit.t_eff();
    const int k = static_cast<int>(fit.X.cols());
    InnovationSpec gauss;
    Rng rng(151);
    const int draws = 40000;
    double mc = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (int d = 0; d < draws; ++d) {
            double x[8];
            for (int j = 0; j < k; ++j) x[j] = quantile(gauss, rng.next_uniform());
            double re = 0.0, im = 0.0;
            for (int t = 0; t < n; ++t) {
                double dot = 0.0;
                for (int j = 0; j < k; ++j) dot += x[j] * fit.X(t, j);
                const double psi = (fit.residuals(static_cast<int>(g), t) <= 0.0 ? 1.0 : 0.0) -
                                   grid[g];
                re += psi * std::cos(dot);
                im += psi * std::sin(dot);
            }
            acc += re * re + im * im;
        }
        mc += acc / draws / n;
    }
    mc /= static_cast<double>(grid.size());
    return std::abs(mc - closed) / closed < 0.01;
}

bool oracle_multiplier() {
    const double omega = (std::sqrt(5.0) + 1.0) / 2.0;
    auto w = multiplier_sample(200000, 9);
    double s = 0.0, s2 = 0.0;
    for (double v : w) {
        if (std::abs(v - (1.0 - omega)) > 1e-12 && std::abs(v - omega) > 1e-12) return false;
        s += v;
        s2 += v * v;
    }
    return std::abs(s / w.size()) < 0.02 && std::abs(s2 / w.size() - 1.0) < 0.02;
}

bool oracle_qr_vertex() {
    MarModel m({0.5}, {}, InnovationSpec::from_name("exponential"));
    auto series = simulate_mar(m, 200, 31);
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    lagged_design(series, 1, y, X);
    Eigen::VectorXd b = fit_qr(y, X, 0.3);
    Eigen::VectorXd e = y - X * b;
    int zeros = 0;
    for (int i = 0; i < e.size(); ++i)
        if (std::abs(e(i)) < 1e-9) ++zeros;
    return zeros >= 2;
}

bool oracle_pacf() {
    MarModel m({0.6}, {}, InnovationSpec::from_name("gaussian"));
    auto y = simulate_mar(m, 5000, 101);
    auto pc = pacf(y, 4);
    if (std::abs(pc[0] - 0.6) > 0.06) return false;
    for (int j = 1; j < 4; ++j)
        if (std::abs(pc[static_cast<std::size_t>(j)]) > 0.05) return false;
    return select_order(y, 4) == 1;
}

} // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    std::ostringstream detail;

    // 1. constancy size, exponential causal, T=200
    {
        auto t0 = std::chrono::steady_clock::now();
        ExperimentConfig cfg = base_cfg("constancy", "exponential", 0.6, true, 200, 200);
        cfg.threads = 1;
        CellResult r = run_cell(cfg);
        const double el = seconds_since(t0);
        detail.str("");
        detail << "size " << pct(r.rejection_rate) << " in [1%,10%], " << el << "s single-thread";
        report(1, "constancy size, exp causal T=200", r.rejection_rate >= 0.01 &&
               r.rejection_rate <= 0.10 && el < 600.0, detail.str());
    }

    // 2. constancy over-rejection, lognormal causal
    {
        ExperimentConfig cfg = base_cfg("constancy", "lognormal", 0.6, true, 200, 200);
        CellResult r = run_cell(cfg);
        detail.str("");
        detail << "size " << pct(r.rejection_rate) << " > 12%";
        report(2, "constancy lognormal over-rejection", r.rejection_rate > 0.12, detail.str());
    }

    // 3. constancy power, F(5,5) non-causal
    {
        ExperimentConfig cfg = base_cfg("constancy", "f", 0.6, false, 200, 200);
        CellResult r = run_cell(cfg);
        detail.str("");
        detail << "power " << pct(r.rejection_rate) << " >= 65%";
        report(3, "constancy power, F(5,5) non-causal T=200", r.rejection_rate >= 0.65, detail.str());
    }

    // 4. trimming sensitivity at [0.10, 0.90], T=500
    {
        ExperimentConfig s = base_cfg("constancy", "exponential", 0.6, true, 500, 200);
        s.lo = 0.10;
        s.hi = 0.90;
        s.cell_id += "-t1090";
        CellResult rs = run_cell(s);
        ExperimentConfig p = base_cfg("constancy", "exponential", 0.6, false, 500, 200);
        p.lo = 0.10;
        p.hi = 0.90;
        p.cell_id += "-t1090";
        CellResult rp = run_cell(p);
        detail.str("");
        detail << "size " << pct(rs.rejection_rate) << " in [2%,9%], power "
               << pct(rp.rejection_rate) << " >= 55%";
        report(4, "constancy trimming [0.10,0.90] T=500",
               rs.rejection_rate >= 0.02 && rs.rejection_rate <= 0.09 &&
               rp.rejection_rate >= 0.55, detail.str());
    }

    // 5. EV Gaussian blindness
    {
        CellResult a = run_cell(base_cfg("ev", "gaussian", 0.6, true, 200, 100));
        CellResult b = run_cell(base_cfg("ev", "gaussian", 0.6, false, 200, 100));
        detail.str("");
        detail << "causal " << pct(a.rejection_rate) << ", non-causal " << pct(b.rejection_rate)
               << ", both <= 10%";
        report(5, "EV Gaussian size both directions", a.rejection_rate <= 0.10 &&
               b.rejection_rate <= 0.10, detail.str());
    }

    // 6. EV power, exponential non-causal
    {
        CellResult a = run_cell(base_cfg("ev", "exponential", 0.6, false, 200, 100));
        auto t0 = std::chrono::steady_clock::now();
        CellResult b = run_cell(base_cfg("ev", "exponential", 0.6, false, 500, 50));
        const double el = seconds_since(t0);
        detail.str("");
        detail << "T=200 power " << pct(a.rejection_rate) << " >= 28%; T=500 power "
               << pct(b.rejection_rate) << " >= 80% in " << el << "s";
        report(6, "EV power, exponential non-causal", a.rejection_rate >= 0.28 &&
               b.rejection_rate >= 0.80 && el < 3600.0, detail.str());
    }

    // 7. EG size across all table distributions
    {
        bool ok = true;
        detail.str("");
        for (const char* dist : {"gaussian", "exponential", "gamma", "beta", "f", "chisq5",
                                 "lognormal", "t3", "uniform", "laplace"}) {
            CellResult r = run_cell(base_cfg("eg", dist, 0.6, true, 200, 200));
            const bool in_band = r.rejection_rate >= 0.02 && r.rejection_rate <= 0.10;
            ok = ok && in_band;
            detail << dist << " " << pct(r.rejection_rate) << (in_band ? " " : "(!) ");
        }
        report(7, "EG size T=200 all distributions in [2%,10%]", ok, detail.str());
    }

    // 8. EG power, lognormal and uniform non-causal
    {
        CellResult a = run_cell(base_cfg("eg", "lognormal", 0.6, false, 200, 200));
        CellResult b = run_cell(base_cfg("eg", "uniform", 0.6, false, 200, 200));
        detail.str("");
        detail << "lognormal " << pct(a.rejection_rate) << " >= 70%, uniform "
               << pct(b.rejection_rate) << " >= 48%";
        report(8, "EG power T=200", a.rejection_rate >= 0.70 && b.rejection_rate >= 0.48,
               detail.str());
    }

    // 9. AR-ARCH EV power with the known-|v| design
    {
        ExperimentConfig cfg = base_cfg("ev", "exponential", 0.7, false, 500, 50);
        cfg.arch = true;
        cfg.k_sub = 7.0;
        cfg.cell_id += "-arch";
        CellResult r = run_cell(cfg);
        detail.str("");
        detail << "power " << pct(r.rejection_rate) << " >= 65%";
        report(9, "ARCH EV power, exponential T=500", r.rejection_rate >= 0.65, detail.str());
    }

    // 10. critical-value regression against the published anchors
    {
        const double anchors[3] = {2.140, 3.393, 8.578};
        const int ps[3] = {1, 2, 7};
        bool ok = true;
        detail.str("");
        for (int i = 0; i < 3; ++i) {
            const double cv = critical_value(ps[i], 0.05, 0.95, 0.05, 50000, 2000, 1770511,
                                             KsNorm::L1, kCache, 0);
            const double rel = std::abs(cv - anchors[i]) / anchors[i];
            ok = ok && rel < 0.04;
            detail.precision(4);
            detail << "p=" << ps[i] << " " << cv << " vs " << anchors[i] << " ("
                   << 100.0 * rel << "%) ";
        }
        report(10, "constancy critical values within 4%", ok, detail.str());
    }

    // 11. fast oracle suite
    {
        auto t0 = std::chrono::steady_clock::now();
        struct { const char* name; bool ok; } checks[] = {
            {"acgf-equality", oracle_acgf()},
            {"allpass-sums", oracle_allpass_sums()},
            {"skewness-factor", oracle_skewness()},
            {"higher-moments-vs-sim", oracle_higher_moments_vs_sim()},
            {"ev-quadrature", oracle_ev_quadrature()},
            {"multiplier-law", oracle_multiplier()},
            {"qr-vertex", oracle_qr_vertex()},
            {"pacf-ar1", oracle_pacf()},
        };
        const double el = seconds_since(t0);
        bool ok = el < 60.0;
        detail.str("");
        for (auto& c : checks) {
            ok = ok && c.ok;
            if (!c.ok) detail << c.name << " FAILED ";
        }
        detail << "all oracles in " << el << "s < 60s";
        report(11, "oracle suite", ok, detail.str());
    }

    // 12. byte-identical table output
    {
        bool ok = false;
        detail.str("");
        if (cli.empty()) {
            detail << "CLI path not supplied";
        } else {
            std::filesystem::create_directories("acc_t1_a");
            std::filesystem::create_directories("acc_t1_b");
            const std::string common = " table T1 --scale 0.05 --seed 7 --cache " +
                                       std::string(kCache) + " 2>/dev/null";
            int rc1 = std::system((cli + common + " --out acc_t1_a").c_str());
            int rc2 = std::system((cli + common + " --out acc_t1_b").c_str());
            if (rc1 == 0 && rc2 == 0) {
                const std::string a_csv = read_file("acc_t1_a/T1.csv");
                const std::string b_csv = read_file("acc_t1_b/T1.csv");
                const std::string a_txt = read_file("acc_t1_a/T1.txt");
                const std::string b_txt = read_file("acc_t1_b/T1.txt");
                ok = !a_csv.empty() && a_csv == b_csv && a_txt == b_txt;
                detail << "two runs, " << a_csv.size() << " bytes CSV, identical="
                       << (ok ? "yes" : "no");
            } else {
                detail << "table runs exited " << rc1 << "/" << rc2;
            }
        }
        report(12, "table T1 determinism", ok, detail.str());
    }

    std::cout << (failures == 0 ? "ALL CRITERIA PASS" : "FAILURES PRESENT") << "\n";
    return failures == 0 ? 0 : 1;
}
