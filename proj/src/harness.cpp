#include "qnc/harness.hpp"
#include "qnc/kde.hpp"
#include "qnc/moments.hpp"
#include "qnc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qnc {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

int thread_count(int requested) {
    if (requested > 0) return requested;
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    return hw > 0 ? hw : 1;
}

SubsampleCentering centering_from_name(const std::string& name) {
    if (name == "none") return SubsampleCentering::None;
    if (name == "sqrt") return SubsampleCentering::SqrtBT;
    if (name == "bt") return SubsampleCentering::BT;
    throw std::invalid_argument("unknown EV centering: " + name);
}

// design rows (1, Y_{t-1}, |v_{t-1}|) for the known-heteroskedasticity QAR
void arch_design(const ArArchPath& path, Eigen::VectorXd& y, Eigen::MatrixXd& X) {
    const int T = static_cast<int>(path.y.size());
    y.resize(T - 1);
    X.resize(T - 1, 3);
    for (int t = 1; t < T; ++t) {
        y(t - 1) = path.y[static_cast<std::size_t>(t)];
        X(t - 1, 0) = 1.0;
        X(t - 1, 1) = path.y[static_cast<std::size_t>(t - 1)];
        X(t - 1, 2) = std::abs(path.v[static_cast<std::size_t>(t - 1)]);
    }
}

struct RepOutcome {
    bool ok = false;
    bool reject = false;
    double stat = 0.0;
};

RepOutcome run_replication(const ExperimentConfig& cfg, std::uint64_t rep_seed,
                           const std::map<double, double>& constancy_cv) {
    RepOutcome out;
    MarModel model(cfg.phi, cfg.psi, cfg.innovation());
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<double> series;
    if (cfg.arch) {
        ArchSpec arch{cfg.gamma};
        ArArchPath path = simulate_ar_arch(model, arch, static_cast<std::size_t>(cfg.T), rep_seed);
        arch_design(path, y, X);
    } else {
        series = simulate_mar(model, static_cast<std::size_t>(cfg.T), rep_seed);
    }

    if (cfg.test == "constancy") {
        ConstancyOptions opt;
        opt.lo = cfg.lo;
        opt.hi = cfg.hi;
        opt.level = cfg.level;
        opt.cache_path = cfg.cache_path;
        opt.preset_cv = constancy_cv;
        ConstancyResult r = cfg.arch ? constancy_test_design(y, X, opt)
                                     : constancy_test(series, model.p(), opt);
        out.reject = r.reject;
        out.stat = r.ks_transformed;
    } else if (cfg.test == "ev") {
        EvOptions opt;
        opt.k_sub = cfg.k_sub;
        opt.level = cfg.level;
        opt.threads = 1;
        opt.centering = centering_from_name(cfg.ev_centering);
        SpecTestResult r = cfg.arch ? ev_test_design(y, X, opt, rep_seed)
                                    : ev_test(series, model.p(), opt, rep_seed);
        out.reject = r.reject;
        out.stat = r.statistic;
    } else if (cfg.test == "eg") {
        EgOptions opt;
        opt.B = cfg.B;
        opt.level = cfg.level;
        opt.threads = 1;
        SpecTestResult r = cfg.arch ? eg_test_design(y, X, opt, derive_seed(rep_seed, 0xb0075ULL))
                                    : eg_test(series, model.p(), opt, derive_seed(rep_seed, 0xb0075ULL));
        out.reject = r.reject;
        out.stat = r.statistic;
    } else {
        throw std::invalid_argument("unknown test: " + cfg.test);
    }
    out.ok = true;
    return out;
}

} // namespace

InnovationSpec ExperimentConfig::innovation() const {
    InnovationSpec s = InnovationSpec::from_name(dist);
    s.lognormal_sigma = lognormal_sigma;
    return s;
}

CellResult run_cell(const ExperimentConfig& cfg) {
    if (cfg.replications < 1) throw std::invalid_argument("run_cell: replications must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();

    // constancy critical values depend only on (p, interval); simulate once up front
    std::map<double, double> constancy_cv;
    if (cfg.test == "constancy") {
        const int p = cfg.arch ? 2 : static_cast<int>(cfg.phi.size() + cfg.psi.size());
        ConstancyOptions defaults;
        for (double lv : {0.01, 0.05, 0.10})
            constancy_cv[lv] = critical_value(p, cfg.lo, cfg.hi, lv, defaults.cv_reps,
                                              defaults.cv_steps, defaults.cv_seed, KsNorm::L1,
                                              cfg.cache_path, cfg.threads);
    }

    const std::uint64_t cell_hash = fnv1a(cfg.cell_id.empty() ? cfg.test + cfg.dist : cfg.cell_id);
    const int R = cfg.replications;
    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(R));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= R) break;
            const std::uint64_t rep_seed = derive_seed(cfg.seed, cell_hash, static_cast<std::uint64_t>(r));
            try {
                outcomes[static_cast<std::size_t>(r)] = run_replication(cfg, rep_seed, constancy_cv);
            } catch (const std::exception& e) {
                std::cerr << "replication " << r << " failed: " << e.what() << "\n";
            }
        }
    };
    std::vector<std::thread> pool;
    const int nt = std::min(thread_count(cfg.threads), R);
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    CellResult res;
    int nrej = 0, nok = 0;
    double stat_sum = 0.0;
    for (const RepOutcome& o : outcomes) {
        if (!o.ok) continue;
        ++nok;
        nrej += o.reject ? 1 : 0;
        stat_sum += o.stat;
    }
    res.errors = R - nok;
    if (res.errors > std::max(1, R / 100))
        throw std::runtime_error("run_cell: more than 1% of replications failed");
    res.replications = nok;
    res.rejection_rate = nok > 0 ? static_cast<double>(nrej) / nok : 0.0;
    res.mean_stat = nok > 0 ? stat_sum / nok : 0.0;
    res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace {

struct TableCell {
    ExperimentConfig cfg;
    double paper_value = -1.0; // percent; negative = not reported
    std::string row_label;
};

void add_pair(std::vector<TableCell>& cells, const ExperimentConfig& base,
              const std::string& table, const std::string& dist, double coef, int T,
              double paper_size, double paper_power, const std::string& extra = "") {
    for (int pw = 0; pw < 2; ++pw) {
        TableCell c;
        c.cfg = base;
        c.cfg.dist = dist;
        c.cfg.T = T;
        if (pw == 0) c.cfg.phi = {coef};
        else c.cfg.psi = {coef};
        std::ostringstream id;
        id << table << "-" << base.test << "-" << dist << (extra.empty() ? "" : "-" + extra)
           << "-c" << coef << "-T" << T << (pw == 0 ? "-size" : "-power");
        c.cfg.cell_id = id.str();
        c.paper_value = pw == 0 ? paper_size : paper_power;
        c.row_label = id.str();
        cells.push_back(c);
    }
}

std::vector<TableCell> table_cells(const std::string& id, const ExperimentConfig& base) {
    std::vector<TableCell> cells;
    if (id == "T1") {
        ExperimentConfig b = base;
        b.test = "constancy";
        struct Row { const char* dist; double v[12]; };
        // size T200 c{.3,.6,.9}, size T500, power T200, power T500
        static const Row rows[] = {
            {"exponential", {4.2, 4.0, 4.8, 6.4, 6.8, 4.8, 33.8, 38.8, 40.2, 65.4, 69.6, 72.4}},
            {"gamma",       {4.4, 3.0, 3.8, 5.0, 5.8, 4.4, 34.4, 37.0, 42.2, 64.4, 68.4, 70.2}},
            {"beta",        {6.8, 6.6, 5.4, 6.8, 9.4, 6.4, 15.4, 27.2, 39.0, 24.8, 65.0, 77.2}},
            {"f",           {5.0, 6.6, 3.4, 8.4, 6.0, 4.2, 80.0, 81.8, 70.0, 97.2, 98.2, 96.2}},
            {"chisq5",      {5.0, 4.4, 4.0, 4.0, 4.8, 5.2, 11.4, 11.4, 8.8, 27.4, 35.6, 17.4}},
            {"skewnormal",  {5.2, 6.6, 7.4, 9.8, 7.4, 9.6, 8.0, 7.8, 10.6, 25.4, 20.0, 12.8}},
            {"trunccauchy", {26.6, 34.8, 43.0, 20.8, 19.2, 33.2, 70.0, 96.4, 92.4, 80.0, 99.8, 91.8}},
            {"lognormal",   {21.2, 19.6, 23.6, 23.2, 26.4, 26.6, 98.2, 99.0, 99.6, 100.0, 100.0, 100.0}},
            {"t3",          {5.4, 4.0, 5.0, 4.0, 6.8, 4.8, 9.8, 13.0, 15.8, 11.6, 20.0, 25.8}},
            {"uniform",     {6.2, 7.6, 6.0, 6.0, 6.8, 5.8, 13.4, 8.0, 13.2, 40.4, 7.8, 48.8}},
            {"laplace",     {3.4, 4.0, 4.6, 2.6, 3.8, 4.6, 8.4, 5.6, 17.0, 10.8, 8.6, 29.0}},
        };
        const double coefs[] = {0.3, 0.6, 0.9};
        const int Ts[] = {200, 500};
        for (const Row& r : rows)
            for (int ti = 0; ti < 2; ++ti)
                for (int ci = 0; ci < 3; ++ci)
                    add_pair(cells, b, "T1", r.dist, coefs[ci], Ts[ti],
                             r.v[ti * 3 + ci], r.v[6 + ti * 3 + ci]);
    } else if (id == "T2") {
        ExperimentConfig b = base;
        b.test = "constancy";
        struct Block { double lo, hi; double v[36]; };
        // per interval: for T in {100,200,500}: size c{.3,.6,.9,-.4,-.6,-.8}, power same order
        static const Block blocks[] = {
            {0.05, 0.95,
             {2.4, 2.2, 2.6, 2.8, 2.0, 2.4, 22.4, 24.6, 22.0, 4.8, 32.8, 26.6,
              3.6, 3.6, 4.0, 5.0, 2.8, 4.4, 40.8, 38.6, 41.8, 8.4, 48.0, 44.0,
              3.4, 6.2, 4.8, 6.6, 4.8, 3.4, 67.2, 67.0, 72.4, 14.2, 66.0, 72.2}},
            {0.10, 0.90,
             {3.4, 3.2, 3.2, 3.8, 2.4, 3.4, 28.0, 25.4, 22.8, 6.0, 32.8, 28.2,
              3.2, 2.8, 5.0, 3.0, 4.2, 4.0, 37.4, 43.4, 43.2, 5.8, 49.4, 48.8,
              4.8, 5.4, 6.0, 4.6, 3.8, 5.0, 71.2, 67.8, 69.2, 14.6, 65.4, 72.8}},
            {0.15, 0.85,
             {4.4, 2.6, 3.6, 5.0, 3.0, 3.0, 27.8, 28.2, 21.8, 8.8, 37.6, 30.2,
              5.6, 3.8, 3.6, 6.6, 3.4, 4.4, 39.0, 40.0, 42.4, 9.6, 51.6, 46.6,
              5.4, 4.4, 5.0, 4.2, 4.8, 5.4, 64.8, 65.8, 69.0, 21.8, 68.0, 71.6}},
        };
        const double coefs[] = {0.3, 0.6, 0.9, -0.4, -0.6, -0.8};
        const int Ts[] = {100, 200, 500};
        for (const Block& blk : blocks) {
            ExperimentConfig bb = b;
            bb.lo = blk.lo;
            bb.hi = blk.hi;
            std::ostringstream iv;
            iv << std::fixed << std::setprecision(2) << blk.lo << "-" << blk.hi;
            for (int ti = 0; ti < 3; ++ti)
                for (int ci = 0; ci < 6; ++ci)
                    add_pair(cells, bb, "T2", "exponential", coefs[ci], Ts[ti],
                             blk.v[ti * 12 + ci], blk.v[ti * 12 + 6 + ci], iv.str());
        }
    } else if (id == "T3" || id == "T4") {
        ExperimentConfig b = base;
        b.test = id == "T3" ? "ev" : "eg";
        struct Row { const char* dist; double v[6]; };
        // size at the three sample sizes, then power
        static const Row ev_rows[] = {
            {"gaussian",    {2.2, 3.4, 3.4, 0.4, 0.6, 2.6}},
            {"exponential", {4.4, 1.8, 2.0, 29.2, 43.2, 97.2}},
            {"gamma",       {1.8, 3.0, 2.8, 10.6, 41.6, 97.6}},
            {"beta",        {3.2, 3.2, 3.4, 26.4, 67.8, 99.0}},
            {"f",           {3.6, 5.8, 3.4, 24.0, 67.6, 99.0}},
            {"chisq5",      {4.8, 4.4, 3.6, 13.4, 22.2, 68.4}},
            {"lognormal",   {5.4, 4.6, 6.8, 54.0, 92.4, 100.0}},
            {"t3",          {6.2, 7.0, 6.4, 13.8, 42.4, 93.4}},
            {"uniform",     {5.0, 6.0, 3.4, 44.0, 86.8, 100.0}},
            {"laplace",     {4.4, 4.8, 4.4, 14.0, 47.2, 98.2}},
        };
        static const Row eg_rows[] = {
            {"gaussian",    {6.0, 5.0, 4.0, 4.8, 5.6, 5.8}},
            {"exponential", {5.2, 4.6, 6.0, 24.8, 49.2, 76.4}},
            {"gamma",       {5.0, 5.6, 5.0, 23.8, 45.8, 75.8}},
            {"beta",        {6.4, 5.8, 6.0, 24.2, 42.2, 75.8}},
            {"f",           {4.4, 5.0, 5.4, 22.6, 37.4, 67.0}},
            {"chisq5",      {6.6, 5.4, 4.6, 12.8, 22.6, 41.6}},
            {"lognormal",   {5.6, 5.4, 4.0, 32.0, 60.6, 85.8}},
            {"t3",          {4.4, 6.6, 7.0, 6.8, 14.8, 36.2}},
            {"uniform",     {4.8, 6.6, 6.6, 10.2, 25.4, 64.8}},
            {"laplace",     {5.6, 5.0, 6.8, 8.2, 14.4, 41.6}},
        };
        const int Ts_ev[] = {100, 200, 500};
        const int Ts_eg[] = {50, 100, 200};
        const Row* rows = id == "T3" ? ev_rows : eg_rows;
        const int* Ts = id == "T3" ? Ts_ev : Ts_eg;
        for (int ri = 0; ri < 10; ++ri)
            for (int ti = 0; ti < 3; ++ti)
                add_pair(cells, b, id, rows[ri].dist, 0.6, Ts[ti],
                         rows[ri].v[ti], rows[ri].v[3 + ti]);
    } else if (id == "T5") {
        struct Row { const char* dist; double v[12]; };
        // constancy size/power at T {100,200}, then EV, then EG
        static const Row rows[] = {
            {"gaussian",    {2.8, 5.4, 4.2, 3.4, 2.2, 3.4, 0.4, 0.6, 5.0, 4.0, 5.6, 5.8}},
            {"exponential", {3.2, 4.0, 25.4, 38.8, 4.4, 1.8, 29.2, 43.2, 4.6, 6.0, 49.2, 76.4}},
            {"gamma",       {3.8, 3.0, 26.6, 37.0, 1.8, 3.0, 10.6, 41.6, 5.6, 5.0, 45.8, 75.8}},
            {"beta",        {4.2, 6.6, 18.6, 27.2, 3.2, 3.2, 26.4, 67.8, 5.8, 6.0, 42.2, 75.8}},
            {"f",           {6.8, 6.6, 62.4, 81.8, 3.6, 5.8, 24.0, 67.6, 5.0, 5.4, 34.7, 67.0}},
            {"chisq5",      {5.8, 4.4, 9.6, 11.4, 4.8, 4.4, 13.4, 22.2, 5.4, 4.6, 22.6, 41.6}},
            {"lognormal",   {20.2, 19.6, 78.8, 99.6, 5.4, 4.6, 54.0, 92.4, 5.4, 4.0, 60.6, 85.8}},
            {"t3",          {3.4, 4.0, 10.2, 13.0, 6.2, 7.0, 13.8, 42.4, 6.6, 7.0, 14.8, 36.2}},
            {"uniform",     {6.8, 7.6, 7.4, 8.0, 5.0, 6.0, 44.0, 86.8, 6.6, 6.6, 25.4, 64.8}},
            {"laplace",     {5.8, 4.0, 5.2, 5.6, 4.4, 4.8, 14.0, 47.2, 5.0, 6.8, 14.4, 41.6}},
        };
        const char* tests[] = {"constancy", "ev", "eg"};
        const int Ts[] = {100, 200};
        for (const Row& r : rows)
            for (int te = 0; te < 3; ++te) {
                ExperimentConfig b = base;
                b.test = tests[te];
                for (int ti = 0; ti < 2; ++ti)
                    add_pair(cells, b, "T5", r.dist, 0.6, Ts[ti],
                             r.v[te * 4 + ti], r.v[te * 4 + 2 + ti]);
            }
    } else if (id == "T7") {
        struct Row { const char* dist; double v[16]; };
        // constancy size x4, power x4; EV size x4, power x4 at T {100,200,500,1000}
        static const Row rows[] = {
            {"exponential", {3.6, 4.4, 6.0, 7.0, 39.0, 54.6, 75.8, 90.8,
                             5.2, 4.4, 4.6, 5.0, 16.8, 34.8, 82.8, 97.8}},
            {"t3",          {5.2, 6.6, 6.0, 7.8, 24.6, 39.4, 63.6, 78.0,
                             8.2, 7.2, 8.2, 7.2, 51.0, 83.2, 99.8, 100.0}},
            {"laplace",     {4.4, 3.8, 7.6, 4.4, 14.4, 25.0, 38.8, 55.0,
                             7.0, 6.4, 8.6, 7.2, 45.4, 82.6, 99.2, 10.0}},
        };
        const char* tests[] = {"constancy", "ev"};
        const int Ts[] = {100, 200, 500, 1000};
        for (const Row& r : rows)
            for (int te = 0; te < 2; ++te) {
                ExperimentConfig b = base;
                b.test = tests[te];
                b.arch = true;
                b.gamma = {0.2, 0.8};
                b.k_sub = 7.0; // subsampling constant used for the ARCH experiment
                for (int ti = 0; ti < 4; ++ti)
                    add_pair(cells, b, "T7", r.dist, 0.7, Ts[ti],
                             r.v[te * 8 + ti], r.v[te * 8 + 4 + ti], "arch");
            }
    } else {
        throw std::invalid_argument("unknown table id: " + id);
    }
    return cells;
}

} // namespace

void run_table(const std::string& table_id, double scale, std::uint64_t seed,
               int threads, const std::string& out_dir, const std::string& cache_path) {
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("run_table: scale must be in (0,1]");
    ExperimentConfig base;
    base.seed = seed;
    base.threads = threads;
    base.cache_path = cache_path;
    base.replications = std::max(1, static_cast<int>(std::lround(500 * scale)));
    std::vector<TableCell> cells = table_cells(table_id, base);

    std::ofstream csv(out_dir + "/" + table_id + ".csv");
    std::ofstream txt(out_dir + "/" + table_id + ".txt");
    if (!csv || !txt) throw std::runtime_error("run_table: cannot write to " + out_dir);
    csv << "cell_id,test,dist,coef,T,reps,level,rejection_rate,mean_stat,runtime_s\n";
    txt << std::left << std::setw(44) << "cell" << std::right << std::setw(10) << "rate"
        << std::setw(10) << "paper" << "\n";

    for (TableCell& c : cells) {
        c.cfg.replications = base.replications;
        CellResult r = run_cell(c.cfg);
        const double coef = c.cfg.phi.empty() ? c.cfg.psi[0] : c.cfg.phi[0];
        csv << c.cfg.cell_id << "," << c.cfg.test << "," << c.cfg.dist << ","
            << coef << "," << c.cfg.T << "," << r.replications << "," << c.cfg.level << ","
            << std::fixed << std::setprecision(4) << r.rejection_rate << ","
            << std::setprecision(6) << r.mean_stat << ",0.000\n";
        csv << std::defaultfloat;
        std::ostringstream ours, paper;
        ours << std::fixed << std::setprecision(2) << 100.0 * r.rejection_rate << "%";
        if (c.paper_value >= 0.0) paper << std::fixed << std::setprecision(2) << c.paper_value << "%";
        txt << std::left << std::setw(44) << c.row_label << std::right << std::setw(10) << ours.str()
            << std::setw(10) << paper.str() << "\n";
        std::cerr << c.row_label << " rate=" << ours.str() << " paper=" << paper.str()
                  << " runtime=" << std::fixed << std::setprecision(1) << r.runtime_s << "s\n"
                  << std::defaultfloat;
    }
}

std::vector<double> read_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<double> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        // take the first comma-separated field
        auto comma = line.find(',');
        std::string field = comma == std::string::npos ? line : line.substr(0, comma);
        try {
            std::size_t used = 0;
            double v = std::stod(field, &used);
            if (used != field.size()) throw std::invalid_argument(field);
            out.push_back(v);
        } catch (...) {
            if (first) { first = false; continue; } // optional header
            throw std::runtime_error("non-numeric data in " + path + ": " + field);
        }
        first = false;
    }
    return out;
}

namespace {

std::vector<double> apply_transform(const std::vector<double>& x, const std::string& transform) {
    if (transform == "none") return x;
    if (transform == "diff") {
        std::vector<double> d;
        for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
        return d;
    }
    if (transform == "detrend") {
        const int n = static_cast<int>(x.size());
        Eigen::VectorXd y(n);
        Eigen::MatrixXd X(n, 2);
        for (int i = 0; i < n; ++i) {
            y(i) = x[static_cast<std::size_t>(i)];
            X(i, 0) = 1.0;
            X(i, 1) = i;
        }
        Eigen::VectorXd b = ols(y, X);
        std::vector<double> d(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = y(i) - b(0) - b(1) * i;
        return d;
    }
    throw std::invalid_argument("unknown transform: " + transform);
}

std::string stars(double stat, double cv10, double cv5) {
    if (stat > cv5) return "**";
    if (stat > cv10) return "*";
    return "";
}

} // namespace

nlohmann::json analyze_series(const std::string& csv_path, const std::string& transform,
                              int max_lag, const std::vector<std::string>& tests,
                              double level, std::uint64_t seed, int threads,
                              const std::string& cache_path) {
    std::vector<double> series = apply_transform(read_series_csv(csv_path), transform);
    if (series.size() < 100) throw std::runtime_error("analyze_series: need >= 100 observations after transform");

    nlohmann::json out;
    out["input"] = csv_path;
    out["transform"] = transform;
    out["length"] = series.size();
    out["level"] = level;
    out["seed"] = seed;

    const int p = select_order(series, max_lag);
    out["p"] = p;
    if (p == 0) {
        out["note"] = "no dynamics detected (no significant partial autocorrelation)";
        return out;
    }
    auto want = [&](const std::string& t) {
        return tests.empty() || std::find(tests.begin(), tests.end(), t) != tests.end();
    };

    if (want("constancy")) {
        nlohmann::json cj = nlohmann::json::array();
        for (auto [lo, hi] : {std::pair<double, double>{0.05, 0.95}, {0.10, 0.90}}) {
            ConstancyOptions opt;
            opt.lo = lo;
            opt.hi = hi;
            opt.level = level;
            opt.threads = threads;
            opt.cache_path = cache_path;
            ConstancyResult r = constancy_test(series, p, opt);
            nlohmann::json j;
            j["method"] = "constancy";
            j["p"] = p;
            j["interval"] = {lo, hi};
            j["statistic"] = r.ks_transformed;
            j["critical_value"] = r.critical_values.at(level);
            j["critical_values"] = r.critical_values;
            j["level"] = level;
            j["reject"] = r.reject;
            j["stars"] = stars(r.ks_transformed, r.critical_values.at(0.10), r.critical_values.at(0.05));
            j["seed"] = seed;
            cj.push_back(j);
        }
        out["tests"]["constancy"] = cj;
    }
    if (want("ev")) {
        EvOptions opt;
        opt.level = level;
        opt.threads = threads;
        SpecTestResult r = ev_test(series, p, opt, seed);
        nlohmann::json j;
        j["method"] = "ev";
        j["p"] = p;
        j["statistic"] = r.statistic;
        j["critical_value"] = r.critical_values.at(level);
        j["critical_values"] = r.critical_values;
        j["level"] = level;
        j["reject"] = r.reject;
        j["stars"] = stars(r.statistic, r.critical_values.at(0.10), r.critical_values.at(0.05));
        j["tuning"] = r.tuning;
        j["seed"] = seed;
        out["tests"]["ev"] = j;
    }
    if (want("eg")) {
        EgOptions opt;
        opt.level = level;
        opt.threads = threads;
        SpecTestResult r = eg_test(series, p, opt, seed);
        nlohmann::json j;
        j["method"] = "eg";
        j["p"] = p;
        j["statistic"] = r.statistic;
        j["critical_value"] = r.critical_values.at(level);
        j["critical_values"] = r.critical_values;
        j["level"] = level;
        j["reject"] = r.reject;
        j["stars"] = stars(r.statistic, r.critical_values.at(0.10), r.critical_values.at(0.05));
        j["tuning"] = r.tuning;
        j["seed"] = seed;
        out["tests"]["eg"] = j;
    }
    return out;
}

DensitySlices conditional_density_demo(double coef, bool causal,
                                       const InnovationSpec& innovation, std::size_t T,
                                       const std::vector<double>& percentiles,
                                       std::uint64_t seed, const std::string& out_csv) {
    if (T < 500) throw std::invalid_argument("conditional_density_demo: T must be >= 500");
    MarModel model(causal ? std::vector<double>{coef} : std::vector<double>{},
                   causal ? std::vector<double>{} : std::vector<double>{coef}, innovation);
    std::vector<double> y = simulate_mar(model, T, seed);

    std::vector<double> lag(y.begin(), y.end() - 1);
    std::vector<double> cur(y.begin() + 1, y.end());
    const std::size_t n = lag.size();

    DensitySlices out;
    const int G = 201;
    double ymin = *std::min_element(cur.begin(), cur.end());
    double ymax = *std::max_element(cur.begin(), cur.end());
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    out.grid.resize(G);
    for (int g = 0; g < G; ++g) out.grid[static_cast<std::size_t>(g)] = ymin + (ymax - ymin) * g / (G - 1);

    std::size_t n_win = std::max<std::size_t>(30, n / 20);
    for (double pc : percentiles) {
        const double x0 = empirical_quantile(lag, pc);
        out.x_values.push_back(x0);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(lag[a] - x0) < std::abs(lag[b] - x0);
        });
        std::vector<double> win;
        for (std::size_t i = 0; i < std::min(n_win, n); ++i) win.push_back(cur[order[i]]);

        // fixed-bandwidth Gaussian KDE, Silverman's rule
        double mean = std::accumulate(win.begin(), win.end(), 0.0) / win.size();
        double ss = 0.0;
        for (double v : win) ss += (v - mean) * (v - mean);
        double sd = std::sqrt(ss / std::max<std::size_t>(1, win.size() - 1));
        if (sd <= 0.0) sd = 1e-6;
        const double h = 1.06 * sd * std::pow(static_cast<double>(win.size()), -0.2);
        std::vector<double> dens(static_cast<std::size_t>(G), 0.0);
        for (int g = 0; g < G; ++g) {
            double s = 0.0;
            for (double v : win) {
                const double z = (out.grid[static_cast<std::size_t>(g)] - v) / h;
                s += std::exp(-0.5 * z * z);
            }
            dens[static_cast<std::size_t>(g)] = s * 0.3989422804014327 / (win.size() * h);
        }
        out.density.push_back(std::move(dens));
    }

    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        if (!f) throw std::runtime_error("cannot write " + out_csv);
        f << "y";
        for (double pc : percentiles) f << ",p" << static_cast<int>(std::lround(100 * pc));
        f << "\n" << std::setprecision(8);
        for (int g = 0; g < G; ++g) {
            f << out.grid[static_cast<std::size_t>(g)];
            for (const auto& d : out.density) f << "," << d[static_cast<std::size_t>(g)];
            f << "\n";
        }
    }
    return out;
}

namespace {

std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

std::string unquote(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

std::vector<double> parse_list(std::string s) {
    s = trim(s);
    if (!s.empty() && s.front() == '[') s = s.substr(1);
    if (!s.empty() && s.back() == ']') s.pop_back();
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

} // namespace

void apply_config_line(ExperimentConfig& cfg, const std::string& raw) {
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config: expected key = value, got: " + raw);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));

    if (key == "test") cfg.test = unquote(val);
    else if (key == "distribution" || key == "dist") cfg.dist = unquote(val);
    else if (key == "params") {
        auto a = val.find('{');
        auto b = val.rfind('}');
        if (a == std::string::npos || b == std::string::npos || b <= a)
            throw std::invalid_argument("config: params must be { key = value, ... }");
        std::stringstream ss(val.substr(a + 1, b - a - 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto e2 = item.find('=');
            if (e2 == std::string::npos) continue;
            std::string k2 = trim(item.substr(0, e2));
            if (k2 == "sigma") cfg.lognormal_sigma = std::stod(trim(item.substr(e2 + 1)));
            else throw std::invalid_argument("config: unknown param " + k2);
        }
    } else if (key == "phi") cfg.phi = parse_list(val);
    else if (key == "psi") cfg.psi = parse_list(val);
    else if (key == "gamma") cfg.gamma = parse_list(val);
    else if (key == "arch") cfg.arch = (unquote(val) == "true" || val == "1");
    else if (key == "T") cfg.T = std::stoi(val);
    else if (key == "replications" || key == "reps") cfg.replications = std::stoi(val);
    else if (key == "level") cfg.level = std::stod(val);
    else if (key == "interval") {
        std::vector<double> iv = parse_list(val);
        if (iv.size() != 2) throw std::invalid_argument("config: interval must be [lo, hi]");
        cfg.lo = iv[0];
        cfg.hi = iv[1];
    } else if (key == "k" || key == "k_sub") cfg.k_sub = std::stod(val);
    else if (key == "B") cfg.B = std::stoi(val);
    else if (key == "centering") cfg.ev_centering = unquote(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "threads") cfg.threads = std::stoi(val);
    else if (key == "cache") cfg.cache_path = unquote(val);
    else if (key == "out") cfg.out_dir = unquote(val);
    else if (key == "cell_id") cfg.cell_id = unquote(val);
    else throw std::invalid_argument("config: unknown key " + key);
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    ExperimentConfig cfg;
    std::string line;
    while (std::getline(in, line)) apply_config_line(cfg, line);
    return cfg;
}

} // namespace qnc
