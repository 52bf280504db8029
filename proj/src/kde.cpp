#include "qnc/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qnc {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gauss(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

} // namespace

AdaptiveKde::AdaptiveKde(const std::vector<double>& data) : x_(data) {
    const std::size_t n = x_.size();
    if (n < 8) throw std::invalid_argument("AdaptiveKde: too few points");

    double mean = std::accumulate(x_.begin(), x_.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x_) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    std::vector<double> sorted = x_;
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double p) {
        double idx = p * static_cast<double>(n - 1);
        std::size_t lo = static_cast<std::size_t>(idx);
        std::size_t hi = std::min(lo + 1, n - 1);
        double w = idx - static_cast<double>(lo);
        return (1.0 - w) * sorted[lo] + w * sorted[hi];
    };
    const double iqr = q(0.75) - q(0.25);
    double spread = std::min(sd, iqr / 1.349);
    if (spread <= 0.0) spread = sd > 0.0 ? sd : 1.0;
    h0_ = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    if (h0_ <= 0.0) h0_ = 1.0;

    // pilot density at the sample points
    std::vector<double> pilot(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += gauss((x_[i] - x_[j]) / h0_);
        pilot[i] = s / (static_cast<double>(n) * h0_);
    }
    double logsum = 0.0;
    for (double f : pilot) logsum += std::log(std::max(f, 1e-300));
    const double geomean = std::exp(logsum / static_cast<double>(n));

    h_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lambda = std::sqrt(geomean / std::max(pilot[i], 1e-300));
        h_[i] = h0_ * std::min(lambda, 1e6);
    }
}

double AdaptiveKde::density(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) s += gauss((x - x_[i]) / h_[i]) / h_[i];
    return s / static_cast<double>(x_.size());
}

double AdaptiveKde::density_deriv(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
        const double z = (x - x_[i]) / h_[i];
        s += -z * gauss(z) / (h_[i] * h_[i]);
    }
    return s / static_cast<double>(x_.size());
}

} // namespace qnc
