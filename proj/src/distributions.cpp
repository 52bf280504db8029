#include "qnc/distributions.hpp"
#include "qnc/rng.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/skew_normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>

namespace qnc {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double skew_normal_location(double shape) {
    // location chosen so the mean of SkewNormal(loc, 1, shape) is 0
    double delta = shape / std::sqrt(1.0 + shape * shape);
    return -delta * std::sqrt(2.0 / kPi);
}

// central moments from raw moments of the uncentered law
double central_from_raw(const std::vector<double>& raw, double mu, int k) {
    // raw[j] = E X^j, raw[0] = 1
    double s = 0.0;
    double sign = 1.0;
    double binom = 1.0;
    for (int j = k; j >= 0; --j) {
        s += sign * binom * raw[static_cast<std::size_t>(j)] * std::pow(mu, k - j);
        sign = -sign;
        binom = binom * j / (k - j + 1.0);
    }
    return s;
}

template <class F>
double integrate_real_line(F f) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(
        f, -std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity(), 8, 1e-12);
}

} // namespace

InnovationSpec InnovationSpec::from_name(const std::string& name) {
    InnovationSpec s;
    if (name == "gaussian" || name == "normal") s.family = Family::Gaussian;
    else if (name == "exponential" || name == "exp") s.family = Family::Exponential;
    else if (name == "gamma") s.family = Family::Gamma;
    else if (name == "beta") s.family = Family::Beta;
    else if (name == "f") s.family = Family::F;
    else if (name == "chisq5" || name == "chisq" || name == "chi2") s.family = Family::ChiSq5;
    else if (name == "skewnormal" || name == "skewed-normal") s.family = Family::SkewNormal;
    else if (name == "trunccauchy" || name == "truncated-cauchy") s.family = Family::TruncCauchy;
    else if (name == "lognormal") s.family = Family::LogNormal;
    else if (name == "t3" || name == "t") s.family = Family::T3;
    else if (name == "uniform") s.family = Family::Uniform;
    else if (name == "laplace") s.family = Family::Laplace;
    else throw std::invalid_argument("unknown distribution: " + name);
    return s;
}

std::string InnovationSpec::name() const {
    switch (family) {
        case Family::Gaussian: return "gaussian";
        case Family::Exponential: return "exponential";
        case Family::Gamma: return "gamma";
        case Family::Beta: return "beta";
        case Family::F: return "f";
        case Family::ChiSq5: return "chisq5";
        case Family::SkewNormal: return "skewnormal";
        case Family::TruncCauchy: return "trunccauchy";
        case Family::LogNormal: return "lognormal";
        case Family::T3: return "t3";
        case Family::Uniform: return "uniform";
        case Family::Laplace: return "laplace";
    }
    return "?";
}

double InnovationSpec::centering() const {
    switch (family) {
        case Family::Gaussian: return 0.0;
        case Family::Exponential: return 1.0;
        case Family::Gamma: return 1.0;
        case Family::Beta: return 5.0 / 6.0;
        case Family::F: return 5.0 / 3.0;
        case Family::ChiSq5: return 5.0;
        case Family::SkewNormal: return 0.0; // location shift already makes the mean 0
        case Family::TruncCauchy: return 0.0;
        case Family::LogNormal: return std::exp(lognormal_sigma * lognormal_sigma / 2.0);
        case Family::T3: return 0.0;
        case Family::Uniform: return 0.5;
        case Family::Laplace: return 0.0;
    }
    return 0.0;
}

double quantile(const InnovationSpec& spec, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("quantile: tau must be in (0,1)");
    using namespace boost::math;
    const double c = spec.centering();
    switch (spec.family) {
        case Family::Gaussian: return boost::math::quantile(normal_distribution<double>(), tau);
        case Family::Exponential: return -std::log1p(-tau) - c;
        case Family::Gamma: return boost::math::quantile(gamma_distribution<double>(1.0, 1.0), tau) - c;
        case Family::Beta: return std::pow(tau, 0.2) - c;
        case Family::F: return boost::math::quantile(fisher_f_distribution<double>(5.0, 5.0), tau) - c;
        case Family::ChiSq5: return boost::math::quantile(chi_squared_distribution<double>(5.0), tau) - c;
        case Family::SkewNormal:
            return boost::math::quantile(
                skew_normal_distribution<double>(skew_normal_location(spec.skew_shape), 1.0, spec.skew_shape), tau);
        case Family::TruncCauchy:
            return std::tan((2.0 * tau - 1.0) * std::atan(spec.cauchy_bound));
        case Family::LogNormal:
            return std::exp(spec.lognormal_sigma * boost::math::quantile(normal_distribution<double>(), tau)) - c;
        case Family::T3: return boost::math::quantile(students_t_distribution<double>(3.0), tau);
        case Family::Uniform: return tau - c;
        case Family::Laplace: return boost::math::quantile(laplace_distribution<double>(0.0, 1.0), tau);
    }
    throw std::logic_error("unreachable");
}

double density(const InnovationSpec& spec, double u) {
    using namespace boost::math;
    const double c = spec.centering();
    const double x = u + c; // back to the uncentered law
    switch (spec.family) {
        case Family::Gaussian: return pdf(normal_distribution<double>(), u);
        case Family::Exponential: return x < 0.0 ? 0.0 : std::exp(-x);
        case Family::Gamma: return x < 0.0 ? 0.0 : std::exp(-x);
        case Family::Beta: return (x <= 0.0 || x >= 1.0) ? 0.0 : 5.0 * std::pow(x, 4.0);
        case Family::F: return x <= 0.0 ? 0.0 : pdf(fisher_f_distribution<double>(5.0, 5.0), x);
        case Family::ChiSq5: return x <= 0.0 ? 0.0 : pdf(chi_squared_distribution<double>(5.0), x);
        case Family::SkewNormal:
            return pdf(skew_normal_distribution<double>(skew_normal_location(spec.skew_shape), 1.0, spec.skew_shape), u);
        case Family::TruncCauchy: {
            const double b = spec.cauchy_bound;
            if (u < -b || u > b) return 0.0;
            return 1.0 / ((1.0 + u * u) * 2.0 * std::atan(b));
        }
        case Family::LogNormal:
            return x <= 0.0 ? 0.0 : pdf(lognormal_distribution<double>(0.0, spec.lognormal_sigma), x);
        case Family::T3: return pdf(students_t_distribution<double>(3.0), u);
        case Family::Uniform: return (x < 0.0 || x > 1.0) ? 0.0 : 1.0;
        case Family::Laplace: return 0.5 * std::exp(-std::abs(u));
    }
    throw std::logic_error("unreachable");
}

double cdf(const InnovationSpec& spec, double u) {
    using namespace boost::math;
    const double c = spec.centering();
    const double x = u + c;
    switch (spec.family) {
        case Family::Gaussian: return boost::math::cdf(normal_distribution<double>(), u);
        case Family::Exponential: return x < 0.0 ? 0.0 : -std::expm1(-x);
        case Family::Gamma: return x < 0.0 ? 0.0 : -std::expm1(-x);
        case Family::Beta:
            return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : std::pow(x, 5.0));
        case Family::F: return x <= 0.0 ? 0.0 : boost::math::cdf(fisher_f_distribution<double>(5.0, 5.0), x);
        case Family::ChiSq5: return x <= 0.0 ? 0.0 : boost::math::cdf(chi_squared_distribution<double>(5.0), x);
        case Family::SkewNormal:
            return boost::math::cdf(
                skew_normal_distribution<double>(skew_normal_location(spec.skew_shape), 1.0, spec.skew_shape), u);
        case Family::TruncCauchy: {
            const double b = spec.cauchy_bound;
            if (u <= -b) return 0.0;
            if (u >= b) return 1.0;
            return 0.5 * (1.0 + std::atan(u) / std::atan(b));
        }
        case Family::LogNormal:
            return x <= 0.0 ? 0.0 : boost::math::cdf(lognormal_distribution<double>(0.0, spec.lognormal_sigma), x);
        case Family::T3: return boost::math::cdf(students_t_distribution<double>(3.0), u);
        case Family::Uniform: return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
        case Family::Laplace: return boost::math::cdf(laplace_distribution<double>(0.0, 1.0), u);
    }
    throw std::logic_error("unreachable");
}

double central_moment(const InnovationSpec& spec, int k) {
    if (k < 2 || k > 6) throw std::domain_error("central_moment: k must be in 2..6");
    const std::size_t n = static_cast<std::size_t>(k);
    switch (spec.family) {
        case Family::Gaussian: {
            static const double m[] = {0, 0, 1, 0, 3, 0, 15};
            return m[n];
        }
        case Family::Exponential:
        case Family::Gamma: {
            // central moments of Exp(1)
            static const double m[] = {0, 0, 1, 2, 9, 44, 265};
            return m[n];
        }
        case Family::Beta: {
            std::vector<double> raw(7);
            for (int j = 0; j <= 6; ++j) raw[static_cast<std::size_t>(j)] = 5.0 / (5.0 + j);
            return central_from_raw(raw, 5.0 / 6.0, k);
        }
        case Family::F: {
            if (k >= 3) throw std::domain_error("central_moment: F(5,5) moment undefined for k>=3");
            // Var = 2 d2^2 (d1+d2-2) / (d1 (d2-2)^2 (d2-4))
            return 2.0 * 25.0 * 8.0 / (5.0 * 9.0 * 1.0);
        }
        case Family::ChiSq5: {
            // cumulants kappa_n = 2^{n-1} (n-1)! k, k=5
            const double k2 = 10, k3 = 40, k4 = 240, k5 = 1920, k6 = 19200;
            switch (k) {
                case 2: return k2;
                case 3: return k3;
                case 4: return k4 + 3 * k2 * k2;
                case 5: return k5 + 10 * k3 * k2;
                case 6: return k6 + 15 * k4 * k2 + 10 * k3 * k3 + 15 * k2 * k2 * k2;
            }
            break;
        }
        case Family::SkewNormal: {
            InnovationSpec s = spec;
            return integrate_real_line([&](double x) { return std::pow(x, k) * density(s, x); });
        }
        case Family::TruncCauchy: {
            if (k % 2 == 1) return 0.0;
            const double b = spec.cauchy_bound;
            const double norm = 2.0 * std::atan(b);
            using boost::math::quadrature::gauss_kronrod;
            return 2.0 * gauss_kronrod<double, 61>::integrate(
                       [&](double x) { return std::pow(x, k) / ((1.0 + x * x) * norm); }, 0.0, b, 10, 1e-12);
        }
        case Family::LogNormal: {
            const double s2 = spec.lognormal_sigma * spec.lognormal_sigma;
            std::vector<double> raw(7);
            for (int j = 0; j <= 6; ++j) raw[static_cast<std::size_t>(j)] = std::exp(0.5 * j * j * s2);
            return central_from_raw(raw, std::exp(0.5 * s2), k);
        }
        case Family::T3: {
            if (k >= 3) throw std::domain_error("central_moment: t3 moment undefined for k>=3");
            return 3.0; // nu/(nu-2)
        }
        case Family::Uniform: {
            if (k % 2 == 1) return 0.0;
            return std::pow(0.5, k) / (k + 1.0); // E U^k on (-1/2,1/2)
        }
        case Family::Laplace: {
            if (k % 2 == 1) return 0.0;
            double f = 1.0; // k!
            for (int j = 2; j <= k; ++j) f *= j;
            return f;
        }
    }
    throw std::logic_error("unreachable");
}

std::vector<double> sample(const InnovationSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = quantile(spec, uniform_at(seed, static_cast<std::int64_t>(i)));
    return out;
}

double draw_at(const InnovationSpec& spec, std::uint64_t seed, std::int64_t index) {
    return quantile(spec, uniform_at(seed, index));
}

} // namespace qnc
