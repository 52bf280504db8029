#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qnc {

enum class Family {
    Gaussian,
    Exponential,
    Gamma,
    Beta,
    F,
    ChiSq5,
    SkewNormal,
    TruncCauchy,
    LogNormal,
    T3,
    Uniform,
    Laplace,
};

// A centered innovation family: the raw law shifted so the mean is 0
// (TruncCauchy is symmetric already; t3/Laplace/Gaussian/Uniform centered by
// construction).
struct InnovationSpec {
    Family family = Family::Gaussian;
    double lognormal_sigma = 2.0; // LogNormal(0, sigma)
    double skew_shape = 5.0;      // SkewNormal shape
    double cauchy_bound = 100.0;  // TruncCauchy truncation +/- bound

    static InnovationSpec from_name(const std::string& name);
    std::string name() const;
    double centering() const; // mean of the raw (uncentered) law
};

double quantile(const InnovationSpec& spec, double tau);
double density(const InnovationSpec& spec, double u);
double cdf(const InnovationSpec& spec, double u);

// Analytic central moment of the centered innovation, k in 2..6.
// Throws std::domain_error when the moment does not exist (t3 k>=3, F(5,5) k>=3).
double central_moment(const InnovationSpec& spec, int k);

// n iid draws via inverse-CDF of counter-based uniforms; draw i depends only on
// (seed, i).
std::vector<double> sample(const InnovationSpec& spec, std::size_t n, std::uint64_t seed);

// single draw at a given stream position (used by the simulators)
double draw_at(const InnovationSpec& spec, std::uint64_t seed, std::int64_t index);

} // namespace qnc
