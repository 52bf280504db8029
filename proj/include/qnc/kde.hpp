#pragma once

#include <vector>

namespace qnc {

// Two-stage adaptive Gaussian kernel density estimator: pilot fixed-bandwidth
// fit, then per-point bandwidth factors lambda_i = (f_pilot(x_i)/geomean)^(-1/2).
class AdaptiveKde {
public:
    explicit AdaptiveKde(const std::vector<double>& data);

    double density(double x) const;
    double density_deriv(double x) const;
    double pilot_bandwidth() const { return h0_; }

private:
    std::vector<double> x_;
    std::vector<double> h_; // per-point bandwidths
    double h0_ = 0.0;
};

} // namespace qnc
