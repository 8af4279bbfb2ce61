#include "optosqueeze/quadrature.hpp"

#include <cmath>

namespace optosqueeze {

double FieldMoments::variance(double theta) const {
    const cplx m = a2 - a * a;
    const cplx rot = std::polar(1.0, -2.0 * theta);
    return 2.0 * n + 1.0 - 2.0 * std::norm(a) + 2.0 * (m * rot).real();
}

double FieldMoments::min_variance_closed_form() const {
    return 2.0 * n + 1.0 - 2.0 * std::norm(a) - 2.0 * std::abs(a2 - a * a);
}

void QuadratureSeries::validate() const {
    const std::size_t n = times.size();
    if (var_min.size() != n || theta_star.size() != n || var_fixed_theta.size() != n ||
        (stderr_ && stderr_->size() != n)) {
        throw InvariantViolation("series.lengths", "column lengths differ in '" + label + "'");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw InvariantViolation("series.times_increasing",
                                     "'" + label + "' index " + std::to_string(i));
        }
        if (!(var_min[i] > 0.0) || !(var_fixed_theta[i] > 0.0) || !std::isfinite(var_min[i]) ||
            !std::isfinite(var_fixed_theta[i])) {
            throw InvariantViolation("series.variance_positive",
                                     "'" + label + "' at t/tau = " + std::to_string(times[i]));
        }
        if (stderr_ && !((*stderr_)[i] >= 0.0)) {
            throw InvariantViolation("series.stderr_nonnegative", "'" + label + "' index " + std::to_string(i));
        }
    }
}

}  // namespace optosqueeze
