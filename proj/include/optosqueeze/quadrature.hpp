#pragma once

#include <complex>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "optosqueeze/params.hpp"

namespace optosqueeze {

using cplx = std::complex<double>;

/**
 * First and second field moments, sufficient for every quadrature variance.
 *
 * With X_theta = a e^{-i theta} + a^dag e^{i theta}:
 *   Var_theta = 2<n> + 1 - 2|<a>|^2 + 2 Re[(<a^2> - <a>^2) e^{-2i theta}].
 * Classical ensembles reuse it with n = E|alpha_L|^2 - 1/2, since a
 * c-number amplitude has no ordering term.
 */
struct FieldMoments {
    cplx a{0.0, 0.0};   ///< <a>
    cplx a2{0.0, 0.0};  ///< <a^2>
    double n = 0.0;     ///< <a^dag a>

    double variance(double theta) const;
    /// Closed-form minimum over theta; used as a cross-check only.
    double min_variance_closed_form() const;
};

/// Kahan-Babuska (Neumaier) compensated accumulator.
template <typename T>
class CompensatedSum {
public:
    void add(T x) {
        const T t = sum_ + x;
        if constexpr (std::is_same_v<T, cplx>) {
            comp_ += cplx(neumaier(sum_.real(), x.real(), t.real()), neumaier(sum_.imag(), x.imag(), t.imag()));
        } else {
            comp_ += neumaier(sum_, x, t);
        }
        sum_ = t;
    }
    T value() const { return sum_ + comp_; }

private:
    static double neumaier(double s, double x, double t) {
        return std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    }
    T sum_{};
    T comp_{};
};

/// Time-resolved quadrature statistics of one curve.
struct QuadratureSeries {
    std::string label;
    PhysicalParams params;
    std::vector<double> times;  ///< in units of the mechanical period
    std::vector<double> var_min;
    std::vector<double> theta_star;  ///< canonical representative in [0, pi)
    std::vector<double> var_fixed_theta;  ///< at theta = 0
    std::optional<std::vector<double>> stderr_;

    std::size_t size() const noexcept { return times.size(); }

    /// Throws InvariantViolation when lengths, ordering, or positivity fail.
    void validate() const;
};

}  // namespace optosqueeze
