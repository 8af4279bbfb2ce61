#include "optosqueeze/params.hpp"

#include <limits>

namespace optosqueeze {

namespace {

// CODATA 2018 exact values.
constexpr double kHbar = 1.054571817e-34;
constexpr double kBoltzmann = 1.380649e-23;

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

void require_finite_nonneg(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
        throw DomainError(std::string("PhysicalParams.") + name + " must be finite and >= 0, got " +
                          std::to_string(v));
    }
}

}  // namespace

void PhysicalParams::validate() const {
    require_finite_nonneg(alpha, "alpha");
    require_finite_nonneg(k, "k");
    if (!std::isfinite(omega) || omega <= 0.0) {
        throw DomainError("PhysicalParams.omega must be finite and > 0, got " + std::to_string(omega));
    }
    require_finite_nonneg(nbar_q, "nbar_q");
    require_finite_nonneg(sigma2_cl, "sigma2_cl");
    require_finite_nonneg(Gamma, "Gamma");
    require_finite_nonneg(kappa, "kappa");
    require_finite_nonneg(gamma_m, "gamma_m");
    require_finite_nonneg(nbar_bath, "nbar_bath");
}

double thermal_occupation_quantum(double temperature_K, double omega_SI) {
    require(std::isfinite(temperature_K) && std::isfinite(omega_SI), "thermal occupation: non-finite input");
    require(temperature_K >= 0.0, "thermal occupation: temperature must be >= 0");
    require(omega_SI > 0.0, "thermal occupation: omega must be > 0");
    if (temperature_K == 0.0) return 0.0;
    const double x = kHbar * omega_SI / (kBoltzmann * temperature_K);
    if (x > std::log(std::numeric_limits<double>::max())) return 0.0;
    return 1.0 / std::expm1(x);
}

double thermal_occupation_classical(double temperature_K, double omega_SI) {
    require(std::isfinite(temperature_K) && std::isfinite(omega_SI), "thermal occupation: non-finite input");
    require(temperature_K >= 0.0, "thermal occupation: temperature must be >= 0");
    require(omega_SI > 0.0, "thermal occupation: omega must be > 0");
    return kBoltzmann * temperature_K / (kHbar * omega_SI);
}

Envelope envelope_functions(double t, const PhysicalParams& params) {
    if (!std::isfinite(t) || t < 0.0) {
        throw DomainError("envelope_functions: t must be finite and >= 0, got " + std::to_string(t));
    }
    const double phase = params.omega * t;
    const double k2 = params.k * params.k;
    // 1 - cos(x) = 2 sin^2(x/2) keeps precision near multiples of the period.
    const double s = std::sin(0.5 * phase);
    const double one_minus_cos = 2.0 * s * s;
    Envelope env;
    env.A = 2.0 * k2 * (phase - std::sin(phase));
    env.B = 2.0 * k2 * (2.0 * params.nbar_q + 1.0) * one_minus_cos;
    env.C = 4.0 * params.sigma2_cl * k2 * one_minus_cos;
    return env;
}

}  // namespace optosqueeze
