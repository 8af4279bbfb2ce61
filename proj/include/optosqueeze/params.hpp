#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace optosqueeze {

/// Raised when an input lies outside a documented domain.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical invariant (norm, trace, truncation tail, ...) fails.
class InvariantViolation : public std::runtime_error {
public:
    InvariantViolation(std::string invariant, const std::string& detail)
        : std::runtime_error(invariant + ": " + detail), invariant_(std::move(invariant)) {}

    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

/**
 * Dimensionless model parameters of the single-mode optomechanical cavity.
 *
 * Time is measured in units where the mechanical frequency `omega` sets the
 * scale (default 1). The optomechanical coupling enters through the rescaled
 * strength k = g0 / (sqrt(2) omega).
 */
struct PhysicalParams {
    double alpha = 20.0;     ///< real coherent amplitude
    double k = 0.01;         ///< rescaled coupling
    double omega = 1.0;      ///< mechanical angular frequency
    double nbar_q = 0.0;     ///< quantum thermal occupation of the initial oscillator
    double sigma2_cl = 0.5;  ///< classical initial oscillator variance per quadrature
    double Gamma = 0.0;      ///< information-gain rate of the hybrid measurement model
    double kappa = 0.0;      ///< cavity field decay rate
    double gamma_m = 0.0;    ///< mechanical damping rate
    double nbar_bath = 0.0;  ///< mechanical bath occupation

    double g0() const noexcept { return std::numbers::sqrt2 * k * omega; }
    double period() const noexcept { return 2.0 * std::numbers::pi / omega; }

    /// Throws DomainError naming the first offending field.
    void validate() const;
};

/// Sigma^2 preset matching the quantum ground state (x, p variance 1/2 each).
inline constexpr double kVacuumMatchedVariance = 0.5;

/// 1 / (exp(hbar omega / kB T) - 1); zero at T = 0.
double thermal_occupation_quantum(double temperature_K, double omega_SI);

/// kB T / (hbar omega).
double thermal_occupation_classical(double temperature_K, double omega_SI);

/// The three envelope functions shared by every closed-form variance.
struct Envelope {
    double A = 0.0;  ///< 2k^2 (wt - sin wt), the accumulated Kerr-like phase
    double B = 0.0;  ///< 2k^2 (2 nbar_q + 1)(1 - cos wt)
    double C = 0.0;  ///< 4 sigma2_cl k^2 (1 - cos wt)
};

Envelope envelope_functions(double t, const PhysicalParams& params);

}  // namespace optosqueeze
