#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "optosqueeze/params.hpp"
#include "optosqueeze/quadrature.hpp"

namespace optosqueeze::analytic {

/// Minimum of a quadrature variance over theta in [0, pi).
struct ThetaMinimum {
    double var_min = 0.0;
    double theta_star = 0.0;
};

inline constexpr int kDefaultThetaGrid = 256;

/**
 * Coarse grid over [0, pi) followed by golden-section refinement around the
 * best grid cell until the bracket is narrower than 1e-7.
 *
 * f must be pi-periodic (Var_{theta+pi} = Var_theta). Ties on the grid go to
 * the smaller angle, and a refined point only replaces the grid point when it
 * is strictly lower, so constant functions return theta = 0.
 * Throws DomainError for grid_n < 16 and InvariantViolation for non-finite f.
 */
ThetaMinimum minimize_over_theta(const std::function<double(double)>& f, int grid_n = kDefaultThetaGrid);

/// Quantum variance for a coherent field and thermal (nbar_q) oscillator.
double quantum_variance(double theta, double t, const PhysicalParams& params);

/// The nine helper functions of the classical closed form.
struct ClassicalEnvelope {
    double d1, d2, d3;
    double c1, c2;
    double s1, s2;
    double phi1, phi2;
};

ClassicalEnvelope classical_envelope(double A);

/// Fully classical ensemble variance (Gaussian field noise, sigma2_cl oscillator).
double classical_variance(double theta, double t, const PhysicalParams& params);

enum class MeanFieldMode { Constant, Poisson, Gaussian };

/// Mean-field hybrid variance for the selected intensity interpretation.
double meanfield_variance(double theta, double t, const PhysicalParams& params, MeanFieldMode mode);

enum class Revival { First, Second };

/// Half-width of the revival window in mechanical periods.
inline constexpr double kDefaultRevivalWindow = 10.0;

/**
 * Two-term approximations of the quantum variance near revival centers
 * omega t = N pi / (2k^2) (first, N odd) or N pi / k^2 (second).
 *
 * Throws DomainError when t lies outside every window; the message names the
 * nearest valid center.
 */
double revival_approximation(double theta, double t, const PhysicalParams& params, Revival which,
                             double window_periods = kDefaultRevivalWindow);

/// Center (in time units) of the N-th revival of the given kind.
double revival_center(const PhysicalParams& params, Revival which, int N);

/**
 * log10 Var_theta at t = tau over a grid. Row i corresponds to alpha_grid[i],
 * column j to k_grid[j]; the returned vector is row-major.
 */
std::vector<double> sweep_variance_at_tau(std::span<const double> alpha_grid, std::span<const double> k_grid,
                                          double theta, const PhysicalParams& base = {});

struct BlockadeCheck {
    double blockade_ratio = 0.0;  ///< g0^2 / (omega kappa)
    double cooperativity = 0.0;   ///< 2 g0^2 / (kappa gamma)
    bool blockade = false;
    bool strong_cooperativity = false;
};

BlockadeCheck blockade_check(double g0, double omega, double kappa, double gamma_m);

/// Curves with a closed form.
enum class ClosedForm { Quantum, Classical, MeanFieldConstant, MeanFieldPoisson, MeanFieldGaussian };

/// Evaluates one closed form on a time grid (times in periods), minimizing over theta at each point.
QuadratureSeries closed_form_series(ClosedForm which, const PhysicalParams& params, std::span<const double> times_over_tau,
                                    int theta_grid_n = kDefaultThetaGrid, std::string label = {});

double closed_form_variance(ClosedForm which, double theta, double t, const PhysicalParams& params);

}  // namespace optosqueeze::analytic
