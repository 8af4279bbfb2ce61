#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "optosqueeze/analytic.hpp"
#include "optosqueeze/params.hpp"
#include "optosqueeze/quadrature.hpp"
#include "optosqueeze/random.hpp"

namespace optosqueeze::classical {

/// Phase-space point of the fully classical model. beta = (x + i p) / sqrt(2).
struct ClassicalState {
    cplx alpha_L{0.0, 0.0};
    double x = 0.0;
    double p = 0.0;
    double t = 0.0;
};

/**
 * Draws alpha_L(0) = alpha + delta and (x, p).
 *
 * delta = (dx + i dp) / sqrt(2) with dx, dp ~ N(0, 1/2), i.e. the field noise
 * has the vacuum quadrature variance in the same convention as the
 * oscillator; Re delta and Im delta therefore have variance 1/4. x and p are
 * N(0, sigma2_cl).
 */
ClassicalState sample_initial_conditions(const PhysicalParams& params, RandomSource& rng);

/// Exact evolution of the rotating-frame averaged equations of motion by duration dt.
ClassicalState evolve_classical(const ClassicalState& state0, double dt, const PhysicalParams& params);

struct EnsembleOptions {
    std::size_t n_samples = 100000;
    int theta_grid_n = analytic::kDefaultThetaGrid;
    std::uint64_t master_seed = 0;
    std::size_t jackknife_blocks = 100;
    /// Runs whose stderr/var_min exceeds this somewhere set precision_warning.
    double target_relative_stderr = 0.01;
    unsigned workers = 0;  ///< 0 = hardware concurrency
};

struct EnsembleResult {
    QuadratureSeries series;
    std::vector<FieldMoments> moments;  ///< bias-corrected ensemble moments per time
    std::vector<double> var_min_covariance;  ///< 4 * smallest eigenvalue of cov(Re, Im)
    bool precision_warning = false;
};

/**
 * Monte Carlo estimate of the quadrature variance over sampled initial
 * conditions. Trajectory i uses stream (master_seed, i); the result is
 * independent of the worker count.
 */
EnsembleResult ensemble_variance(const PhysicalParams& params, std::span<const double> times_over_tau,
                                 const EnsembleOptions& options);

/// Minimum quadrature variance from the 2x2 covariance of (Re alpha_L, Im alpha_L).
double covariance_min_variance(const FieldMoments& moments);

}  // namespace optosqueeze::classical
