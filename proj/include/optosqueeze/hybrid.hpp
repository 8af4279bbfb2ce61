#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optosqueeze/hilbert.hpp"
#include "optosqueeze/params.hpp"
#include "optosqueeze/quadrature.hpp"
#include "optosqueeze/random.hpp"

namespace optosqueeze::hybrid {

/// Field density matrix (photon-number basis) coupled to a classical oscillator.
struct HybridTrajectoryState {
    hilbert::DensityOperator rho_field;
    double x = 0.0;
    double p = 0.0;
    double t = 0.0;
    RandomSource rng;
};

/// Thrown when a trajectory loses more than half of its trace in one step.
class TrajectoryAborted : public InvariantViolation {
public:
    using InvariantViolation::InvariantViolation;
};

/// |alpha><alpha| truncated to photon numbers 0..np (renormalized), oscillator at (x0, p0).
HybridTrajectoryState initial_hybrid_state(const PhysicalParams& params, int np, double x0, double p0,
                                           RandomSource rng);

/// Photon cutoff used by the hybrid model (the field part of the default truncation).
int default_photon_cutoff(const PhysicalParams& params);

/// Rejects Gamma = 0 with g0 != 0 (the oscillator noise amplitude diverges) and oversized steps.
void validate_step(const PhysicalParams& params, double dt);

/**
 * Integration scheme for the field update.
 *
 * Exponential applies the measurement part as rho <- F rho F^dag with the
 * diagonal F_n = exp(i g0 x dt n + sqrt(2 Gamma) u_n dW - 2 Gamma dt u_n^2),
 * u_n = n - <n>. It agrees with Euler-Maruyama to first order in dt and keeps
 * rho positive, which the plain scheme does not once x has diffused far from
 * zero. EulerMaruyama evaluates the increments term by term.
 */
enum class Scheme { Exponential, EulerMaruyama };

/**
 * One step with the Wiener increment dW ~ N(0, dt) drawn from the state's
 * stream. The same dW drives the field innovation and the oscillator kick.
 * Photon loss, when enabled, is added as an explicit Euler term.
 */
void sde_step(HybridTrajectoryState& state, double dt, const PhysicalParams& params, bool include_cavity_decay,
              Scheme scheme = Scheme::Exponential);

/// Same step with a caller-supplied increment.
void sde_step_with_increment(HybridTrajectoryState& state, double dt, const PhysicalParams& params,
                             bool include_cavity_decay, double dW, Scheme scheme = Scheme::Exponential);

enum class InitMode { Zero, ThermalMatched };

struct HybridOptions {
    double dt_over_tau = 1e-3;
    double sample_stride_over_tau = 0.1;
    bool cavity_decay = false;
    Scheme scheme = Scheme::Exponential;
    int np = -1;  ///< photon cutoff; negative selects default_photon_cutoff
    std::uint64_t master_seed = 0;
    unsigned workers = 0;
    /// Per-trajectory squeeze flags look for var_min < 1 in (0, horizon].
    double squeeze_horizon_over_tau = 10.0;
    int tail_check_every = 100;
    double tail_threshold = hilbert::kDefaultTailThreshold;
    /// Keep each trajectory's rho at the sample times (needed for mean_rho).
    bool keep_states = false;
};

/// Samples of one trajectory; times are in units of the mechanical period.
struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<FieldMoments> moments;
    std::vector<double> var_min;  ///< conditional minimum quadrature variance
    std::vector<double> n_mean;
    std::vector<double> n_variance;
    std::vector<double> purity;
    std::vector<double> x;
    std::vector<double> p;
    std::vector<Eigen::MatrixXcd> states;  ///< filled when keep_states is set
    Eigen::VectorXd final_populations;
    bool aborted = false;
    std::string abort_reason;
};

/**
 * Integrates one trajectory to t_final_over_tau, sampling every
 * sample_stride_over_tau (t = 0 included). Aborts are reported in the record
 * instead of thrown.
 */
TrajectoryRecord run_trajectory(const PhysicalParams& params, double t_final_over_tau, const HybridOptions& options,
                                double x0, double p0, RandomSource rng);

struct CollapseSummary {
    int dominant_fock = 0;
    double dominant_population = 0.0;
    std::optional<double> time_to_purity_90;  ///< t / tau of the first sample with purity >= 0.9
    /// First and last sampled t / tau with var_min < 1; empty when never squeezed.
    std::optional<std::pair<double, double>> squeeze_window;
};

CollapseSummary collapse_diagnostics(const TrajectoryRecord& record);

struct HybridEnsembleResult {
    /// Minimum over theta of the trajectory-averaged conditional variance; stderr over trajectories.
    QuadratureSeries conditional;
    /// Variance of the trajectory-averaged state.
    QuadratureSeries mixture;
    std::vector<double> n_mean;
    std::vector<double> n_stderr;
    /// Standard deviation over trajectories of the conditional var_min (band width).
    std::vector<double> var_min_spread;
    std::vector<std::uint8_t> squeeze_flags;  ///< one per completed trajectory
    std::vector<CollapseSummary> collapse;
    std::vector<Eigen::MatrixXcd> mean_rho;  ///< filled when keep_states is set
    std::size_t n_completed = 0;
    std::size_t n_aborted = 0;
};

/**
 * Runs n_traj trajectories (stream index = trajectory index) and reduces
 * them in index order, so the result does not depend on the worker count.
 * More than 1% aborted trajectories throws InvariantViolation.
 */
HybridEnsembleResult ensemble_average(const PhysicalParams& params, std::size_t n_traj, double t_final_over_tau,
                                      InitMode init_mode, const HybridOptions& options);

}  // namespace optosqueeze::hybrid
