#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "optosqueeze/params.hpp"
#include "optosqueeze/quadrature.hpp"

namespace optosqueeze::hilbert {

/// Largest photon / phonon Fock index kept (dimensions are np + 1, nm + 1).
struct Truncation {
    int np = 0;
    int nm = 0;  ///< global phonon cutoff, the largest per-block value
    /// Optional per-photon-number phonon cutoffs (size np + 1); empty means nm for every block.
    std::vector<int> nm_per_photon;
    /// Untightened photon cutoff; the photon tail window is the top 10% of [0, max(np, np_nominal)].
    int np_nominal = 0;

    int phonon_cutoff(int n) const { return nm_per_photon.empty() ? nm : nm_per_photon[static_cast<std::size_t>(n)]; }
    static Truncation uniform(int np, int nm) { return {np, nm, {}}; }
};

/// Default tail-mass threshold above which a state is flagged invalid.
inline constexpr double kDefaultTailThreshold = 1e-8;

/**
 * np = ceil(alpha^2 + 8 alpha + 10), tightened to the first n beyond which the
 * Poisson tail weight is below 1e-14. Block n gets the phonon cutoff
 * ceil(y^2 + 8y + 10) (at least 20) with y = 2 k n the displaced-oscillator
 * amplitude; a thermal initial state or bath adds the thermal Fock cutoff.
 */
Truncation default_truncation(const PhysicalParams& params);

/// Real coherent-state Fock amplitudes c_0..c_np, computed in log space.
std::vector<double> coherent_amplitudes(double alpha, int np);

/// Geometric (thermal) Fock weights, cut where the cumulative weight exceeds 1 - tail.
std::vector<double> thermal_weights(double nbar, double tail = 1e-10);

/// Field-only (or any square) density matrix.
class DensityOperator {
public:
    DensityOperator() = default;
    explicit DensityOperator(Eigen::MatrixXcd m) : m_(std::move(m)) {}

    const Eigen::MatrixXcd& matrix() const noexcept { return m_; }
    Eigen::MatrixXcd& matrix() noexcept { return m_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }

    cplx trace() const { return m_.trace(); }
    double hermiticity_error() const;
    double min_eigenvalue() const;
    double purity() const;

    /// Field moments; the matrix is indexed by photon number.
    FieldMoments field_moments() const;
    /// Throws InvariantViolation when trace, hermiticity, or (optionally) positivity fail.
    void check_invariants(bool check_positivity = true) const;

private:
    Eigen::MatrixXcd m_;
};

/**
 * Pure joint state; row n is the photon index, column m the phonon index.
 */
class TruncatedJointState {
public:
    TruncatedJointState(Eigen::MatrixXcd amplitudes, Truncation trunc)
        : amp_(std::move(amplitudes)), trunc_(trunc) {}

    const Eigen::MatrixXcd& amplitudes() const noexcept { return amp_; }
    const Truncation& truncation() const noexcept { return trunc_; }

    double norm2() const { return amp_.squaredNorm(); }
    /// Probability in the top 10% of either index (the larger of the two).
    double tail_mass() const;
    double photon_number() const;
    FieldMoments field_moments() const;
    DensityOperator reduced_field() const;
    /// Throws InvariantViolation on norm drift > 1e-10 or tail mass above the threshold.
    void check_invariants(double tail_threshold = kDefaultTailThreshold) const;

private:
    Eigen::MatrixXcd amp_;
    Truncation trunc_;
};

/**
 * Joint density operator stored as photon-number blocks.
 *
 * Block (n, d) is the phonon-space operator <n| rho |n - d> for
 * 0 <= d <= max_offset; negative offsets follow from hermiticity. Every
 * generator used here (the optomechanical Hamiltonian, mechanical damping,
 * photon loss) preserves the offset d, so blocks with d <= 2 carry all the
 * field moments at a fraction of the full cost. Set max_offset = np when the
 * full reduced field state is needed.
 */
class JointBlockDensity {
public:
    JointBlockDensity(Truncation trunc, int max_offset);

    const Truncation& truncation() const noexcept { return trunc_; }
    int max_offset() const noexcept { return max_offset_; }

    Eigen::MatrixXcd& block(int n, int d) { return blocks_[index(n, d)]; }
    const Eigen::MatrixXcd& block(int n, int d) const { return blocks_[index(n, d)]; }
    std::vector<Eigen::MatrixXcd>& blocks() noexcept { return blocks_; }
    const std::vector<Eigen::MatrixXcd>& blocks() const noexcept { return blocks_; }

    double trace() const;
    double tail_mass() const;
    double mechanical_energy() const;  ///< <b^dag b>
    double diagonal_hermiticity_error() const;
    FieldMoments field_moments() const;
    /// Requires max_offset == np.
    DensityOperator reduced_field() const;

    /// Offset of block (n, d) in blocks(); blocks are ordered by d, then n.
    std::size_t index(int n, int d) const;

private:
    Truncation trunc_;
    int max_offset_;
    std::vector<std::size_t> offset_start_;
    std::vector<Eigen::MatrixXcd> blocks_;
};

/// Initial oscillator state for the density-operator paths.
struct MechanicalInit {
    enum class Kind { Vacuum, Thermal, Coherent } kind = Kind::Vacuum;
    double nbar = 0.0;       ///< Thermal
    cplx beta{0.0, 0.0};     ///< Coherent
};

/// rho(0) = |alpha><alpha| (x) rho_mech.
JointBlockDensity initial_block_density(const PhysicalParams& params, Truncation trunc, int max_offset,
                                        const MechanicalInit& mech = {});

/**
 * Exact closed evolution. The Hamiltonian is block diagonal in photon
 * number; each block is a displaced oscillator whose truncated Hamiltonian is
 * diagonalized once, so any t is reached without time stepping.
 */
class ClosedPropagator {
public:
    ClosedPropagator(const PhysicalParams& params, Truncation trunc);

    const Truncation& truncation() const noexcept { return trunc_; }

    /// Coherent field (x) mechanical Fock state |m0>.
    TruncatedJointState evolve_pure(double t, int m0 = 0) const;
    /// Reduced field state for a thermal (nbar_q) oscillator mixture.
    DensityOperator evolve_thermal_field(double t, double nbar) const;
    /// Applies U_n(t) rho U_{n-d}(t)^dag to every block.
    JointBlockDensity evolve_blocks(const JointBlockDensity& rho0, double t) const;

private:
    Eigen::VectorXcd propagate_fock(int n, int m0, double t) const;

    PhysicalParams params_;
    Truncation trunc_;
    std::vector<double> coeffs_;
    std::vector<Eigen::VectorXd> energies_;
    std::vector<Eigen::MatrixXd> vectors_;
};

/// Closed evolution from coherent (x) vacuum.
TruncatedJointState evolve_closed(const PhysicalParams& params, double t, Truncation trunc);
/// Closed evolution from coherent (x) thermal(nbar_q); returns the reduced field state.
DensityOperator evolve_closed_thermal(const PhysicalParams& params, double t, Truncation trunc);

/// Independent step-integrator oracle for the pure closed path (fixed-step RK4).
TruncatedJointState evolve_closed_stepped(const PhysicalParams& params, double t, Truncation trunc, double dt);

double field_variance_from_state(const TruncatedJointState& state, double theta);
double field_variance_from_state(const DensityOperator& rho, double theta);
double field_variance_from_state(const JointBlockDensity& rho, double theta);

/// Which dissipators act in addition to the Hamiltonian.
struct Dissipators {
    bool mechanical = false;  ///< rates gamma_m, nbar_bath
    bool cavity = false;      ///< rate kappa
};

/// Samples of a Lindblad run.
struct LindbladTrace {
    std::vector<double> times;
    std::vector<FieldMoments> moments;
    std::vector<double> mechanical_energy;
    double max_trace_drift = 0.0;
    double max_tail_mass = 0.0;
    bool truncation_ok = true;
};

/// Step size inside the RK4 stability region of the truncated generator.
double default_lindblad_dt(const PhysicalParams& params, const Truncation& trunc);

/// One RK4 step of the block-vectorized master equation.
void lindblad_rk4_step(JointBlockDensity& rho, const PhysicalParams& params, Dissipators which, double dt);

/**
 * Integrates the master equation with fixed-step RK4, recording the field
 * moments at each of the (non-decreasing, physical-unit) sample times.
 * Trace drift above 1e-6 throws InvariantViolation.
 */
LindbladTrace evolve_lindblad_trace(JointBlockDensity rho, const PhysicalParams& params, Dissipators which,
                                    std::span<const double> sample_times, double dt,
                                    double tail_threshold = kDefaultTailThreshold);

/// Integrates to time t with mechanical damping only.
JointBlockDensity evolve_lindblad_mech(JointBlockDensity rho0, double t, const PhysicalParams& params, double dt);
/// Integrates to time t with photon loss, plus mechanical damping when gamma_m > 0.
JointBlockDensity evolve_lindblad_cavity(JointBlockDensity rho0, double t, const PhysicalParams& params, double dt);

/// Largest |Delta Var| (theta = 0 and min over theta) between runs at dt and dt/2.
double lindblad_halving_change(const JointBlockDensity& rho0, const PhysicalParams& params, Dissipators which,
                               std::span<const double> sample_times, double dt);

}  // namespace optosqueeze::hilbert
