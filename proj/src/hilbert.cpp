#include "optosqueeze/hilbert.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace optosqueeze::hilbert {

namespace {

constexpr double kPhotonTailCut = 1e-14;

int top_decile_start(int cutoff) { return static_cast<int>(std::ceil(0.9 * cutoff)); }

int phonon_cutoff_for(double y, int thermal_cut) {
    return std::max(20, static_cast<int>(std::ceil(y * y + 8.0 * y + 10.0))) + thermal_cut;
}

int photon_tail_start(const Truncation& t) { return top_decile_start(std::max(t.np, t.np_nominal)); }

// Truncated H_n = omega b^dag b - k omega n (b + b^dag) on phonon states 0..nm.
Eigen::MatrixXd block_hamiltonian(const PhysicalParams& p, int n, int nm) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nm + 1, nm + 1);
    const double coupling = p.k * p.omega * n;
    for (int m = 0; m <= nm; ++m) {
        h(m, m) = p.omega * m;
        if (m < nm) {
            h(m, m + 1) = -coupling * std::sqrt(m + 1.0);
            h(m + 1, m) = h(m, m + 1);
        }
    }
    return h;
}

Eigen::VectorXcd coherent_vector(cplx beta, int nm) {
    Eigen::VectorXcd v(nm + 1);
    v(0) = std::exp(-0.5 * std::norm(beta));
    for (int m = 1; m <= nm; ++m) v(m) = v(m - 1) * beta / std::sqrt(static_cast<double>(m));
    return v;
}

// Trace over the common phonon range of a possibly rectangular block.
cplx block_trace(const Eigen::MatrixXcd& b) {
    const Eigen::Index d = std::min(b.rows(), b.cols());
    cplx s{0.0, 0.0};
    for (Eigen::Index i = 0; i < d; ++i) s += b(i, i);
    return s;
}

}  // namespace

std::vector<double> coherent_amplitudes(double alpha, int np) {
    if (alpha < 0.0 || !std::isfinite(alpha)) throw DomainError("coherent_amplitudes: alpha must be >= 0");
    std::vector<double> c(static_cast<std::size_t>(np) + 1, 0.0);
    if (alpha == 0.0) {
        c[0] = 1.0;
        return c;
    }
    const double log_alpha = std::log(alpha);
    for (int n = 0; n <= np; ++n) {
        c[n] = std::exp(-0.5 * alpha * alpha + n * log_alpha - 0.5 * std::lgamma(n + 1.0));
    }
    return c;
}

std::vector<double> thermal_weights(double nbar, double tail) {
    if (nbar < 0.0 || !std::isfinite(nbar)) throw DomainError("thermal_weights: nbar must be >= 0");
    if (nbar == 0.0) return {1.0};
    const double ratio = nbar / (nbar + 1.0);
    std::vector<double> p;
    double w = 1.0 / (nbar + 1.0);
    double cum = 0.0;
    while (cum <= 1.0 - tail) {
        p.push_back(w);
        cum += w;
        w *= ratio;
        if (p.size() > 1000000) throw DomainError("thermal_weights: occupation too large to truncate");
    }
    for (double& x : p) x /= cum;
    return p;
}

Truncation default_truncation(const PhysicalParams& params) {
    params.validate();
    const double a = params.alpha;
    const int np_formula = static_cast<int>(std::ceil(a * a + 8.0 * a + 10.0));
    const auto c = coherent_amplitudes(a, np_formula);
    int np = np_formula;
    double suffix = 0.0;
    for (int n = np_formula; n >= 0; --n) {
        if (suffix + c[n] * c[n] >= kPhotonTailCut) {
            np = n;
            break;
        }
        suffix += c[n] * c[n];
    }
    np = std::clamp(np, 2, np_formula);

    int thermal_cut = 0;
    if (params.nbar_q > 0.0) thermal_cut = static_cast<int>(thermal_weights(params.nbar_q).size()) - 1;
    if (params.gamma_m > 0.0 && params.nbar_bath > 0.0) {
        thermal_cut = std::max(thermal_cut, static_cast<int>(thermal_weights(params.nbar_bath).size()) - 1);
    }

    Truncation t;
    t.np = np;
    t.np_nominal = np_formula;
    t.nm_per_photon.resize(static_cast<std::size_t>(np) + 1);
    for (int n = 0; n <= np; ++n) t.nm_per_photon[n] = phonon_cutoff_for(2.0 * params.k * n, thermal_cut);
    t.nm = *std::max_element(t.nm_per_photon.begin(), t.nm_per_photon.end());
    return t;
}

// ---------------------------------------------------------------------------
// DensityOperator

double DensityOperator::hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

double DensityOperator::min_eigenvalue() const {
    const Eigen::MatrixXcd h = 0.5 * (m_ + m_.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double DensityOperator::purity() const { return (m_ * m_).trace().real(); }

FieldMoments DensityOperator::field_moments() const {
    FieldMoments fm;
    const Eigen::Index dim = m_.rows();
    for (Eigen::Index n = 0; n < dim; ++n) {
        const double nd = static_cast<double>(n);
        fm.n += nd * m_(n, n).real();
        if (n >= 1) fm.a += std::sqrt(nd) * m_(n, n - 1);
        if (n >= 2) fm.a2 += std::sqrt(nd * (nd - 1.0)) * m_(n, n - 2);
    }
    return fm;
}

void DensityOperator::check_invariants(bool check_positivity) const {
    const double herm = hermiticity_error();
    if (herm > 1e-10) throw InvariantViolation("density.hermitian", "max |rho - rho^dag| = " + std::to_string(herm));
    const double tr_err = std::abs(trace() - 1.0);
    if (tr_err > 1e-8) throw InvariantViolation("density.trace", "|Tr rho - 1| = " + std::to_string(tr_err));
    if (check_positivity) {
        const double ev = min_eigenvalue();
        if (ev < -1e-8) throw InvariantViolation("density.positive", "min eigenvalue " + std::to_string(ev));
    }
}

// ---------------------------------------------------------------------------
// TruncatedJointState

double TruncatedJointState::tail_mass() const {
    const int np = trunc_.np;
    double photon_tail = 0.0;
    for (int n = photon_tail_start(trunc_); n <= np; ++n) photon_tail += amp_.row(n).squaredNorm();
    double phonon_tail = 0.0;
    for (int n = 0; n <= np; ++n) {
        const int cut = trunc_.phonon_cutoff(n);
        const int start = top_decile_start(cut);
        phonon_tail += amp_.row(n).segment(start, cut - start + 1).squaredNorm();
    }
    return std::max(photon_tail, phonon_tail);
}

double TruncatedJointState::photon_number() const {
    double s = 0.0;
    for (int n = 1; n <= trunc_.np; ++n) s += n * amp_.row(n).squaredNorm();
    return s;
}

FieldMoments TruncatedJointState::field_moments() const {
    // <a> = sum_n sqrt(n) <psi_{n-1}|psi_n>, <a^2> = sum_n sqrt(n(n-1)) <psi_{n-2}|psi_n>.
    FieldMoments fm;
    for (int n = 1; n <= trunc_.np; ++n) {
        const double nd = n;
        fm.n += nd * amp_.row(n).squaredNorm();
        fm.a += std::sqrt(nd) * amp_.row(n - 1).conjugate().cwiseProduct(amp_.row(n)).sum();
        if (n >= 2) fm.a2 += std::sqrt(nd * (nd - 1.0)) * amp_.row(n - 2).conjugate().cwiseProduct(amp_.row(n)).sum();
    }
    return fm;
}

DensityOperator TruncatedJointState::reduced_field() const { return DensityOperator(amp_ * amp_.adjoint()); }

void TruncatedJointState::check_invariants(double tail_threshold) const {
    const double drift = std::abs(norm2() - 1.0);
    if (drift > 1e-10) throw InvariantViolation("joint_state.norm", "|norm^2 - 1| = " + std::to_string(drift));
    const double tail = tail_mass();
    if (tail > tail_threshold) {
        std::ostringstream msg;
        msg << "tail mass " << tail << " exceeds " << tail_threshold << " (np = " << trunc_.np
            << ", nm = " << trunc_.nm << ")";
        throw InvariantViolation("joint_state.tail_mass", msg.str());
    }
}

// ---------------------------------------------------------------------------
// JointBlockDensity

JointBlockDensity::JointBlockDensity(Truncation trunc, int max_offset) : trunc_(std::move(trunc)), max_offset_(max_offset) {
    if (max_offset_ < 0 || max_offset_ > trunc_.np) throw DomainError("JointBlockDensity: max_offset out of range");
    std::size_t start = 0;
    for (int d = 0; d <= max_offset_; ++d) {
        offset_start_.push_back(start);
        for (int n = d; n <= trunc_.np; ++n) {
            blocks_.emplace_back(Eigen::MatrixXcd::Zero(trunc_.phonon_cutoff(n) + 1, trunc_.phonon_cutoff(n - d) + 1));
        }
        start += static_cast<std::size_t>(trunc_.np - d + 1);
    }
}

std::size_t JointBlockDensity::index(int n, int d) const {
    return offset_start_[static_cast<std::size_t>(d)] + static_cast<std::size_t>(n - d);
}

double JointBlockDensity::trace() const {
    double s = 0.0;
    for (int n = 0; n <= trunc_.np; ++n) s += block(n, 0).trace().real();
    return s;
}

double JointBlockDensity::tail_mass() const {
    double photon_tail = 0.0;
    for (int n = photon_tail_start(trunc_); n <= trunc_.np; ++n) photon_tail += block(n, 0).trace().real();
    double phonon_tail = 0.0;
    for (int n = 0; n <= trunc_.np; ++n) {
        const auto& b = block(n, 0);
        const int cut = trunc_.phonon_cutoff(n);
        for (int m = top_decile_start(cut); m <= cut; ++m) phonon_tail += b(m, m).real();
    }
    return std::max(photon_tail, phonon_tail);
}

double JointBlockDensity::mechanical_energy() const {
    double s = 0.0;
    for (int n = 0; n <= trunc_.np; ++n) {
        const auto& b = block(n, 0);
        for (Eigen::Index m = 1; m < b.rows(); ++m) s += static_cast<double>(m) * b(m, m).real();
    }
    return s;
}

double JointBlockDensity::diagonal_hermiticity_error() const {
    double e = 0.0;
    for (int n = 0; n <= trunc_.np; ++n) {
        const auto& b = block(n, 0);
        e = std::max(e, (b - b.adjoint()).cwiseAbs().maxCoeff());
    }
    return e;
}

FieldMoments JointBlockDensity::field_moments() const {
    if (max_offset_ < 2) throw DomainError("JointBlockDensity::field_moments needs max_offset >= 2");
    FieldMoments fm;
    for (int n = 0; n <= trunc_.np; ++n) {
        const double nd = n;
        fm.n += nd * block(n, 0).trace().real();
        if (n >= 1) fm.a += std::sqrt(nd) * block_trace(block(n, 1));
        if (n >= 2) fm.a2 += std::sqrt(nd * (nd - 1.0)) * block_trace(block(n, 2));
    }
    return fm;
}

DensityOperator JointBlockDensity::reduced_field() const {
    if (max_offset_ != trunc_.np) throw DomainError("JointBlockDensity::reduced_field needs max_offset == np");
    Eigen::MatrixXcd rho(trunc_.np + 1, trunc_.np + 1);
    for (int d = 0; d <= max_offset_; ++d) {
        for (int n = d; n <= trunc_.np; ++n) {
            const cplx v = block_trace(block(n, d));
            rho(n, n - d) = v;
            rho(n - d, n) = std::conj(v);
        }
    }
    return DensityOperator(std::move(rho));
}

JointBlockDensity initial_block_density(const PhysicalParams& params, Truncation trunc, int max_offset,
                                        const MechanicalInit& mech) {
    params.validate();
    const auto c = coherent_amplitudes(params.alpha, trunc.np);
    JointBlockDensity rho(std::move(trunc), max_offset);
    const Truncation& tr = rho.truncation();
    const int nm_max = tr.nm;

    Eigen::MatrixXcd mech_rho = Eigen::MatrixXcd::Zero(nm_max + 1, nm_max + 1);
    switch (mech.kind) {
        case MechanicalInit::Kind::Vacuum: mech_rho(0, 0) = 1.0; break;
        case MechanicalInit::Kind::Thermal: {
            const auto p = thermal_weights(mech.nbar);
            if (static_cast<int>(p.size()) > nm_max + 1) throw DomainError("initial_block_density: nm too small for thermal state");
            for (std::size_t m = 0; m < p.size(); ++m) mech_rho(m, m) = p[m];
            break;
        }
        case MechanicalInit::Kind::Coherent: {
            const Eigen::VectorXcd v = coherent_vector(mech.beta, nm_max);
            mech_rho = v * v.adjoint();
            break;
        }
    }
    for (int d = 0; d <= max_offset; ++d) {
        for (int n = d; n <= tr.np; ++n) {
            auto& b = rho.block(n, d);
            b = (c[n] * c[n - d]) * mech_rho.topLeftCorner(b.rows(), b.cols());
        }
    }
    return rho;
}

// ---------------------------------------------------------------------------
// Closed evolution

ClosedPropagator::ClosedPropagator(const PhysicalParams& params, Truncation trunc)
    : params_(params), trunc_(std::move(trunc)) {
    params_.validate();
    coeffs_ = coherent_amplitudes(params_.alpha, trunc_.np);
    energies_.reserve(static_cast<std::size_t>(trunc_.np) + 1);
    vectors_.reserve(static_cast<std::size_t>(trunc_.np) + 1);
    for (int n = 0; n <= trunc_.np; ++n) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block_hamiltonian(params_, n, trunc_.phonon_cutoff(n)));
        energies_.push_back(es.eigenvalues());
        vectors_.push_back(es.eigenvectors());
    }
}

Eigen::VectorXcd ClosedPropagator::propagate_fock(int n, int m0, double t) const {
    const auto& V = vectors_[n];
    const auto& E = energies_[n];
    Eigen::VectorXcd coeff(E.size());
    for (Eigen::Index j = 0; j < E.size(); ++j) coeff(j) = std::polar(V(m0, j), -E(j) * t);
    return V.cast<cplx>() * coeff;
}

TruncatedJointState ClosedPropagator::evolve_pure(double t, int m0) const {
    Eigen::MatrixXcd amp = Eigen::MatrixXcd::Zero(trunc_.np + 1, trunc_.nm + 1);
    for (int n = 0; n <= trunc_.np; ++n) {
        if (m0 > trunc_.phonon_cutoff(n)) throw DomainError("evolve_pure: initial phonon index beyond truncation");
        const Eigen::VectorXcd psi = propagate_fock(n, m0, t);
        amp.row(n).head(psi.size()) = coeffs_[n] * psi.transpose();
    }
    return TruncatedJointState(std::move(amp), trunc_);
}

DensityOperator ClosedPropagator::evolve_thermal_field(double t, double nbar) const {
    const auto p = thermal_weights(nbar);
    const int np = trunc_.np;
    Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(np + 1, np + 1);
    double tail = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) {
        Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(trunc_.nm + 1, np + 1);
        for (int n = 0; n <= np; ++n) {
            const int cut = trunc_.phonon_cutoff(n);
            if (static_cast<int>(m) > top_decile_start(cut)) {
                throw InvariantViolation("closed_thermal.truncation",
                                         "thermal Fock index " + std::to_string(m) + " reaches the phonon cutoff");
            }
            const Eigen::VectorXcd v = propagate_fock(n, static_cast<int>(m), t);
            phi.col(n).head(v.size()) = v;
            const int start = top_decile_start(cut);
            tail += p[m] * coeffs_[n] * coeffs_[n] * v.segment(start, cut - start + 1).squaredNorm();
        }
        gram.noalias() += p[m] * (phi.adjoint() * phi);
    }
    if (tail > kDefaultTailThreshold) {
        throw InvariantViolation("closed_thermal.tail_mass", "phonon tail mass " + std::to_string(tail));
    }
    // rho(n, n') = c_n c_n' <phi_n'|phi_n>, and gram(a, b) = <phi_a|phi_b>.
    Eigen::MatrixXcd rho(np + 1, np + 1);
    for (int n = 0; n <= np; ++n) {
        for (int q = 0; q <= np; ++q) rho(n, q) = coeffs_[n] * coeffs_[q] * gram(q, n);
    }
    return DensityOperator(std::move(rho));
}

JointBlockDensity ClosedPropagator::evolve_blocks(const JointBlockDensity& rho0, double t) const {
    const int np = trunc_.np;
    std::vector<Eigen::MatrixXcd> U(static_cast<std::size_t>(np) + 1);
    for (int n = 0; n <= np; ++n) {
        const auto& V = vectors_[n];
        const auto& E = energies_[n];
        Eigen::VectorXcd phase(E.size());
        for (Eigen::Index j = 0; j < E.size(); ++j) phase(j) = std::polar(1.0, -E(j) * t);
        U[n] = V.cast<cplx>() * phase.asDiagonal() * V.transpose().cast<cplx>();
    }
    JointBlockDensity out = rho0;
    for (int d = 0; d <= rho0.max_offset(); ++d) {
        for (int n = d; n <= np; ++n) out.block(n, d) = U[n] * rho0.block(n, d) * U[n - d].adjoint();
    }
    return out;
}

TruncatedJointState evolve_closed(const PhysicalParams& params, double t, Truncation trunc) {
    ClosedPropagator prop(params, std::move(trunc));
    auto state = prop.evolve_pure(t);
    state.check_invariants();
    return state;
}

DensityOperator evolve_closed_thermal(const PhysicalParams& params, double t, Truncation trunc) {
    ClosedPropagator prop(params, std::move(trunc));
    auto rho = prop.evolve_thermal_field(t, params.nbar_q);
    rho.check_invariants(false);
    return rho;
}

TruncatedJointState evolve_closed_stepped(const PhysicalParams& params, double t, Truncation trunc, double dt) {
    params.validate();
    if (!(dt > 0.0)) throw DomainError("evolve_closed_stepped: dt must be > 0");
    const int np = trunc.np;
    const auto c = coherent_amplitudes(params.alpha, np);
    std::vector<Eigen::MatrixXd> H;
    std::vector<Eigen::VectorXcd> psi;
    for (int n = 0; n <= np; ++n) {
        const int cut = trunc.phonon_cutoff(n);
        H.push_back(block_hamiltonian(params, n, cut));
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(cut + 1);
        v(0) = c[n];
        psi.push_back(std::move(v));
    }
    const long steps = std::max(1L, static_cast<long>(std::ceil(t / dt - 1e-12)));
    const double h = t / static_cast<double>(steps);
    const cplx mi{0.0, -1.0};
    for (int n = 0; n <= np; ++n) {
        const Eigen::MatrixXcd Hc = H[n].cast<cplx>();
        auto& y = psi[n];
        for (long s = 0; s < steps; ++s) {
            const Eigen::VectorXcd k1 = mi * (Hc * y);
            const Eigen::VectorXcd k2 = mi * (Hc * (y + 0.5 * h * k1));
            const Eigen::VectorXcd k3 = mi * (Hc * (y + 0.5 * h * k2));
            const Eigen::VectorXcd k4 = mi * (Hc * (y + h * k3));
            y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    Eigen::MatrixXcd amp = Eigen::MatrixXcd::Zero(np + 1, trunc.nm + 1);
    for (int n = 0; n <= np; ++n) amp.row(n).head(psi[n].size()) = psi[n].transpose();
    return TruncatedJointState(std::move(amp), std::move(trunc));
}

double field_variance_from_state(const TruncatedJointState& state, double theta) {
    return state.field_moments().variance(theta);
}

double field_variance_from_state(const DensityOperator& rho, double theta) {
    return rho.field_moments().variance(theta);
}

double field_variance_from_state(const JointBlockDensity& rho, double theta) {
    return rho.field_moments().variance(theta);
}

// ---------------------------------------------------------------------------
// Master equation

namespace {

Eigen::ArrayXd sqrt_ramp(Eigen::Index n) {
    Eigen::ArrayXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = std::sqrt(static_cast<double>(i + 1));
    return r;
}

Eigen::ArrayXd index_ramp(Eigen::Index n) { return Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)); }

struct BlockRates {
    double omega, k, down, up, cavity;
};

// d/dt of block (n, d) written into out (same shape as R).
void block_derivative(const JointBlockDensity& rho, int n, int d, const BlockRates& r, Eigen::MatrixXcd& out) {
    const Eigen::MatrixXcd& R = rho.block(n, d);
    const Eigen::Index rows = R.rows();
    const Eigen::Index cols = R.cols();
    const int nr = n;
    const int nc = n - d;
    const Eigen::ArrayXd ir = index_ramp(rows);
    const Eigen::ArrayXd ic = index_ramp(cols);
    const Eigen::ArrayXd sr = sqrt_ramp(rows - 1);
    const Eigen::ArrayXd sc = sqrt_ramp(cols - 1);
    const cplx mi{0.0, -1.0};

    // -i (H_n R - R H_{n-d}), both tridiagonal in the phonon index.
    Eigen::MatrixXcd comm = (r.omega * ir).matrix().asDiagonal() * R - R * (r.omega * ic).matrix().asDiagonal();
    const double cr = r.k * r.omega * nr;
    const double cc = r.k * r.omega * nc;
    if (cr != 0.0) {
        comm.topRows(rows - 1) -= cr * (sr.matrix().asDiagonal() * R.bottomRows(rows - 1));
        comm.bottomRows(rows - 1) -= cr * (sr.matrix().asDiagonal() * R.topRows(rows - 1));
    }
    if (cc != 0.0) {
        comm.leftCols(cols - 1) += cc * (R.rightCols(cols - 1) * sc.matrix().asDiagonal());
        comm.rightCols(cols - 1) += cc * (R.leftCols(cols - 1) * sc.matrix().asDiagonal());
    }
    out.noalias() = mi * comm;

    if (r.down != 0.0) {
        // b R b^dag - (n_i + n_j) R / 2
        out.topLeftCorner(rows - 1, cols - 1) +=
            r.down * (sr.matrix().asDiagonal() * R.bottomRightCorner(rows - 1, cols - 1) * sc.matrix().asDiagonal());
        for (Eigen::Index j = 0; j < cols; ++j) out.col(j).array() -= 0.5 * r.down * (ir + ic(j)) * R.col(j).array();
    }
    if (r.up != 0.0) {
        // b^dag R b - {b b^dag, R} / 2, with b b^dag truncated to the kept space
        out.bottomRightCorner(rows - 1, cols - 1) +=
            r.up * (sr.matrix().asDiagonal() * R.topLeftCorner(rows - 1, cols - 1) * sc.matrix().asDiagonal());
        Eigen::ArrayXd ur = ir + 1.0;
        Eigen::ArrayXd uc = ic + 1.0;
        ur(rows - 1) = 0.0;
        uc(cols - 1) = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) out.col(j).array() -= 0.5 * r.up * (ur + uc(j)) * R.col(j).array();
    }
    if (r.cavity != 0.0) {
        if (n + 1 <= rho.truncation().np) {
            const Eigen::MatrixXcd& up = rho.block(n + 1, d);
            out += (r.cavity * std::sqrt((nr + 1.0) * (nc + 1.0))) * up.topLeftCorner(rows, cols);
        }
        out -= (0.5 * r.cavity * (nr + nc)) * R;
    }
}

void derivative(const JointBlockDensity& rho, const BlockRates& r, JointBlockDensity& out) {
    const int np = rho.truncation().np;
    for (int d = 0; d <= rho.max_offset(); ++d) {
        for (int n = d; n <= np; ++n) block_derivative(rho, n, d, r, out.block(n, d));
    }
}

BlockRates rates_for(const PhysicalParams& p, Dissipators which) {
    BlockRates r{p.omega, p.k, 0.0, 0.0, 0.0};
    if (which.mechanical) {
        r.down = p.gamma_m * (p.nbar_bath + 1.0);
        r.up = p.gamma_m * p.nbar_bath;
    }
    if (which.cavity) r.cavity = p.kappa;
    return r;
}

class Rk4Stepper {
public:
    Rk4Stepper(const JointBlockDensity& shape, BlockRates rates) : r_(rates), k_(shape), tmp_(shape), acc_(shape) {}

    void step(JointBlockDensity& y, double h) {
        auto& yb = y.blocks();
        auto& kb = k_.blocks();
        auto& tb = tmp_.blocks();
        auto& ab = acc_.blocks();
        const std::size_t nb = yb.size();

        derivative(y, r_, k_);
        for (std::size_t i = 0; i < nb; ++i) {
            ab[i] = kb[i];
            tb[i] = yb[i] + (0.5 * h) * kb[i];
        }
        derivative(tmp_, r_, k_);
        for (std::size_t i = 0; i < nb; ++i) {
            ab[i] += 2.0 * kb[i];
            tb[i] = yb[i] + (0.5 * h) * kb[i];
        }
        derivative(tmp_, r_, k_);
        for (std::size_t i = 0; i < nb; ++i) {
            ab[i] += 2.0 * kb[i];
            tb[i] = yb[i] + h * kb[i];
        }
        derivative(tmp_, r_, k_);
        for (std::size_t i = 0; i < nb; ++i) {
            yb[i] += (h / 6.0) * (ab[i] + kb[i]);
            // Decayed entries would otherwise sink into subnormals, which are very slow to multiply.
            yb[i] = yb[i].unaryExpr([](const cplx& v) {
                return std::abs(v.real()) + std::abs(v.imag()) < 1e-200 ? cplx{0.0, 0.0} : v;
            });
        }
    }

private:
    BlockRates r_;
    JointBlockDensity k_, tmp_, acc_;
};

}  // namespace

double default_lindblad_dt(const PhysicalParams& params, const Truncation& trunc) {
    params.validate();
    // Spectral radius bound: free rotation, the coupling band, and the decay rates.
    const double coupling = 2.0 * params.k * params.omega * trunc.np * std::sqrt(trunc.nm + 1.0);
    const double decay = params.gamma_m * (2.0 * params.nbar_bath + 1.0) * (trunc.nm + 1.0) + params.kappa * trunc.np;
    const double radius = params.omega * (trunc.nm + 1.0) + coupling + decay;
    return 2.0 / radius;
}

void lindblad_rk4_step(JointBlockDensity& rho, const PhysicalParams& params, Dissipators which, double dt) {
    Rk4Stepper stepper(rho, rates_for(params, which));
    stepper.step(rho, dt);
}

LindbladTrace evolve_lindblad_trace(JointBlockDensity rho, const PhysicalParams& params, Dissipators which,
                                    std::span<const double> sample_times, double dt, double tail_threshold) {
    params.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("evolve_lindblad: dt must be > 0");
    Rk4Stepper stepper(rho, rates_for(params, which));
    LindbladTrace out;
    double t = 0.0;
    for (double target : sample_times) {
        if (target < t - 1e-12) throw DomainError("evolve_lindblad: sample times must be non-decreasing and >= 0");
        const double span = target - t;
        if (span > 0.0) {
            const long steps = std::max(1L, static_cast<long>(std::ceil(span / dt - 1e-9)));
            const double h = span / static_cast<double>(steps);
            for (long s = 0; s < steps; ++s) stepper.step(rho, h);
        }
        t = std::max(t, target);
        const double drift = std::abs(rho.trace() - 1.0);
        out.max_trace_drift = std::max(out.max_trace_drift, drift);
        if (drift > 1e-6) {
            throw InvariantViolation("lindblad.trace", "trace drift " + std::to_string(drift) + " at t = " + std::to_string(t));
        }
        const double tail = rho.tail_mass();
        out.max_tail_mass = std::max(out.max_tail_mass, tail);
        if (tail > tail_threshold) out.truncation_ok = false;
        out.times.push_back(t);
        out.moments.push_back(rho.field_moments());
        out.mechanical_energy.push_back(rho.mechanical_energy());
    }
    return out;
}

namespace {

JointBlockDensity integrate_to(JointBlockDensity rho, double t, const PhysicalParams& params, Dissipators which,
                               double dt) {
    params.validate();
    if (!(dt > 0.0)) throw DomainError("evolve_lindblad: dt must be > 0");
    if (t < 0.0) throw DomainError("evolve_lindblad: t must be >= 0");
    if (t == 0.0) return rho;
    Rk4Stepper stepper(rho, rates_for(params, which));
    const long steps = std::max(1L, static_cast<long>(std::ceil(t / dt - 1e-9)));
    const double h = t / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) stepper.step(rho, h);
    const double drift = std::abs(rho.trace() - 1.0);
    if (drift > 1e-6) throw InvariantViolation("lindblad.trace", "trace drift " + std::to_string(drift));
    return rho;
}

}  // namespace

JointBlockDensity evolve_lindblad_mech(JointBlockDensity rho0, double t, const PhysicalParams& params, double dt) {
    return integrate_to(std::move(rho0), t, params, {true, false}, dt);
}

JointBlockDensity evolve_lindblad_cavity(JointBlockDensity rho0, double t, const PhysicalParams& params, double dt) {
    return integrate_to(std::move(rho0), t, params, {params.gamma_m > 0.0, true}, dt);
}

double lindblad_halving_change(const JointBlockDensity& rho0, const PhysicalParams& params, Dissipators which,
                               std::span<const double> sample_times, double dt) {
    const auto coarse = evolve_lindblad_trace(rho0, params, which, sample_times, dt);
    const auto fine = evolve_lindblad_trace(rho0, params, which, sample_times, 0.5 * dt);
    double worst = 0.0;
    for (std::size_t i = 0; i < coarse.moments.size(); ++i) {
        worst = std::max(worst, std::abs(coarse.moments[i].variance(0.0) - fine.moments[i].variance(0.0)));
        worst = std::max(worst, std::abs(coarse.moments[i].min_variance_closed_form() -
                                         fine.moments[i].min_variance_closed_form()));
    }
    return worst;
}

}  // namespace optosqueeze::hilbert
