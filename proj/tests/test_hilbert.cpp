#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "optosqueeze/analytic.hpp"
#include "optosqueeze/hilbert.hpp"
#include "oracles.hpp"

using namespace optosqueeze;
using namespace optosqueeze::hilbert;

namespace {
constexpr double kPi = std::numbers::pi;

PhysicalParams small(double nbar = 0.0) {
    PhysicalParams p;
    p.alpha = 2.0;
    p.k = 0.1;
    p.nbar_q = nbar;
    return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Eigen::MatrixXcd diag(const std::vector<double>& w) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = w[i];
    return m;
}
}  // namespace

TEST_CASE("truncation rule") {
    const PhysicalParams p = small();
    const Truncation t = default_truncation(p);
    CHECK(t.np_nominal == 30);
    CHECK(t.np <= t.np_nominal);
    CHECK(t.np >= 16);
    REQUIRE(t.nm_per_photon.size() == static_cast<std::size_t>(t.np) + 1);
    for (int n = 0; n <= t.np; ++n) {
        const double y = 2.0 * p.k * n;
        CHECK(t.phonon_cutoff(n) == std::max(20, static_cast<int>(std::ceil(y * y + 8 * y + 10))));
    }
    const auto c = coherent_amplitudes(p.alpha, t.np);
    double dropped = 1.0;
    for (double v : c) dropped -= v * v;
    CHECK(dropped < 1e-13);

    const auto w = thermal_weights(1.0);
    double s = 0.0;
    for (double v : w) s += v;
    CHECK(s >= 1.0 - 1e-10);
    CHECK(w[1] / w[0] == doctest::Approx(0.5));
    CHECK(default_truncation(small(1.0)).nm > t.nm);
}

TEST_CASE("field variance of textbook states") {
    // Vacuum, Fock |3>, Poisson mixture with mean 4.
    DensityOperator vac(diag({1.0, 0.0, 0.0}));
    for (double th : {0.0, 1.0}) CHECK(field_variance_from_state(vac, th) == doctest::Approx(1.0));

    std::vector<double> f(6, 0.0);
    f[3] = 1.0;
    for (double th : {0.0, 0.5, 2.0}) CHECK(field_variance_from_state(DensityOperator(diag(f)), th) == doctest::Approx(7.0));

    std::vector<double> poisson(60);
    double s = 0;
    for (int n = 0; n < 60; ++n) s += (poisson[n] = oracle::poisson_pmf(4.0, n));
    for (double& v : poisson) v /= s;
    const DensityOperator mix(diag(poisson));
    CHECK(field_variance_from_state(mix, 0.3) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(oracle::fock_variance(mix.matrix(), 0.3) == doctest::Approx(9.0).epsilon(1e-6));
}

TEST_CASE("density operator invariant checks reject broken states") {
    DensityOperator ok(diag({0.5, 0.5}));
    CHECK_NOTHROW(ok.check_invariants());
    DensityOperator bad_trace(diag({0.5, 0.4}));
    CHECK_THROWS_AS(bad_trace.check_invariants(), InvariantViolation);
    Eigen::MatrixXcd nh = diag({0.5, 0.5});
    nh(0, 1) = 0.1;
    CHECK_THROWS_AS(DensityOperator(nh).check_invariants(), InvariantViolation);
    DensityOperator negative(diag({1.2, -0.2}));
    CHECK_THROWS_AS(negative.check_invariants(true), InvariantViolation);
}

TEST_CASE("closed evolution: k = 0 leaves the coherent state alone") {
    PhysicalParams p = small();
    p.k = 0.0;
    const Truncation tr = default_truncation(p);
    for (double tt : {0.3, 2.0, 7.7}) {
        const auto s = evolve_closed(p, tt * p.period(), tr);
        for (double th : {0.0, 1.1}) CHECK(field_variance_from_state(s, th) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("closed evolution reproduces the quantum closed form") {
    const PhysicalParams p = small();
    const Truncation tr = default_truncation(p);
    ClosedPropagator prop(p, tr);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double t = 0.25 * i * p.period();
        const auto s = prop.evolve_pure(t);
        const FieldMoments m = s.field_moments();
        for (double th : {0.0, 0.8, 2.1}) worst = std::max(worst, rel(m.variance(th), analytic::quantum_variance(th, t, p)));
        // Explicit ladder-operator matrices as a second extraction path.
        if (i % 5 == 0) {
            CHECK(rel(oracle::fock_variance(s.reduced_field().matrix(), 0.4), analytic::quantum_variance(0.4, t, p)) < 1e-6);
        }
    }
    CHECK(worst < 1e-6);

    const double t3 = 3.0 * p.period();
    CHECK(rel(field_variance_from_state(evolve_closed(p, t3, tr), 0.0), analytic::quantum_variance(0.0, t3, p)) < 1e-6);

    // Same thing through the sweep entry at t = tau.
    const std::vector<double> a{2.0}, k{0.1};
    const double sweep = analytic::sweep_variance_at_tau(a, k, 0.0)[0];
    CHECK(std::abs(sweep - std::log10(field_variance_from_state(evolve_closed(p, p.period(), tr), 0.0))) < 1e-6);
}

TEST_CASE("closed evolution with a thermal oscillator") {
    const PhysicalParams p = small(1.0);
    const Truncation tr = default_truncation(p);
    for (double tt : {0.4, 1.0, 2.3}) {
        const double t = tt * p.period();
        const auto rho = evolve_closed_thermal(p, t, tr);
        CHECK(rho.hermiticity_error() < 1e-10);
        CHECK(std::abs(rho.trace().real() - 1.0) < 1e-8);
        CHECK(rho.min_eigenvalue() > -1e-8);
        CHECK(rel(field_variance_from_state(rho, 0.5), analytic::quantum_variance(0.5, t, p)) < 1e-6);
    }
    // At whole periods the oscillator temperature drops out.
    const double t2 = 2.0 * p.period();
    const double cold = field_variance_from_state(evolve_closed(small(), t2, default_truncation(small())), 0.0);
    CHECK(rel(field_variance_from_state(evolve_closed_thermal(p, t2, tr), 0.0), cold) < 1e-9);
}

TEST_CASE("closed evolution: decoupling at whole periods, conserved photon number, norm") {
    const PhysicalParams p = small();
    const Truncation tr = default_truncation(p);
    ClosedPropagator prop(p, tr);
    const double n0 = prop.evolve_pure(0.0).photon_number();
    for (int m = 1; m <= 10; ++m) {
        const auto s = prop.evolve_pure(m * p.period());
        CHECK(std::abs(s.norm2() - 1.0) < 1e-10);
        CHECK(std::abs(s.photon_number() - n0) < 1e-10);
        CHECK(s.reduced_field().purity() == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(s.tail_mass() < kDefaultTailThreshold);
    }
    const auto mid = prop.evolve_pure(0.5 * p.period());
    CHECK(mid.reduced_field().purity() < 0.999);
}

TEST_CASE("step-integrator oracle agrees with the eigenbasis propagator") {
    const PhysicalParams p = small();
    const Truncation tr = default_truncation(p);
    const double t = 1.37 * p.period();
    const auto exact = evolve_closed(p, t, tr);
    const auto stepped = evolve_closed_stepped(p, t, tr, 2e-3);
    for (double th : {0.0, 1.2}) {
        CHECK(rel(field_variance_from_state(stepped, th), field_variance_from_state(exact, th)) < 1e-8);
    }
    CHECK((stepped.amplitudes() - exact.amplitudes()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("block density under the closed propagator matches the pure path") {
    const PhysicalParams p = small();
    const Truncation tr = default_truncation(p);
    ClosedPropagator prop(p, tr);
    const auto rho0 = initial_block_density(p, tr, tr.np);
    CHECK(rho0.trace() == doctest::Approx(1.0).epsilon(1e-12));
    const double t = 0.6 * p.period();
    const auto rho = prop.evolve_blocks(rho0, t);
    const auto pure = prop.evolve_pure(t);
    CHECK(rel(field_variance_from_state(rho, 0.3), field_variance_from_state(pure, 0.3)) < 1e-10);
    const DensityOperator red = rho.reduced_field();
    CHECK((red.matrix() - pure.reduced_field().matrix()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("master equation without dissipators follows the closed evolution") {
    const PhysicalParams p = small();
    const Truncation tr = default_truncation(p);
    const auto rho0 = initial_block_density(p, tr, 2);
    const double dt = default_lindblad_dt(p, tr);
    const std::vector<double> times{0.25 * p.period(), 0.5 * p.period()};
    const auto trace = evolve_lindblad_trace(rho0, p, {}, times, dt);
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(rel(trace.moments[i].variance(0.0), analytic::quantum_variance(0.0, times[i], p)) < 1e-6);
    }
    CHECK(trace.max_trace_drift < 1e-9);
    CHECK(trace.truncation_ok);
}

TEST_CASE("mechanical damping: energy of a coherent oscillator decays as exp(-gamma t)") {
    PhysicalParams p;
    p.alpha = 0.0;
    p.k = 0.0;
    p.gamma_m = 0.05;
    Truncation tr = Truncation::uniform(2, 40);
    MechanicalInit mech;
    mech.kind = MechanicalInit::Kind::Coherent;
    mech.beta = {2.0, 0.0};
    const auto rho0 = initial_block_density(p, tr, 2, mech);
    const double E0 = rho0.mechanical_energy();
    CHECK(E0 == doctest::Approx(4.0).epsilon(1e-9));
    const std::vector<double> times{5.0, 10.0, 20.0};
    const auto trace = evolve_lindblad_trace(rho0, p, {true, false}, times, default_lindblad_dt(p, tr));
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(trace.mechanical_energy[i] == doctest::Approx(E0 * std::exp(-p.gamma_m * times[i])).epsilon(0.01));
    }

    // A warm bath relaxes towards its occupation.
    p.nbar_bath = 0.5;
    const auto warm = evolve_lindblad_mech(rho0, 200.0, p, default_lindblad_dt(p, tr));
    CHECK(warm.mechanical_energy() == doctest::Approx(0.5 + 3.5 * std::exp(-p.gamma_m * 200.0)).epsilon(0.01));
}

TEST_CASE("photon loss: strong decay empties the cavity") {
    PhysicalParams p = small();
    p.kappa = 5.0;
    const Truncation tr = default_truncation(p);
    const auto rho = evolve_lindblad_cavity(initial_block_density(p, tr, 2), 4.0, p, default_lindblad_dt(p, tr));
    CHECK(std::abs(field_variance_from_state(rho, 0.0) - 1.0) < 1e-3);
    CHECK(rho.field_moments().n < 1e-6);
    CHECK(std::abs(rho.trace() - 1.0) < 1e-9);
}

TEST_CASE("master equation keeps the full reduced state physical and converges under step halving") {
    PhysicalParams p = small();
    p.kappa = 0.3;
    p.gamma_m = 0.05;
    p.nbar_bath = 0.5;
    const Truncation tr = default_truncation(p);
    auto rho = initial_block_density(p, tr, tr.np);
    const double dt = default_lindblad_dt(p, tr);
    for (int i = 0; i < 3; ++i) {
        rho = evolve_lindblad_cavity(rho, 0.1 * p.period(), p, dt);
        const DensityOperator red = rho.reduced_field();
        CHECK_NOTHROW(red.check_invariants(true));
        CHECK(rho.diagonal_hermiticity_error() < 1e-10);
    }
    const std::vector<double> times{0.2 * p.period()};
    const auto rho0 = initial_block_density(p, tr, 2);
    CHECK(lindblad_halving_change(rho0, p, {true, true}, times, dt) < 1e-6);
}
