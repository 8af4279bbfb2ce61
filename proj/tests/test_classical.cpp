#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "optosqueeze/analytic.hpp"
#include "optosqueeze/classical.hpp"
#include "oracles.hpp"

using namespace optosqueeze;
using namespace optosqueeze::classical;

namespace {
constexpr double kPi = std::numbers::pi;

PhysicalParams small() {
    PhysicalParams p;
    p.alpha = 2.0;
    p.k = 0.1;
    p.sigma2_cl = 0.5;
    return p;
}

struct Moments {
    double mean = 0, var = 0, se_mean = 0, se_var = 0;
};

Moments sample_moments(const std::vector<double>& v) {
    const double N = static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += x;
    Moments m;
    m.mean = s / N;
    double s2 = 0, s4 = 0;
    for (double x : v) {
        const double d = (x - m.mean) * (x - m.mean);
        s2 += d;
        s4 += d * d;
    }
    m.var = s2 / (N - 1);
    m.se_mean = std::sqrt(m.var / N);
    m.se_var = std::sqrt((s4 / N - (s2 / N) * (s2 / N)) / N);
    return m;
}
}  // namespace

TEST_CASE("initial conditions: field noise has vacuum quadrature variance, oscillator sigma2") {
    const PhysicalParams p = small();
    RandomSource rng(11, 0);
    const int N = 1000000;
    std::vector<double> re(N), im(N), x(N);
    for (int i = 0; i < N; ++i) {
        const ClassicalState s = sample_initial_conditions(p, rng);
        re[i] = s.alpha_L.real();
        im[i] = s.alpha_L.imag();
        x[i] = s.x;
    }
    const auto mr = sample_moments(re), mi = sample_moments(im), mx = sample_moments(x);
    CHECK(std::abs(mr.mean - p.alpha) < 3 * mr.se_mean);
    CHECK(std::abs(mi.mean) < 3 * mi.se_mean);
    // sqrt(2) Re(delta) is the field x-quadrature, with the ground-state variance 1/2.
    CHECK(std::abs(2.0 * mr.var - 0.5) < 3 * 2.0 * mr.se_var);
    CHECK(std::abs(2.0 * mi.var - 0.5) < 3 * 2.0 * mi.se_var);
    CHECK(std::abs(mx.var - 0.5) < 3 * mx.se_var);
}

TEST_CASE("closed-form trajectory: free limit, conserved intensity") {
    PhysicalParams p = small();
    p.k = 0.0;
    ClassicalState s0;
    s0.alpha_L = {1.2, -0.4};
    s0.x = 0.3;
    s0.p = -0.2;
    const double t = 1.3;
    const ClassicalState s = evolve_classical(s0, t, p);
    CHECK(s.alpha_L == s0.alpha_L);
    CHECK(s.x == doctest::Approx(0.3 * std::cos(t) - 0.2 * std::sin(t)).epsilon(1e-14));
    CHECK(s.t == doctest::Approx(t));

    p.k = 0.1;
    for (double tt : {0.1, 1.0, 17.5, 300.0}) {
        const ClassicalState u = evolve_classical(s0, tt * p.period(), p);
        CHECK(std::abs(u.alpha_L) == doctest::Approx(std::abs(s0.alpha_L)).epsilon(1e-12));
    }
}

TEST_CASE("ODE oracle: free rotation, conserved intensity, step convergence") {
    PhysicalParams p = small();
    ClassicalState s0;
    s0.alpha_L = {2.0, 0.1};
    s0.x = 0.3;
    s0.p = -0.2;

    PhysicalParams free = p;
    free.k = 0.0;
    const auto f = oracle::hamilton_ode(s0, 2.0, free, 1e-3);
    CHECK(std::abs(f.x - (0.3 * std::cos(2.0) - 0.2 * std::sin(2.0))) < 1e-10);

    const double t10 = 10.0 * p.period();
    const auto r = oracle::hamilton_ode(s0, t10, p, 1e-3);
    CHECK(std::abs(std::norm(r.alpha_L) - std::norm(s0.alpha_L)) < 1e-8);

    const double t = 0.7 * p.period();
    const auto h1 = oracle::hamilton_ode(s0, t, p, 2e-3);
    const auto h2 = oracle::hamilton_ode(s0, t, p, 1e-3);
    CHECK(std::abs(h1.alpha_L - h2.alpha_L) < 1e-8);
    CHECK(std::abs(h1.x - h2.x) < 1e-8);
}

TEST_CASE("closed-form trajectory agrees with the ODE oracle") {
    const PhysicalParams p = small();
    ClassicalState s0;
    s0.alpha_L = {p.alpha, 0.0};
    s0.x = 0.3;
    s0.p = -0.2;
    const double t = 0.7 * p.period();
    const auto exact = evolve_classical(s0, t, p);
    const auto ode = oracle::hamilton_ode(s0, t, p, 1e-3);
    CHECK(std::abs(exact.alpha_L - ode.alpha_L) < 1e-8);
    CHECK(std::abs(exact.x - ode.x) < 1e-8);
    CHECK(std::abs(exact.p - ode.p) < 1e-8);

    RandomSource rng(3, 0);
    for (int i = 0; i < 20; ++i) {
        const ClassicalState r0 = sample_initial_conditions(p, rng);
        const double tt = 5.0 * rng.uniform() * p.period();
        const auto a = evolve_classical(r0, tt, p);
        const auto b = oracle::hamilton_ode(r0, tt, p, 1e-3);
        CHECK(std::abs(a.alpha_L - b.alpha_L) < 1e-8);
        CHECK(std::abs(a.x - b.x) < 1e-8);
        CHECK(std::abs(a.p - b.p) < 1e-8);
    }
}

TEST_CASE("direct ensemble at a fixed angle matches the classical closed form") {
    const PhysicalParams p = small();
    const double theta = kPi / 4;
    const double t = 2.0 * p.period() + 0.3;
    RandomSource rng(77, 0);
    const int N = 1000000;
    std::vector<double> X(N);
    for (int i = 0; i < N; ++i) {
        const auto s = evolve_classical(sample_initial_conditions(p, rng), t, p);
        X[i] = 2.0 * (s.alpha_L * std::polar(1.0, -theta)).real();
    }
    const auto m = sample_moments(X);
    CHECK(std::abs(m.var - analytic::classical_variance(theta, t, p)) < 3.0 * m.se_var);
}

TEST_CASE("ensemble estimator: t = 0 is isotropic, agreement with the closed form, jackknife scaling") {
    const PhysicalParams p = small();
    EnsembleOptions o;
    o.n_samples = 100000;
    o.master_seed = 5;
    o.workers = 1;
    const std::vector<double> times{0.0, 0.5, 1.0, 2.0};
    const auto r = ensemble_variance(p, times, o);
    CHECK_NOTHROW(r.series.validate());
    REQUIRE(r.series.stderr_.has_value());
    int inside = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double t = times[j] * p.period();
        const double cf = analytic::minimize_over_theta([&](double th) { return analytic::classical_variance(th, t, p); })
                              .var_min;
        if (std::abs(r.series.var_min[j] - cf) < 3.0 * (*r.series.stderr_)[j]) ++inside;
        CHECK(r.var_min_covariance[j] == doctest::Approx(r.series.var_min[j]).epsilon(1e-6));
    }
    CHECK(inside >= 3);
    CHECK(std::abs(r.series.var_min[0] - 1.0) < 3.0 * (*r.series.stderr_)[0]);

    EnsembleOptions q = o;
    q.n_samples = 4 * o.n_samples;
    const auto r4 = ensemble_variance(p, std::vector<double>{1.0}, q);
    const double ratio = (*r4.series.stderr_)[0] / (*r.series.stderr_)[2];
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("ensemble estimator: no revival, stable value") {
    PhysicalParams p;
    p.alpha = 20.0;
    p.k = 0.01;
    EnsembleOptions o;
    o.n_samples = 20000;
    o.master_seed = 8;
    o.workers = 1;
    const std::vector<double> times{2000.0, 2500.0, 5000.0};
    const auto r = ensemble_variance(p, times, o);
    for (std::size_t j = 0; j < times.size(); ++j) {
        CHECK(std::abs(r.series.var_min[j] - 801.0) < 3.0 * (*r.series.stderr_)[j] + 1e-3 * 801.0);
    }
}

TEST_CASE("ensemble estimator: deterministic across worker counts, rejects tiny ensembles") {
    const PhysicalParams p = small();
    EnsembleOptions o;
    o.n_samples = 5000;
    o.master_seed = 99;
    o.workers = 1;
    const std::vector<double> times{0.3, 1.7};
    const auto a = ensemble_variance(p, times, o);
    o.workers = 3;
    const auto b = ensemble_variance(p, times, o);
    for (std::size_t j = 0; j < times.size(); ++j) {
        CHECK(a.series.var_min[j] == b.series.var_min[j]);
        CHECK((*a.series.stderr_)[j] == (*b.series.stderr_)[j]);
    }
    o.n_samples = 999;
    CHECK_THROWS_AS(ensemble_variance(p, times, o), DomainError);
}
