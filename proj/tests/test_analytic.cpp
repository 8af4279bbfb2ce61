#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "optosqueeze/analytic.hpp"
#include "optosqueeze/random.hpp"
#include "oracles.hpp"

using namespace optosqueeze;
using namespace optosqueeze::analytic;

namespace {
constexpr double kPi = std::numbers::pi;

PhysicalParams fig1b() {
    PhysicalParams p;
    p.alpha = 20.0;
    p.k = 0.01;
    return p;
}

double min_var(ClosedForm f, double t, const PhysicalParams& p) {
    return minimize_over_theta([&](double th) { return closed_form_variance(f, th, t, p); }).var_min;
}
}  // namespace

TEST_CASE("theta minimizer: constant, cosine, errors") {
    auto c = minimize_over_theta([](double) { return 1.0; });
    CHECK(c.var_min == 1.0);
    CHECK(c.theta_star == 0.0);

    auto m = minimize_over_theta([](double th) { return 2.0 + std::cos(2.0 * th); });
    CHECK(m.var_min == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(m.theta_star - kPi / 2) < 1e-6);

    // A minimum sitting near the wrap-around point maps back into [0, pi).
    auto w = minimize_over_theta([](double th) { return 2.0 - std::cos(2.0 * th - 2.0 * (kPi - 1e-3)); });
    CHECK(w.theta_star >= 0.0);
    CHECK(w.theta_star < kPi);
    CHECK(std::abs(w.theta_star - (kPi - 1e-3)) < 1e-6);

    CHECK_THROWS_AS(minimize_over_theta([](double) { return 1.0; }, 8), DomainError);
    CHECK_THROWS_AS(minimize_over_theta([](double th) { return th > 1.0 ? std::nan("") : 1.0; }),
                    InvariantViolation);
}

TEST_CASE("theta minimizer matches an exhaustive 1e5-point grid") {
    const PhysicalParams p = fig1b();
    for (double tt : {0.5, 1.3, 2.7}) {
        const double t = tt * p.period();
        auto f = [&](double th) { return quantum_variance(th, t, p); };
        const auto m = minimize_over_theta(f);
        const auto [g_min, g_arg] = oracle::grid_minimum(f, 100000);
        CHECK(m.var_min <= g_min + 1e-12);
        CHECK(m.var_min == doctest::Approx(g_min).epsilon(1e-8));
        CHECK(std::abs(m.theta_star - g_arg) < 1e-4);
    }
}

TEST_CASE("quantum variance: trivial limits and stable value") {
    PhysicalParams p = fig1b();
    for (double th : {0.0, 0.3, 1.7, 3.0}) CHECK(quantum_variance(th, 0.0, p) == doctest::Approx(1.0).epsilon(1e-15));
    for (double th : {0.0, 0.9, 2.2}) CHECK(std::abs(quantum_variance(th, 1000.0 * p.period(), p) - 801.0) < 1e-6);

    // alpha = 50 stays finite (log-space exponents).
    p.alpha = 50.0;
    for (double tt : {0.37, 3.1, 777.7}) CHECK(std::isfinite(quantum_variance(0.2, tt * p.period(), p)));
    p.k = 0.0;
    CHECK(quantum_variance(0.4, 12.3, p) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(quantum_variance(0.0, -1.0, p), DomainError);
}

TEST_CASE("quantum variance at integer periods is independent of the oscillator temperature") {
    for (double alpha : {2.0, 20.0}) {
        PhysicalParams p;
        p.alpha = alpha;
        p.k = alpha == 2.0 ? 0.1 : 0.01;
        for (int m = 1; m <= 3; ++m) {
            p.nbar_q = 0.0;
            const double ref = quantum_variance(0.3, m * p.period(), p);
            for (double nbar : {1.0, 10.0, 100.0}) {
                p.nbar_q = nbar;
                CHECK(quantum_variance(0.3, m * p.period(), p) == doctest::Approx(ref).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("quantum min variance: early squeezing, first revival above 1, second revival squeezed") {
    const PhysicalParams p = fig1b();
    const double tau = p.period();
    double early = 1e9;
    for (int i = 1; i <= 100; ++i) early = std::min(early, min_var(ClosedForm::Quantum, 0.05 * i * tau, p));
    CHECK(early < 1.0);

    double first = 1e9, second = 1e9;
    for (int i = 0; i <= 400; ++i) {
        first = std::min(first, min_var(ClosedForm::Quantum, (2450.0 + 0.25 * i) * tau, p));
        second = std::min(second, min_var(ClosedForm::Quantum, (4950.0 + 0.25 * i) * tau, p));
    }
    CHECK(first >= 1.0 - 1e-9);
    CHECK(second < 1.0);
}

TEST_CASE("theta* trace near pi at first, then back through 0") {
    const PhysicalParams p = fig1b();
    const double tau = p.period();
    bool near_pi = false, through_zero = false;
    double theta_at_zero_crossing = -1.0;
    for (int i = 1; i <= 40; ++i) {
        const double tt = 0.05 * i;
        const auto m = minimize_over_theta([&](double th) { return quantum_variance(th, tt * tau, p); });
        if (tt <= 1.1 && m.theta_star > 0.75 * kPi) near_pi = true;
        if (near_pi && tt > 1.0 && m.theta_star < 0.1 && theta_at_zero_crossing < 0.0) {
            through_zero = true;
            theta_at_zero_crossing = tt;
        }
    }
    CHECK(near_pi);
    CHECK(through_zero);
    CHECK(theta_at_zero_crossing < 3.0);
}

TEST_CASE("classical closed form matches Gauss-Hermite quadrature over the initial ensemble") {
    PhysicalParams p = fig1b();
    for (double n : {0.7, 3.3, 100.0, 120.0, 150.0}) {
        for (double th : {0.0, 1.1}) {
            const double t = n * p.period();
            const double q = oracle::classical_quadrature_variance(p.alpha, p.k, p.sigma2_cl, t, th);
            CHECK(std::abs(classical_variance(th, t, p) - q) < 1e-7 * q);
        }
    }
}

TEST_CASE("classical closed form: initial value, saturation, no revivals") {
    PhysicalParams p = fig1b();
    for (double th : {0.0, 1.0, 2.0}) CHECK(classical_variance(th, 0.0, p) == doctest::Approx(1.0).epsilon(1e-14));
    double worst = 0.0;
    for (int i = 0; i <= 5900; ++i) {
        const double t = (100.0 + i) * p.period() + 0.37;
        worst = std::max(worst, std::abs(classical_variance(0.0, t, p) - 801.0));
        worst = std::max(worst, std::abs(classical_variance(1.1, t, p) - 801.0));
    }
    CHECK(worst < 1e-3);

    const ClassicalEnvelope e = classical_envelope(0.0);
    CHECK(e.d1 == 0.0);
    CHECK(e.d2 == 0.0);
    CHECK(e.d3 == 1.0);
    CHECK(e.c1 == 1.0);
    CHECK(e.c2 == 1.0);
    CHECK(e.s1 == 0.0);
    CHECK(e.s2 == 0.0);
    CHECK(e.phi1 == 0.0);
    CHECK(e.phi2 == 0.0);
    for (double A : {0.01, 0.3, 2.0, 40.0}) {
        const ClassicalEnvelope h = classical_envelope(A);
        CHECK(h.d1 >= 0.0);
        CHECK(h.d1 < 2.0);
        CHECK(h.d2 >= 0.0);
        CHECK(h.d2 < 2.0);
        CHECK(h.d3 > 0.0);
        CHECK(h.d3 <= 1.0);
        CHECK(h.d3 == doctest::Approx(16.0 / ((4.0 + A * A) * (4.0 + A * A))));
    }
}

TEST_CASE("quantum and classical agree early, better at smaller k and fixed alpha k") {
    auto worst = [](double alpha, double k) {
        PhysicalParams p;
        p.alpha = alpha;
        p.k = k;
        double w = 0.0;
        for (int i = 1; i <= 200; ++i) {
            const double t = 0.05 * i * p.period();
            const double q = min_var(ClosedForm::Quantum, t, p);
            const double c = min_var(ClosedForm::Classical, t, p);
            w = std::max(w, std::abs(c - q) / q);
        }
        return w;
    };
    const double w20 = worst(20.0, 0.01);
    const double w40 = worst(40.0, 0.005);
    CHECK(w20 < 0.05);
    CHECK(w40 < w20);
}

TEST_CASE("mean-field closed forms: trivial values") {
    PhysicalParams p = fig1b();
    p.sigma2_cl = 0.0;
    for (double tt : {0.3, 7.1, 2500.0}) {
        CHECK(meanfield_variance(0.4, tt * p.period(), p, MeanFieldMode::Constant) == doctest::Approx(1.0));
    }
    // A(t) = 2 pi.
    const double A_target = 2.0 * kPi;
    double lo = 0.0, hi = 1e6;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (envelope_functions(mid, p).A < A_target ? lo : hi) = mid;
    }
    for (double th : {0.0, 0.7, 2.0}) {
        CHECK(meanfield_variance(th, 0.5 * (lo + hi), p, MeanFieldMode::Poisson) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("mean-field descriptions never squeeze") {
    const PhysicalParams p = fig1b();
    double lowest = 1e9;
    for (auto mode : {MeanFieldMode::Constant, MeanFieldMode::Poisson, MeanFieldMode::Gaussian}) {
        for (int i = 0; i <= 800; ++i) {
            const double t = 0.025 * i * p.period();
            for (int j = 0; j < 64; ++j) lowest = std::min(lowest, meanfield_variance(kPi * j / 64, t, p, mode));
        }
    }
    CHECK(lowest >= 1.0 - 1e-9);
}

TEST_CASE("Poisson mean-field revivals sit where the quantum ones do") {
    const PhysicalParams p = fig1b();
    const double tau = p.period();
    const double stable = 801.0;
    for (double tt : {2500.0, 2499.0, 2497.5}) {
        CHECK(std::abs(min_var(ClosedForm::Quantum, tt * tau, p) - stable) > 0.1 * stable);
        CHECK(std::abs(min_var(ClosedForm::MeanFieldPoisson, tt * tau, p) - stable) > 0.1 * stable);
    }
    for (double tt : {1000.0, 1800.0, 3700.0}) {
        CHECK(std::abs(min_var(ClosedForm::MeanFieldPoisson, tt * tau, p) - stable) < 1e-3 * stable);
    }
}

TEST_CASE("Gaussian mean-field form matches a Monte Carlo over random intensity and oscillator") {
    PhysicalParams p = fig1b();
    const double t = 5.0 * p.period() + 0.4;  // off the period so C(t) > 0
    const double theta = 0.0;
    const Envelope env = envelope_functions(t, p);
    const double a2 = p.alpha * p.alpha;
    const double s = std::sin(p.omega * t), omc = 1.0 - std::cos(p.omega * t);

    RandomSource rng(2024, 0);
    const int N = 1000000;
    double s1 = 0, s2 = 0, s4 = 0;
    std::vector<double> xs(N);
    for (int i = 0; i < N; ++i) {
        const double I = rng.normal(a2, p.alpha);
        const double x0 = rng.normal(0.0, std::sqrt(p.sigma2_cl));
        const double p0 = rng.normal(0.0, std::sqrt(p.sigma2_cl));
        const double phi = env.A * I + std::sqrt(2.0) * p.k * (x0 * s + p0 * omc);
        xs[i] = 2.0 * p.alpha * std::cos(phi - theta);
        s1 += xs[i];
    }
    const double mean = s1 / N;
    for (double x : xs) {
        const double d = (x - mean) * (x - mean);
        s2 += d;
        s4 += d * d;
    }
    const double var = s2 / N;
    const double se = std::sqrt((s4 / N - var * var) / N);
    const double mc = 1.0 + var;  // coherent-state vacuum noise plus the classical spread
    CHECK(std::abs(mc - meanfield_variance(theta, t, p, MeanFieldMode::Gaussian)) < 3.0 * se);
}

TEST_CASE("revival approximations") {
    const PhysicalParams p = fig1b();
    const double c1 = revival_center(p, Revival::First, 1);
    CHECK(c1 / p.period() == doctest::Approx(2500.0).epsilon(1e-12));
    CHECK(revival_center(p, Revival::Second, 1) / p.period() == doctest::Approx(5000.0).epsilon(1e-12));

    for (double th : {0.0, 0.5, 1.5}) {
        CHECK(revival_approximation(th, c1, p, Revival::First) >= 1.0);
        CHECK(revival_approximation(th, c1, p, Revival::First) ==
              doctest::Approx(quantum_variance(th, c1, p)).epsilon(0.01));
    }
    const double c2 = revival_center(p, Revival::Second, 1);
    CHECK(revival_approximation(0.0, c2, p, Revival::Second) == doctest::Approx(quantum_variance(0.0, c2, p)).epsilon(0.01));
    CHECK(revival_approximation(0.0, c2, p, Revival::Second) == doctest::Approx(1.0).epsilon(1e-9));

    try {
        revival_approximation(0.0, 3000.0 * p.period(), p, Revival::First);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("nearest center") != std::string::npos);
    }
    CHECK_NOTHROW(revival_approximation(0.0, 2509.0 * p.period(), p, Revival::First));
    CHECK_THROWS_AS(revival_approximation(0.0, 2509.0 * p.period(), p, Revival::First, 5.0), DomainError);
}

TEST_CASE("sweep: k = 0 column, alpha k scaling, orientation") {
    const std::vector<double> alphas{10.0, 20.0, 40.0};
    const std::vector<double> ks{0.0, 0.005, 0.01, 0.02};
    const auto m = sweep_variance_at_tau(alphas, ks, 0.0);
    REQUIRE(m.size() == 12);
    for (std::size_t i = 0; i < alphas.size(); ++i) CHECK(m[i * ks.size()] == doctest::Approx(0.0).scale(1.0));
    const double v20 = std::pow(10.0, m[1 * 4 + 2]);
    const double v10 = std::pow(10.0, m[0 * 4 + 3]);
    const double v40 = std::pow(10.0, m[2 * 4 + 1]);
    CHECK(std::abs(v10 - v20) / v20 < 0.01);
    CHECK(std::abs(v40 - v20) / v20 < 0.01);

    PhysicalParams p;
    p.alpha = 10.0;
    p.k = 0.005;
    CHECK(m[0 * 4 + 1] == doctest::Approx(std::log10(quantum_variance(0.0, p.period(), p))).epsilon(1e-14));
}

TEST_CASE("blockade and cooperativity") {
    const auto one = blockade_check(std::sqrt(2.0), 1.0, 2.0, 0.1);
    CHECK(one.blockade_ratio == doctest::Approx(1.0));
    const auto b = blockade_check(std::sqrt(2.0) * 0.1, 1.0, 1.0, 0.01);
    CHECK(b.blockade_ratio == doctest::Approx(0.02));
    CHECK(b.cooperativity == doctest::Approx(4.0));
    CHECK_FALSE(b.blockade);
    CHECK(b.strong_cooperativity);
    const auto big = blockade_check(0.1, 1.0, 1e12, 0.01);
    CHECK(big.blockade_ratio < 1e-12);
    CHECK(big.cooperativity < 1e-9);
    CHECK_THROWS_AS(blockade_check(0.1, 1.0, 0.0, 0.01), DomainError);
}

TEST_CASE("closed-form series carries every column") {
    const PhysicalParams p = fig1b();
    const std::vector<double> times{0.0, 0.5, 1.0};
    const auto s = closed_form_series(ClosedForm::Quantum, p, times, 256, "Q");
    CHECK_NOTHROW(s.validate());
    CHECK(s.label == "Q");
    CHECK(s.var_min[0] == doctest::Approx(1.0));
    CHECK(s.var_fixed_theta[1] == doctest::Approx(quantum_variance(0.0, 0.5 * p.period(), p)));
    CHECK_FALSE(s.stderr_.has_value());
}
