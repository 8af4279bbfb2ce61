#include "optosqueeze/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace optosqueeze::analytic {

namespace {

constexpr double kPi = std::numbers::pi;

// Maps any angle onto [0, pi).
double canonical_theta(double theta) {
    double r = std::fmod(theta, kPi);
    if (r < 0.0) r += kPi;
    if (r >= kPi) r = 0.0;
    return r;
}

double checked(const std::function<double(double)>& f, double theta) {
    const double v = f(theta);
    if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "objective returned " << v << " at theta = " << theta;
        throw InvariantViolation("minimize_over_theta.finite", msg.str());
    }
    return v;
}

// 1 - cos x without cancellation for small x.
double one_minus_cos(double x) {
    const double s = std::sin(0.5 * x);
    return 2.0 * s * s;
}

void check_time(double t) {
    if (!std::isfinite(t) || t < 0.0) throw DomainError("variance: t must be finite and >= 0");
}

}  // namespace

ThetaMinimum minimize_over_theta(const std::function<double(double)>& f, int grid_n) {
    if (grid_n < 16) throw DomainError("minimize_over_theta: grid_n must be >= 16, got " + std::to_string(grid_n));

    const double h = kPi / grid_n;
    int best = 0;
    double best_val = checked(f, 0.0);
    for (int j = 1; j < grid_n; ++j) {
        const double v = checked(f, j * h);
        if (v < best_val) {
            best_val = v;
            best = j;
        }
    }

    // Golden-section search on the bracket spanning the neighbouring cells.
    constexpr double inv_phi = 0.6180339887498949;
    double lo = (best - 1) * h;
    double hi = (best + 1) * h;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = checked(f, x1);
    double f2 = checked(f, x2);
    while (hi - lo > 1e-7) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = checked(f, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = checked(f, x2);
        }
    }
    const double x_ref = 0.5 * (lo + hi);
    const double f_ref = checked(f, x_ref);

    ThetaMinimum out{best_val, best * h};
    if (f_ref < best_val) {
        out.var_min = f_ref;
        out.theta_star = canonical_theta(x_ref);
    }
    return out;
}

double quantum_variance(double theta, double t, const PhysicalParams& params) {
    check_time(t);
    const Envelope env = envelope_functions(t, params);
    const double a2 = params.alpha * params.alpha;
    const double A = env.A;
    // Exponents are combined before exponentiation so that large alpha^2
    // factors underflow cleanly to zero instead of producing 0 * inf.
    const double log_e1 = -a2 * one_minus_cos(2.0 * A) - 2.0 * env.B;
    const double log_e2 = -2.0 * a2 * one_minus_cos(A) - env.B;
    const double e1 = std::exp(log_e1);
    const double e2 = std::exp(log_e2);
    const double ph1 = 2.0 * A + a2 * std::sin(2.0 * A) - 2.0 * theta;
    const double ph2 = A + 2.0 * a2 * std::sin(A) - 2.0 * theta;
    return 2.0 * a2 * e1 * std::cos(ph1) - 2.0 * a2 * e2 * std::cos(ph2) + 2.0 * a2 * (1.0 - e2) + 1.0;
}

ClassicalEnvelope classical_envelope(double A) {
    const double A2 = A * A;
    const double p1 = 1.0 + A2;
    const double p4 = 4.0 + A2;
    const double p1_3 = p1 * p1 * p1;
    const double p4_2 = p4 * p4;
    const double p4_4 = p4_2 * p4_2;
    ClassicalEnvelope e{};
    e.d1 = 2.0 * A2 / p1;
    e.d2 = 2.0 * A2 / p4;
    e.d3 = 16.0 / p4_2;
    e.c1 = (1.0 - 3.0 * A2) / p1_3;
    e.c2 = (256.0 - 384.0 * A2 + 16.0 * A2 * A2) / p4_4;
    e.s1 = (3.0 * A - A2 * A) / p1_3;
    e.s2 = (512.0 * A - 128.0 * A2 * A) / p4_4;
    e.phi1 = 2.0 * A / p1;
    e.phi2 = 4.0 * A / p4;
    return e;
}

double classical_variance(double theta, double t, const PhysicalParams& params) {
    check_time(t);
    const Envelope env = envelope_functions(t, params);
    const ClassicalEnvelope h = classical_envelope(env.A);
    const double a2 = params.alpha * params.alpha;
    const double e1 = std::exp(-a2 * h.d1 - 2.0 * env.C);
    const double e2 = std::exp(-2.0 * a2 * h.d2 - env.C);
    const double ph1 = a2 * h.phi1 - 2.0 * theta;
    const double ph2 = 2.0 * a2 * h.phi2 - 2.0 * theta;
    return 2.0 * a2 * e1 * (h.c1 * std::cos(ph1) - h.s1 * std::sin(ph1)) -
           2.0 * a2 * e2 * (h.c2 * std::cos(ph2) - h.s2 * std::sin(ph2)) + 2.0 * a2 * (1.0 - h.d3 * e2) + 1.0;
}

double meanfield_variance(double theta, double t, const PhysicalParams& params, MeanFieldMode mode) {
    check_time(t);
    const Envelope env = envelope_functions(t, params);
    const double a2 = params.alpha * params.alpha;
    const double A = env.A;
    switch (mode) {
        case MeanFieldMode::Constant: {
            const double eC = std::exp(-env.C);
            return 1.0 + 2.0 * a2 * (-std::expm1(-env.C)) * (1.0 - std::cos(2.0 * a2 * A - 2.0 * theta) * eC);
        }
        case MeanFieldMode::Poisson: {
            const double e1 = std::exp(-a2 * one_minus_cos(2.0 * A) - 2.0 * env.C);
            const double e2 = std::exp(-2.0 * a2 * one_minus_cos(A) - env.C);
            return 2.0 * a2 * e1 * std::cos(a2 * std::sin(2.0 * A) - 2.0 * theta) -
                   2.0 * a2 * e2 * std::cos(2.0 * a2 * std::sin(A) - 2.0 * theta) + 2.0 * a2 * (1.0 - e2) + 1.0;
        }
        case MeanFieldMode::Gaussian: {
            const double log_e = -env.C - a2 * A * A;
            const double e = std::exp(log_e);
            return 1.0 + 2.0 * a2 * (-std::expm1(log_e)) * (1.0 - std::cos(2.0 * a2 * A - 2.0 * theta) * e);
        }
    }
    throw DomainError("meanfield_variance: unknown mode");
}

double revival_center(const PhysicalParams& params, Revival which, int N) {
    if (params.k <= 0.0) throw DomainError("revival_center: k must be > 0");
    const double k2 = params.k * params.k;
    const double phase = which == Revival::First ? N * kPi / (2.0 * k2) : N * kPi / k2;
    return phase / params.omega;
}

double revival_approximation(double theta, double t, const PhysicalParams& params, Revival which,
                             double window_periods) {
    check_time(t);
    if (params.k <= 0.0) throw DomainError("revival_approximation: no revivals for k = 0");
    const double k2 = params.k * params.k;
    const double phase = params.omega * t;
    int N = 0;
    double center_phase = 0.0;
    if (which == Revival::First) {
        const double unit = kPi / (2.0 * k2);
        // Nearest odd multiple.
        N = 2 * static_cast<int>(std::floor(phase / unit / 2.0)) + 1;
        const int alt = N - 2;
        if (alt >= 1 && std::abs(phase - alt * unit) < std::abs(phase - N * unit)) N = alt;
        if (N < 1) N = 1;
        center_phase = N * unit;
    } else {
        const double unit = kPi / k2;
        N = std::max(1, static_cast<int>(std::lround(phase / unit)));
        center_phase = N * unit;
    }
    if (std::abs(phase - center_phase) > 2.0 * kPi * window_periods) {
        std::ostringstream msg;
        msg << "revival_approximation: t = " << t << " is outside the "
            << (which == Revival::First ? "first" : "second") << "-kind windows of half-width " << window_periods
            << " periods; nearest center is t = " << center_phase / params.omega << " (N = " << N << ")";
        throw DomainError(msg.str());
    }

    const double a2 = params.alpha * params.alpha;
    const double A = envelope_functions(t, params).A;
    const double term1 = std::cos(2.0 * A + a2 * std::sin(2.0 * A) - 2.0 * theta);
    if (which == Revival::First) return 2.0 * a2 * term1 + 2.0 * a2 + 1.0;
    const double term2 = std::cos(A + 2.0 * a2 * std::sin(A) - 2.0 * theta);
    return 2.0 * a2 * (term1 - term2) + 1.0;
}

std::vector<double> sweep_variance_at_tau(std::span<const double> alpha_grid, std::span<const double> k_grid,
                                          double theta, const PhysicalParams& base) {
    std::vector<double> out;
    out.reserve(alpha_grid.size() * k_grid.size());
    for (double alpha : alpha_grid) {
        for (double k : k_grid) {
            PhysicalParams p = base;
            p.alpha = alpha;
            p.k = k;
            p.validate();
            out.push_back(std::log10(quantum_variance(theta, p.period(), p)));
        }
    }
    return out;
}

BlockadeCheck blockade_check(double g0, double omega, double kappa, double gamma_m) {
    if (!(omega > 0.0) || !(kappa > 0.0) || !(gamma_m > 0.0) || !std::isfinite(g0)) {
        throw DomainError("blockade_check: omega, kappa, gamma_m must be > 0 and g0 finite");
    }
    BlockadeCheck c;
    c.blockade_ratio = g0 * g0 / (omega * kappa);
    c.cooperativity = 2.0 * g0 * g0 / (kappa * gamma_m);
    c.blockade = c.blockade_ratio > 1.0;
    c.strong_cooperativity = c.cooperativity > 1.0;
    return c;
}

double closed_form_variance(ClosedForm which, double theta, double t, const PhysicalParams& params) {
    switch (which) {
        case ClosedForm::Quantum: return quantum_variance(theta, t, params);
        case ClosedForm::Classical: return classical_variance(theta, t, params);
        case ClosedForm::MeanFieldConstant: return meanfield_variance(theta, t, params, MeanFieldMode::Constant);
        case ClosedForm::MeanFieldPoisson: return meanfield_variance(theta, t, params, MeanFieldMode::Poisson);
        case ClosedForm::MeanFieldGaussian: return meanfield_variance(theta, t, params, MeanFieldMode::Gaussian);
    }
    throw DomainError("closed_form_variance: unknown form");
}

QuadratureSeries closed_form_series(ClosedForm which, const PhysicalParams& params,
                                    std::span<const double> times_over_tau, int theta_grid_n, std::string label) {
    params.validate();
    QuadratureSeries s;
    s.label = std::move(label);
    s.params = params;
    const double tau = params.period();
    for (double tt : times_over_tau) {
        const double t = tt * tau;
        const auto m = minimize_over_theta([&](double th) { return closed_form_variance(which, th, t, params); },
                                           theta_grid_n);
        s.times.push_back(tt);
        s.var_min.push_back(m.var_min);
        s.theta_star.push_back(m.theta_star);
        s.var_fixed_theta.push_back(closed_form_variance(which, 0.0, t, params));
    }
    return s;
}

}  // namespace optosqueeze::analytic
