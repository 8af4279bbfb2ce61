#pragma once

// Independent reference computations used only by the tests. None of them
// share code with the library paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "optosqueeze/classical.hpp"
#include "optosqueeze/params.hpp"

namespace oracle {

using optosqueeze::cplx;
using optosqueeze::PhysicalParams;
using optosqueeze::classical::ClassicalState;

/// Fixed-step RK4 on the averaged equations of motion
///   dx/dt = w p,  dp/dt = -w x + g0 |a|^2,  da/dt = i g0 x a.
inline ClassicalState hamilton_ode(const ClassicalState& s0, double t, const PhysicalParams& p, double dt) {
    struct Y {
        double x, p;
        cplx a;
    };
    const double w = p.omega;
    const double g0 = p.g0();
    auto f = [&](const Y& y) { return Y{w * y.p, -w * y.x + g0 * std::norm(y.a), cplx(0.0, g0 * y.x) * y.a}; };
    auto axpy = [](const Y& y, double h, const Y& k) { return Y{y.x + h * k.x, y.p + h * k.p, y.a + h * k.a}; };

    Y y{s0.x, s0.p, s0.alpha_L};
    const long steps = std::max(1L, std::lround(std::ceil(t / dt)));
    const double h = t / static_cast<double>(steps);
    for (long i = 0; i < steps; ++i) {
        const Y k1 = f(y);
        const Y k2 = f(axpy(y, 0.5 * h, k1));
        const Y k3 = f(axpy(y, 0.5 * h, k2));
        const Y k4 = f(axpy(y, h, k3));
        y.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
        y.p += h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
        y.a += h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
    }
    ClassicalState out;
    out.x = y.x;
    out.p = y.p;
    out.alpha_L = y.a;
    out.t = s0.t + t;
    return out;
}

/// Exhaustive grid minimum over [0, pi).
inline std::pair<double, double> grid_minimum(const std::function<double(double)>& f, int n) {
    double best = f(0.0), arg = 0.0;
    for (int j = 1; j < n; ++j) {
        const double th = std::numbers::pi * j / n;
        const double v = f(th);
        if (v < best) {
            best = v;
            arg = th;
        }
    }
    return {best, arg};
}

/// Quadrature variance of a density matrix from explicit ladder-operator matrices.
inline double fock_variance(const Eigen::MatrixXcd& rho, double theta) {
    const Eigen::Index d = rho.rows();
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    const Eigen::MatrixXcd X = a * std::polar(1.0, -theta) + a.adjoint() * std::polar(1.0, theta);
    const double m1 = (rho * X).trace().real();
    const double m2 = (rho * X * X).trace().real();
    return m2 - m1 * m1;
}

/// One Euler-Maruyama step of the field SME, written term by term:
/// drho = i g0 x dt [n, rho] - Gamma dt [n, [n, rho]] + sqrt(2 Gamma)({n, rho} - 2 <n> rho) dW.
inline Eigen::MatrixXcd sme_euler_step(const Eigen::MatrixXcd& rho, double g0, double x, double Gamma, double dt,
                                       double dW) {
    const Eigen::Index d = rho.rows();
    Eigen::MatrixXcd N = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index n = 0; n < d; ++n) N(n, n) = static_cast<double>(n);
    const cplx i(0.0, 1.0);
    const Eigen::MatrixXcd comm = N * rho - rho * N;
    const Eigen::MatrixXcd double_comm = N * comm - comm * N;
    const double nbar = (rho * N).trace().real();
    const Eigen::MatrixXcd anti = N * rho + rho * N;
    Eigen::MatrixXcd out = rho + i * g0 * x * dt * comm - Gamma * dt * double_comm +
                           std::sqrt(2.0 * Gamma) * (anti - 2.0 * nbar * rho) * dW;
    out = 0.5 * (out + out.adjoint()).eval();
    return out / out.trace().real();
}

/// Poisson(mu) probability mass at n.
inline double poisson_pmf(double mu, int n) { return std::exp(n * std::log(mu) - mu - std::lgamma(n + 1.0)); }


/// Probabilists' Gauss-Hermite rule (weight exp(-z^2/2)/sqrt(2 pi)) by Golub-Welsch.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    std::vector<double> z(n), w(n);
    for (int i = 0; i < n; ++i) {
        z[i] = es.eigenvalues()(i);
        w[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
    return {z, w};
}

/// Classical ensemble variance of 2 Re(alpha e^{-i theta}) by tensor Gauss-Hermite quadrature over
/// (Re delta, Im delta, x0, p0). The field starts at alpha + delta with Var(Re delta) = Var(Im delta) = 1/4,
/// the oscillator at (x0, p0) with variance sigma2 each. Only usable while the phase spread stays moderate.
inline double classical_quadrature_variance(double alpha, double k, double sigma2, double t, double theta,
                                            int n_re = 64, int n_im = 24, int n_osc = 16) {
    const auto [zr, wr] = gauss_hermite(n_re);
    const auto [zi, wi] = gauss_hermite(n_im);
    const auto [zo, wo] = gauss_hermite(n_osc);
    const double A = 2.0 * k * k * (t - std::sin(t));
    const double c = std::sqrt(2.0) * k;
    const double s = std::sin(t), omc = 1.0 - std::cos(t);
    double m1 = 0.0, m2 = 0.0;
    for (int a = 0; a < n_re; ++a) {
        for (int b = 0; b < n_im; ++b) {
            const std::complex<double> a0(alpha + 0.5 * zr[a], 0.5 * zi[b]);
            const double I = std::norm(a0);
            for (int u = 0; u < n_osc; ++u) {
                for (int v = 0; v < n_osc; ++v) {
                    const double phase = A * I + c * std::sqrt(sigma2) * (zo[u] * s + zo[v] * omc);
                    const double X = 2.0 * (a0 * std::polar(1.0, phase - theta)).real();
                    const double w = wr[a] * wi[b] * wo[u] * wo[v];
                    m1 += w * X;
                    m2 += w * X * X;
                }
            }
        }
    }
    return m2 - m1 * m1;
}

}  // namespace oracle
