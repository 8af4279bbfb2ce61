#include "optosqueeze/classical.hpp"

#include <cmath>
#include <numbers>

#include "optosqueeze/parallel.hpp"

namespace optosqueeze::classical {

ClassicalState sample_initial_conditions(const PhysicalParams& params, RandomSource& rng) {
    ClassicalState s;
    const double dx = rng.normal(0.0, std::sqrt(kVacuumMatchedVariance));
    const double dp = rng.normal(0.0, std::sqrt(kVacuumMatchedVariance));
    s.alpha_L = cplx(params.alpha, 0.0) + cplx(dx, dp) / std::numbers::sqrt2;
    const double sd = std::sqrt(params.sigma2_cl);
    s.x = rng.normal(0.0, sd);
    s.p = rng.normal(0.0, sd);
    return s;
}

ClassicalState evolve_classical(const ClassicalState& state0, double dt, const PhysicalParams& params) {
    if (!std::isfinite(dt) || dt < 0.0) throw DomainError("evolve_classical: dt must be finite and >= 0");
    const double wt = params.omega * dt;
    const double c = std::cos(wt);
    const double s = std::sin(wt);
    const double half = std::sin(0.5 * wt);
    const double omc = 2.0 * half * half;
    const double intensity = std::norm(state0.alpha_L);
    const double g_over_w = params.g0() / params.omega;
    const double A = envelope_functions(dt, params).A;

    ClassicalState out;
    out.t = state0.t + dt;
    out.x = state0.x * c + state0.p * s + g_over_w * intensity * omc;
    out.p = -state0.x * s + state0.p * c + g_over_w * intensity * s;
    const double phase = A * intensity + g_over_w * (state0.x * s + state0.p * omc);
    out.alpha_L = state0.alpha_L * std::polar(1.0, phase);
    return out;
}

double covariance_min_variance(const FieldMoments& m) {
    // Covariance of (Re alpha, Im alpha); X_theta = 2 Re(alpha e^{-i theta}).
    const double spread = m.n + 0.5 - std::norm(m.a);
    const cplx pseudo = m.a2 - m.a * m.a;
    const double var_re = 0.5 * (spread + pseudo.real());
    const double var_im = 0.5 * (spread - pseudo.real());
    const double cov = 0.5 * pseudo.imag();
    const double mean = 0.5 * (var_re + var_im);
    const double diff = 0.5 * (var_re - var_im);
    const double lambda_min = mean - std::sqrt(diff * diff + cov * cov);
    return 4.0 * lambda_min;
}

namespace {

struct MomentSums {
    CompensatedSum<cplx> a;
    CompensatedSum<cplx> a2;
    CompensatedSum<double> abs2;
    std::size_t count = 0;
};

struct RawSums {
    cplx a{};
    cplx a2{};
    double abs2 = 0.0;
    std::size_t count = 0;

    RawSums& operator+=(const RawSums& o) {
        a += o.a;
        a2 += o.a2;
        abs2 += o.abs2;
        count += o.count;
        return *this;
    }
    RawSums operator-(const RawSums& o) const {
        return {a - o.a, a2 - o.a2, abs2 - o.abs2, count - o.count};
    }
};

// Bias-corrected moments in the FieldMoments convention (n = E|alpha|^2 - 1/2).
FieldMoments moments_from(const RawSums& s) {
    const double N = static_cast<double>(s.count);
    const double c = N / (N - 1.0);
    const cplx m1 = s.a / N;
    const cplx m2 = s.a2 / N;
    const double m2abs = s.abs2 / N;
    FieldMoments fm;
    fm.a = m1;
    fm.a2 = m1 * m1 + c * (m2 - m1 * m1);
    fm.n = c * (m2abs - std::norm(m1)) + std::norm(m1) - 0.5;
    return fm;
}

}  // namespace

EnsembleResult ensemble_variance(const PhysicalParams& params, std::span<const double> times_over_tau,
                                 const EnsembleOptions& options) {
    params.validate();
    if (options.n_samples < 1000) {
        throw DomainError("ensemble_variance: n_samples must be >= 1000, got " + std::to_string(options.n_samples));
    }
    if (options.jackknife_blocks < 2 || options.jackknife_blocks > options.n_samples) {
        throw DomainError("ensemble_variance: jackknife_blocks out of range");
    }
    const std::size_t n_times = times_over_tau.size();
    const std::size_t n_blocks = options.jackknife_blocks;
    const double tau = params.period();

    // block_sums[b][j]: sums over the trajectories of block b at time j.
    std::vector<std::vector<RawSums>> block_sums(n_blocks, std::vector<RawSums>(n_times));
    parallel_for(n_blocks, options.workers, [&](std::size_t b) {
        const std::size_t begin = b * options.n_samples / n_blocks;
        const std::size_t end = (b + 1) * options.n_samples / n_blocks;
        std::vector<MomentSums> acc(n_times);
        for (std::size_t i = begin; i < end; ++i) {
            RandomSource rng(options.master_seed, i);
            const ClassicalState s0 = sample_initial_conditions(params, rng);
            for (std::size_t j = 0; j < n_times; ++j) {
                const cplx al = evolve_classical(s0, times_over_tau[j] * tau, params).alpha_L;
                acc[j].a.add(al);
                acc[j].a2.add(al * al);
                acc[j].abs2.add(std::norm(al));
            }
        }
        for (std::size_t j = 0; j < n_times; ++j) {
            block_sums[b][j] = {acc[j].a.value(), acc[j].a2.value(), acc[j].abs2.value(), end - begin};
        }
    });

    EnsembleResult result;
    result.series.label = "classical_mc";
    result.series.params = params;
    std::vector<double> stderr_col;
    for (std::size_t j = 0; j < n_times; ++j) {
        RawSums total;
        for (std::size_t b = 0; b < n_blocks; ++b) total += block_sums[b][j];
        const FieldMoments fm = moments_from(total);
        const auto best = analytic::minimize_over_theta([&](double th) { return fm.variance(th); },
                                                        options.theta_grid_n);

        // Leave-one-block-out jackknife of the minimized variance.
        std::vector<double> loo(n_blocks);
        double loo_mean = 0.0;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const FieldMoments fb = moments_from(total - block_sums[b][j]);
            loo[b] = analytic::minimize_over_theta([&](double th) { return fb.variance(th); }, options.theta_grid_n)
                         .var_min;
            loo_mean += loo[b];
        }
        loo_mean /= static_cast<double>(n_blocks);
        double ss = 0.0;
        for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
        const double se = std::sqrt(ss * static_cast<double>(n_blocks - 1) / static_cast<double>(n_blocks));

        result.series.times.push_back(times_over_tau[j]);
        result.series.var_min.push_back(best.var_min);
        result.series.theta_star.push_back(best.theta_star);
        result.series.var_fixed_theta.push_back(fm.variance(0.0));
        stderr_col.push_back(se);
        result.moments.push_back(fm);
        result.var_min_covariance.push_back(covariance_min_variance(fm));
        if (se > options.target_relative_stderr * best.var_min) result.precision_warning = true;
    }
    result.series.stderr_ = std::move(stderr_col);
    return result;
}

}  // namespace optosqueeze::classical
