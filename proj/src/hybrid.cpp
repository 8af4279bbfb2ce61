#include "optosqueeze/hybrid.hpp"

#include <cmath>

#include "optosqueeze/analytic.hpp"
#include "optosqueeze/parallel.hpp"

namespace optosqueeze::hybrid {

namespace {

double photon_mean(const Eigen::MatrixXcd& rho) {
    double s = 0.0;
    for (Eigen::Index n = 1; n < rho.rows(); ++n) s += static_cast<double>(n) * rho(n, n).real();
    return s;
}

// Coherences between well-separated photon numbers decay like exp(-Gamma (n - m)^2 t) and
// would otherwise sit in subnormal range, which is several times slower to multiply.
constexpr double kNegligible = 1e-200;

cplx flush_negligible(cplx v) {
    return std::abs(v.real()) + std::abs(v.imag()) < kNegligible ? cplx{0.0, 0.0} : v;
}

int nominal_photon_cutoff(const PhysicalParams& p) {
    return static_cast<int>(std::ceil(p.alpha * p.alpha + 8.0 * p.alpha + 10.0));
}

double field_tail_mass(const Eigen::MatrixXcd& rho, int nominal) {
    const int np = static_cast<int>(rho.rows()) - 1;
    const int start = static_cast<int>(std::ceil(0.9 * std::max(np, nominal)));
    double s = 0.0;
    for (int n = start; n <= np; ++n) s += rho(n, n).real();
    return s;
}

}  // namespace

int default_photon_cutoff(const PhysicalParams& params) { return hilbert::default_truncation(params).np; }

HybridTrajectoryState initial_hybrid_state(const PhysicalParams& params, int np, double x0, double p0,
                                           RandomSource rng) {
    params.validate();
    if (np < 2) throw DomainError("initial_hybrid_state: photon cutoff must be >= 2");
    const auto c = hilbert::coherent_amplitudes(params.alpha, np);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    v /= v.norm();
    Eigen::MatrixXcd rho = (v * v.transpose()).cast<cplx>();
    return HybridTrajectoryState{hilbert::DensityOperator(std::move(rho)), x0, p0, 0.0, rng};
}

void validate_step(const PhysicalParams& params, double dt) {
    params.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("hybrid: dt must be > 0");
    if (params.Gamma < 0.0) throw DomainError("hybrid: Gamma must be >= 0");
    if (params.Gamma == 0.0 && params.g0() != 0.0) {
        throw DomainError("hybrid: Gamma = 0 with nonzero coupling makes the oscillator noise amplitude g0/(2 sqrt(2 Gamma)) diverge");
    }
    if (params.Gamma * dt > 1e-2 || params.omega * dt > 1e-2) {
        throw DomainError("hybrid: dt too large (need Gamma dt <= 1e-2 and omega dt <= 1e-2)");
    }
}

void sde_step(HybridTrajectoryState& state, double dt, const PhysicalParams& params, bool include_cavity_decay,
              Scheme scheme) {
    const double dW = state.rng.normal(0.0, std::sqrt(dt));
    sde_step_with_increment(state, dt, params, include_cavity_decay, dW, scheme);
}

void sde_step_with_increment(HybridTrajectoryState& state, double dt, const PhysicalParams& params,
                             bool include_cavity_decay, double dW, Scheme scheme) {
    Eigen::MatrixXcd& rho = state.rho_field.matrix();
    const Eigen::Index dim = rho.rows();
    const double g0 = params.g0();
    const double gamma = params.Gamma;
    const double kappa = include_cavity_decay ? params.kappa : 0.0;
    const double nbar = photon_mean(rho);
    const double innovation = std::sqrt(2.0 * gamma) * dW;
    const double phase = g0 * state.x * dt;

    // Only the lower triangle is computed; the maps keep rho Hermitian.
    if (scheme == Scheme::Exponential) {
        Eigen::VectorXcd f(dim);
        for (Eigen::Index n = 0; n < dim; ++n) {
            const double u = static_cast<double>(n) - nbar;
            f(n) = std::polar(std::exp(innovation * u - 2.0 * gamma * dt * u * u), phase * static_cast<double>(n));
        }
        const Eigen::MatrixXcd before = kappa != 0.0 ? rho : Eigen::MatrixXcd();
        for (Eigen::Index m = 0; m < dim; ++m) {
            const cplx fm = std::conj(f(m));
            for (Eigen::Index n = m; n < dim; ++n) rho(n, m) = flush_negligible(rho(n, m) * (f(n) * fm));
        }
        if (kappa != 0.0) {
            for (Eigen::Index m = 0; m < dim; ++m) {
                for (Eigen::Index n = m; n < dim; ++n) {
                    cplx jump{0.0, 0.0};
                    if (n + 1 < dim) jump = std::sqrt((n + 1.0) * (m + 1.0)) * before(n + 1, m + 1);
                    rho(n, m) += kappa * dt * (jump - 0.5 * static_cast<double>(n + m) * before(n, m));
                }
            }
        }
    } else {
        // Ascending order leaves rho(n+1, m+1) unread until after (n, m) has used it.
        for (Eigen::Index m = 0; m < dim; ++m) {
            for (Eigen::Index n = m; n < dim; ++n) {
                const double diff = static_cast<double>(n - m);
                const double sum = static_cast<double>(n + m);
                const cplx r = rho(n, m);
                const double fr = 1.0 - gamma * dt * diff * diff + innovation * (sum - 2.0 * nbar);
                const double fi = phase * diff;
                cplx updated{r.real() * fr - r.imag() * fi, r.real() * fi + r.imag() * fr};
                if (kappa != 0.0) {
                    cplx jump{0.0, 0.0};
                    if (n + 1 < dim) jump = std::sqrt((n + 1.0) * (m + 1.0)) * rho(n + 1, m + 1);
                    updated += kappa * dt * (jump - 0.5 * sum * r);
                }
                rho(n, m) = flush_negligible(updated);
            }
        }
    }
    double tr = 0.0;
    for (Eigen::Index n = 0; n < dim; ++n) {
        rho(n, n).imag(0.0);
        tr += rho(n, n).real();
    }
    if (!std::isfinite(tr) || tr < 0.5) {
        throw TrajectoryAborted("hybrid.trace_collapse", "trace " + std::to_string(tr) + " before renormalization at t = " +
                                                             std::to_string(state.t + dt));
    }
    rho.triangularView<Eigen::StrictlyUpper>() = rho.adjoint();
    rho /= tr;

    // Kick with the intensity force and the back-action noise, then rotate exactly.
    const double noise = gamma > 0.0 ? g0 / (2.0 * std::sqrt(2.0 * gamma)) : 0.0;
    const double p_kicked = state.p + g0 * nbar * dt + noise * dW;
    const double c = std::cos(params.omega * dt);
    const double s = std::sin(params.omega * dt);
    const double x_new = state.x * c + p_kicked * s;
    const double p_new = -state.x * s + p_kicked * c;
    if (!std::isfinite(x_new) || !std::isfinite(p_new)) {
        throw TrajectoryAborted("hybrid.oscillator", "non-finite oscillator state at t = " + std::to_string(state.t + dt));
    }
    state.x = x_new;
    state.p = p_new;
    state.t += dt;
}

TrajectoryRecord run_trajectory(const PhysicalParams& params, double t_final_over_tau, const HybridOptions& options,
                                double x0, double p0, RandomSource rng) {
    const double tau = params.period();
    const double dt = options.dt_over_tau * tau;
    validate_step(params, dt);
    if (!(t_final_over_tau >= 0.0)) throw DomainError("run_trajectory: t_final must be >= 0");
    if (!(options.sample_stride_over_tau > 0.0)) throw DomainError("run_trajectory: sample stride must be > 0");

    const int np = options.np >= 0 ? options.np : default_photon_cutoff(params);
    // An explicit cutoff is checked against its own top decile.
    const int nominal = options.np >= 0 ? options.np : nominal_photon_cutoff(params);
    const long total = std::lround(t_final_over_tau / options.dt_over_tau);
    const long stride = std::max(1L, std::lround(options.sample_stride_over_tau / options.dt_over_tau));
    const int tail_every = std::max(1, options.tail_check_every);

    HybridTrajectoryState state = initial_hybrid_state(params, np, x0, p0, rng);
    TrajectoryRecord rec;
    const std::size_t n_samples = static_cast<std::size_t>(total / stride) + 1;
    rec.times.reserve(n_samples);
    rec.moments.reserve(n_samples);

    auto sample = [&](long step) {
        const hilbert::DensityOperator& rho = state.rho_field;
        const FieldMoments fm = rho.field_moments();
        double n2 = 0.0;
        const auto& m = rho.matrix();
        for (Eigen::Index n = 1; n < m.rows(); ++n) n2 += static_cast<double>(n * n) * m(n, n).real();
        rec.times.push_back(static_cast<double>(step) * options.dt_over_tau);
        rec.moments.push_back(fm);
        rec.var_min.push_back(fm.min_variance_closed_form());
        rec.n_mean.push_back(fm.n);
        rec.n_variance.push_back(n2 - fm.n * fm.n);
        rec.purity.push_back(rho.purity());
        rec.x.push_back(state.x);
        rec.p.push_back(state.p);
        if (options.keep_states) rec.states.push_back(m);
    };

    sample(0);
    try {
        for (long step = 1; step <= total; ++step) {
            sde_step(state, dt, params, options.cavity_decay, options.scheme);
            if (step % tail_every == 0) {
                const double tail = field_tail_mass(state.rho_field.matrix(), nominal);
                if (tail > options.tail_threshold) {
                    throw TrajectoryAborted("hybrid.tail_mass", "tail mass " + std::to_string(tail));
                }
            }
            if (step % stride == 0) sample(step);
        }
    } catch (const TrajectoryAborted& e) {
        rec.aborted = true;
        rec.abort_reason = e.what();
    }
    rec.final_populations = state.rho_field.matrix().diagonal().real();
    return rec;
}

CollapseSummary collapse_diagnostics(const TrajectoryRecord& record) {
    CollapseSummary out;
    if (record.final_populations.size() > 0) {
        Eigen::Index idx = 0;
        out.dominant_population = record.final_populations.maxCoeff(&idx);
        out.dominant_fock = static_cast<int>(idx);
    }
    for (std::size_t i = 0; i < record.times.size(); ++i) {
        if (!out.time_to_purity_90 && record.purity[i] >= 0.9) out.time_to_purity_90 = record.times[i];
        if (record.times[i] > 0.0 && record.var_min[i] < 1.0) {
            if (!out.squeeze_window) out.squeeze_window = std::pair{record.times[i], record.times[i]};
            out.squeeze_window->second = record.times[i];
        }
    }
    return out;
}

namespace {

double sample_sd(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    CompensatedSum<double> ss;
    for (double x : v) ss.add((x - mean) * (x - mean));
    return std::sqrt(ss.value() / static_cast<double>(v.size() - 1));
}

}  // namespace

HybridEnsembleResult ensemble_average(const PhysicalParams& params, std::size_t n_traj, double t_final_over_tau,
                                      InitMode init_mode, const HybridOptions& options) {
    validate_step(params, options.dt_over_tau * params.period());
    if (n_traj < 2) throw DomainError("ensemble_average: need at least 2 trajectories");

    std::vector<TrajectoryRecord> records(n_traj);
    parallel_for(n_traj, options.workers, [&](std::size_t i) {
        RandomSource rng(options.master_seed, i);
        double x0 = 0.0;
        double p0 = 0.0;
        if (init_mode == InitMode::ThermalMatched) {
            const double sd = std::sqrt(kVacuumMatchedVariance);
            x0 = rng.normal(0.0, sd);
            p0 = rng.normal(0.0, sd);
        }
        records[i] = run_trajectory(params, t_final_over_tau, options, x0, p0, rng);
    });

    HybridEnsembleResult out;
    std::vector<const TrajectoryRecord*> done;
    std::string first_reason;
    for (const auto& r : records) {
        if (r.aborted) {
            if (out.n_aborted++ == 0) first_reason = r.abort_reason;
        } else {
            done.push_back(&r);
        }
    }
    out.n_completed = done.size();
    if (static_cast<double>(out.n_aborted) > 0.01 * static_cast<double>(n_traj) || done.size() < 2) {
        throw InvariantViolation("hybrid.aborted_fraction", std::to_string(out.n_aborted) + " of " +
                                                                std::to_string(n_traj) + " trajectories aborted; first: " +
                                                                first_reason);
    }

    const double N = static_cast<double>(done.size());
    const std::size_t n_samples = done.front()->times.size();
    out.conditional.label = "hybrid_conditional";
    out.mixture.label = "hybrid_mixture";
    out.conditional.params = params;
    out.mixture.params = params;
    std::vector<double> cond_se;

    for (std::size_t j = 0; j < n_samples; ++j) {
        CompensatedSum<double> S, n_sum, vmin_sum;
        CompensatedSum<cplx> M, a_sum, a2_sum;
        std::vector<double> ns, vmins;
        ns.reserve(done.size());
        vmins.reserve(done.size());
        for (const TrajectoryRecord* r : done) {
            const FieldMoments& fm = r->moments[j];
            S.add(2.0 * fm.n + 1.0 - 2.0 * std::norm(fm.a));
            M.add(fm.a2 - fm.a * fm.a);
            a_sum.add(fm.a);
            a2_sum.add(fm.a2);
            n_sum.add(fm.n);
            vmin_sum.add(r->var_min[j]);
            ns.push_back(fm.n);
            vmins.push_back(r->var_min[j]);
        }
        const double s_bar = S.value() / N;
        const cplx m_bar = M.value() / N;
        auto cond = [&](double th) { return s_bar + 2.0 * (m_bar * std::polar(1.0, -2.0 * th)).real(); };
        const auto best = analytic::minimize_over_theta(cond);

        std::vector<double> at_star;
        at_star.reserve(done.size());
        for (const TrajectoryRecord* r : done) at_star.push_back(r->moments[j].variance(best.theta_star));
        const double at_star_mean = [&] {
            CompensatedSum<double> s;
            for (double v : at_star) s.add(v);
            return s.value() / N;
        }();

        const double t = done.front()->times[j];
        out.conditional.times.push_back(t);
        out.conditional.var_min.push_back(best.var_min);
        out.conditional.theta_star.push_back(best.theta_star);
        out.conditional.var_fixed_theta.push_back(cond(0.0));
        cond_se.push_back(sample_sd(at_star, at_star_mean) / std::sqrt(N));

        FieldMoments mix;
        mix.a = a_sum.value() / N;
        mix.a2 = a2_sum.value() / N;
        mix.n = n_sum.value() / N;
        const auto mbest = analytic::minimize_over_theta([&](double th) { return mix.variance(th); });
        out.mixture.times.push_back(t);
        out.mixture.var_min.push_back(mbest.var_min);
        out.mixture.theta_star.push_back(mbest.theta_star);
        out.mixture.var_fixed_theta.push_back(mix.variance(0.0));

        out.n_mean.push_back(mix.n);
        out.n_stderr.push_back(sample_sd(ns, mix.n) / std::sqrt(N));
        out.var_min_spread.push_back(sample_sd(vmins, vmin_sum.value() / N));

        if (options.keep_states) {
            Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(done.front()->states[j].rows(), done.front()->states[j].cols());
            for (const TrajectoryRecord* r : done) acc += r->states[j];
            out.mean_rho.push_back(acc / N);
        }
    }
    out.conditional.stderr_ = std::move(cond_se);

    const double horizon = options.squeeze_horizon_over_tau;
    for (const TrajectoryRecord* r : done) {
        bool squeezed = false;
        for (std::size_t j = 0; j < r->times.size(); ++j) {
            if (r->times[j] > 0.0 && r->times[j] <= horizon + 1e-12 && r->var_min[j] < 1.0) {
                squeezed = true;
                break;
            }
        }
        out.squeeze_flags.push_back(squeezed ? 1 : 0);
        out.collapse.push_back(collapse_diagnostics(*r));
    }
    return out;
}

}  // namespace optosqueeze::hybrid
