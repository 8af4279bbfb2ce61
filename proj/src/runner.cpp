#include "optosqueeze/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "optosqueeze/analytic.hpp"
#include "optosqueeze/classical.hpp"
#include "optosqueeze/hilbert.hpp"
#include "optosqueeze/hybrid.hpp"
#include "optosqueeze/output.hpp"
#include "optosqueeze/random.hpp"
#include "optosqueeze/version.hpp"

namespace optosqueeze::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

QuadratureSeries series_from_moments(const std::string& label, const PhysicalParams& params,
                                     const std::vector<double>& times, const std::vector<FieldMoments>& moments,
                                     int theta_grid_n) {
    QuadratureSeries s;
    s.label = label;
    s.params = params;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const FieldMoments& fm = moments[i];
        const auto best = analytic::minimize_over_theta([&](double th) { return fm.variance(th); }, theta_grid_n);
        s.times.push_back(times[i]);
        s.var_min.push_back(best.var_min);
        s.theta_star.push_back(best.theta_star);
        s.var_fixed_theta.push_back(fm.variance(0.0));
    }
    return s;
}

analytic::ClosedForm closed_form_of(Description d) {
    switch (d) {
        case Description::Quantum: return analytic::ClosedForm::Quantum;
        case Description::Classical: return analytic::ClosedForm::Classical;
        case Description::SC1: return analytic::ClosedForm::MeanFieldConstant;
        case Description::SC2: return analytic::ClosedForm::MeanFieldPoisson;
        default: return analytic::ClosedForm::MeanFieldGaussian;
    }
}

double uniform_stride(const std::vector<double>& times) {
    if (times.front() != 0.0) throw ConfigError("hybrid curves need a time grid starting at 0");
    if (times.size() < 2) throw ConfigError("hybrid curves need at least two time points");
    const double stride = times[1] - times[0];
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (std::abs(times[i] - stride * static_cast<double>(i)) > 1e-9 * std::max(1.0, times[i])) {
            throw ConfigError("hybrid curves need a uniform time grid");
        }
    }
    return stride;
}

void run_hybrid(const CurveSpec& spec, int theta_grid_n, std::uint64_t seed, unsigned workers, CurveResult& out) {
    (void)theta_grid_n;
    hybrid::HybridOptions opt;
    opt.dt_over_tau = spec.dt_over_tau;
    opt.sample_stride_over_tau = uniform_stride(spec.times);
    const double ratio = opt.sample_stride_over_tau / opt.dt_over_tau;
    if (std::abs(ratio - std::round(ratio)) > 1e-6) throw ConfigError("hybrid sample stride must be a multiple of dt");
    opt.cavity_decay = spec.params.kappa > 0.0;
    opt.master_seed = seed;
    opt.workers = workers;
    const auto mode = spec.init_mode == "thermal" ? hybrid::InitMode::ThermalMatched : hybrid::InitMode::Zero;
    hybrid::HybridEnsembleResult r;
    try {
        r = hybrid::ensemble_average(spec.params, spec.n_traj, spec.times.back(), mode, opt);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("curve '") + spec.label + "': " + e.what());
    }
    out.series = r.conditional;
    out.series.label = spec.label;
    r.mixture.label = spec.label + "_mixture";
    out.companions.emplace_back("_mixture", series_to_csv(r.mixture));

    std::string stats = "t_over_tau,n_mean,n_stderr,var_min_spread\n";
    for (std::size_t i = 0; i < r.n_mean.size(); ++i) {
        stats += format_double(r.conditional.times[i]) + ',' + format_double(r.n_mean[i]) + ',' +
                 format_double(r.n_stderr[i]) + ',' + format_double(r.var_min_spread[i]) + '\n';
    }
    out.companions.emplace_back("_stats", stats);

    std::size_t flagged = 0;
    for (auto f : r.squeeze_flags) flagged += f;
    out.summary["n_completed"] = r.n_completed;
    out.summary["n_aborted"] = r.n_aborted;
    out.summary["squeeze_flag_fraction"] = static_cast<double>(flagged) / static_cast<double>(r.n_completed);
    out.summary["variance_columns"] =
        "main file: minimum over theta of the trajectory-averaged conditional variance; _mixture: variance of the "
        "trajectory-averaged state";
    out.invariants.push_back({"hybrid.aborted_fraction", true, true,
                              std::to_string(r.n_aborted) + " of " + std::to_string(spec.n_traj) + " aborted"});
}

void run_lindblad(const CurveSpec& spec, int theta_grid_n, CurveResult& out) {
    const PhysicalParams& p = spec.params;
    const hilbert::Truncation trunc = hilbert::default_truncation(p);
    hilbert::MechanicalInit mech;
    if (p.nbar_q > 0.0) {
        mech.kind = hilbert::MechanicalInit::Kind::Thermal;
        mech.nbar = p.nbar_q;
    }
    const auto rho0 = hilbert::initial_block_density(p, trunc, 2, mech);
    const double tau = p.period();
    const double dt = spec.lindblad_dt_over_tau > 0.0 ? spec.lindblad_dt_over_tau * tau : hilbert::default_lindblad_dt(p, trunc);
    std::vector<double> sample_times;
    for (double t : spec.times) sample_times.push_back(t * tau);
    const hilbert::Dissipators which{p.gamma_m > 0.0, p.kappa > 0.0};
    const auto trace = hilbert::evolve_lindblad_trace(rho0, p, which, sample_times, dt);
    out.series = series_from_moments(spec.label, p, spec.times, trace.moments, theta_grid_n);
    out.summary["np"] = trunc.np;
    out.summary["nm_max"] = trunc.nm;
    out.summary["dt_over_tau"] = dt / tau;
    out.invariants.push_back({"lindblad.trace", true, true, "max drift " + format_double(trace.max_trace_drift)});
    out.invariants.push_back({"lindblad.tail_mass", trace.truncation_ok, true,
                              "max tail mass " + format_double(trace.max_tail_mass)});
}

void run_hilbert_closed(const CurveSpec& spec, int theta_grid_n, CurveResult& out) {
    const PhysicalParams& p = spec.params;
    const hilbert::ClosedPropagator prop(p, hilbert::default_truncation(p));
    std::vector<FieldMoments> moments;
    double worst_tail = 0.0;
    for (double t : spec.times) {
        if (p.nbar_q > 0.0) {
            const auto rho = prop.evolve_thermal_field(t * p.period(), p.nbar_q);
            rho.check_invariants(false);
            moments.push_back(rho.field_moments());
        } else {
            const auto state = prop.evolve_pure(t * p.period());
            state.check_invariants();
            worst_tail = std::max(worst_tail, state.tail_mass());
            moments.push_back(state.field_moments());
        }
    }
    out.series = series_from_moments(spec.label, p, spec.times, moments, theta_grid_n);
    out.invariants.push_back({"hilbert.norm_and_tail", true, true, "max tail mass " + format_double(worst_tail)});
}

}  // namespace

CurveResult run_curve(const CurveSpec& spec, int theta_grid_n, std::uint64_t master_seed, unsigned workers) {
    const auto t0 = Clock::now();
    CurveResult out;
    out.spec = spec;
    const PhysicalParams& p = spec.params;
    switch (spec.description) {
        case Description::Quantum:
        case Description::Classical:
        case Description::SC1:
        case Description::SC2:
        case Description::SC3:
            out.series = analytic::closed_form_series(closed_form_of(spec.description), p, spec.times, theta_grid_n,
                                                      spec.label);
            if (spec.times.front() == 0.0) {
                const double v0 = out.series.var_min.front();
                out.invariants.push_back({"closed_form.initial_coherent", std::abs(v0 - 1.0) < 1e-12, true,
                                          "Var(0) = " + format_double(v0)});
            }
            break;
        case Description::KerrReference:
            out.series = analytic::closed_form_series(analytic::ClosedForm::Quantum, p, spec.times, theta_grid_n,
                                                      spec.label);
            break;
        case Description::RevivalFirst:
        case Description::RevivalSecond: {
            const auto which = spec.description == Description::RevivalFirst ? analytic::Revival::First
                                                                             : analytic::Revival::Second;
            QuadratureSeries s;
            s.label = spec.label;
            s.params = p;
            try {
                for (double tt : spec.times) {
                    const double t = tt * p.period();
                    const auto best = analytic::minimize_over_theta(
                        [&](double th) { return analytic::revival_approximation(th, t, p, which); }, theta_grid_n);
                    s.times.push_back(tt);
                    s.var_min.push_back(best.var_min);
                    s.theta_star.push_back(best.theta_star);
                    s.var_fixed_theta.push_back(analytic::revival_approximation(0.0, t, p, which));
                }
            } catch (const DomainError& e) {
                throw ConfigError(std::string("curve '") + spec.label + "': " + e.what());
            }
            out.series = std::move(s);
            break;
        }
        case Description::ClassicalMC: {
            classical::EnsembleOptions opt;
            opt.n_samples = spec.n_samples;
            opt.theta_grid_n = theta_grid_n;
            opt.master_seed = master_seed;
            opt.workers = workers;
            auto r = classical::ensemble_variance(p, spec.times, opt);
            out.series = std::move(r.series);
            out.series.label = spec.label;
            double worst = 0.0;
            for (std::size_t i = 0; i < r.var_min_covariance.size(); ++i) {
                worst = std::max(worst, std::abs(r.var_min_covariance[i] - out.series.var_min[i]) / out.series.var_min[i]);
            }
            out.invariants.push_back({"classical_mc.covariance_consistency", worst < 1e-6, true,
                                      "max relative difference " + format_double(worst)});
            out.invariants.push_back({"classical_mc.precision", !r.precision_warning, false,
                                      r.precision_warning ? "stderr above 1% of var_min somewhere" : "ok"});
            break;
        }
        case Description::HilbertClosed: run_hilbert_closed(spec, theta_grid_n, out); break;
        case Description::Lindblad: run_lindblad(spec, theta_grid_n, out); break;
        case Description::Hybrid: run_hybrid(spec, theta_grid_n, master_seed, workers, out); break;
    }
    out.series.validate();
    out.invariants.push_back({"series.well_formed", true, true, std::to_string(out.series.size()) + " points"});
    out.runtime_s = seconds_since(t0);
    return out;
}

namespace {

json base_manifest(const ExperimentConfig& config) {
    return json{{"tool", "optosqueeze"},
                {"version", kVersion},
                {"rng_algorithm", "xoshiro256** seeded by splitmix64(master_seed, stream_index)"},
                {"rng_algorithm_version", RandomSource::kAlgorithmVersion},
                {"preset", config.preset},
                {"master_seed", config.master_seed},
                {"theta_grid_n", config.theta_grid_n},
                {"csv_columns", kSeriesHeader}};
}

}  // namespace

RunReport run(const ExperimentConfig& config) {
    if (config.preset == "sweep") return run_sweep(config);
    const auto t0 = Clock::now();
    RunReport report;
    report.output_dir = resolve_output_dir(config);
    const std::filesystem::path dir(report.output_dir);
    std::filesystem::create_directories(dir);

    ExperimentConfig echoed = config;
    echoed.output_dir = report.output_dir;
    write_text_atomic(dir / "config.expanded.json", to_json(echoed).dump(2) + "\n");
    report.files.push_back("config.expanded.json");

    json manifest = base_manifest(config);
    json curves = json::array();
    for (const auto& spec : config.curves) {
        json entry{{"label", spec.label},
                   {"description", to_string(spec.description)},
                   {"params", to_json(spec.params)},
                   {"n_points", spec.times.size()}};
        if (!spec.note.empty()) entry["note"] = spec.note;
        if (spec.description == Description::ClassicalMC || spec.description == Description::Hybrid) {
            entry["stream_indices"] = "0.." + std::to_string((spec.description == Description::Hybrid ? spec.n_traj
                                                                                                      : spec.n_samples) -
                                                             1);
        }
        try {
            CurveResult r = run_curve(spec, config.theta_grid_n, config.master_seed, config.workers);
            json inv = json::array();
            bool fatal_failure = false;
            for (const auto& o : r.invariants) {
                inv.push_back({{"name", o.name}, {"passed", o.passed}, {"fatal", o.fatal}, {"detail", o.detail}});
                if (!o.passed && o.fatal && !fatal_failure) {
                    fatal_failure = true;
                    if (report.ok) {
                        report.ok = false;
                        report.failed_invariant = o.name;
                        report.failure_detail = spec.label + ": " + o.detail;
                    }
                }
            }
            entry["invariants"] = inv;
            entry["summary"] = r.summary;
            entry["runtime_s"] = r.runtime_s;
            if (!fatal_failure) {
                const std::string file = spec.label + ".csv";
                write_text_atomic(dir / file, series_to_csv(r.series));
                report.files.push_back(file);
                json files = json::array({file});
                for (const auto& [suffix, text] : r.companions) {
                    const std::string extra = spec.label + suffix + ".csv";
                    write_text_atomic(dir / extra, text);
                    report.files.push_back(extra);
                    files.push_back(extra);
                }
                entry["files"] = files;
            }
        } catch (const InvariantViolation& e) {
            entry["invariants"] = json::array({{{"name", e.invariant()}, {"passed", false}, {"fatal", true}, {"detail", e.what()}}});
            if (report.ok) {
                report.ok = false;
                report.failed_invariant = e.invariant();
                report.failure_detail = spec.label + ": " + e.what();
            }
        }
        curves.push_back(entry);
    }
    manifest["curves"] = curves;
    manifest["invariants_ok"] = report.ok;
    manifest["total_runtime_s"] = seconds_since(t0);
    write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    report.files.push_back("manifest.json");
    report.manifest = std::move(manifest);
    return report;
}

RunReport run_sweep(const ExperimentConfig& config) {
    const auto t0 = Clock::now();
    RunReport report;
    report.output_dir = resolve_output_dir(config);
    const std::filesystem::path dir(report.output_dir);
    std::filesystem::create_directories(dir);

    ExperimentConfig echoed = config;
    echoed.output_dir = report.output_dir;
    write_text_atomic(dir / "config.expanded.json", to_json(echoed).dump(2) + "\n");
    report.files.push_back("config.expanded.json");

    const auto& s = config.sweep;
    const auto values = analytic::sweep_variance_at_tau(s.alpha_grid, s.k_grid, s.theta, config.params);
    write_text_atomic(dir / "sweep_matrix.csv", matrix_to_csv(s.alpha_grid, s.k_grid, values));
    report.files.push_back("sweep_matrix.csv");

    std::string refs = "alpha,k,alpha_k,log10_var_theta0,var_theta0\n";
    for (const auto& [a, k] : s.reference_points) {
        const double one_alpha[] = {a};
        const double one_k[] = {k};
        const double v = analytic::sweep_variance_at_tau(one_alpha, one_k, s.theta, config.params).front();
        refs += format_double(a) + ',' + format_double(k) + ',' + format_double(a * k) + ',' + format_double(v) + ',' +
                format_double(std::pow(10.0, v)) + '\n';
    }
    write_text_atomic(dir / "sweep_reference_points.csv", refs);
    report.files.push_back("sweep_reference_points.csv");

    bool finite = true;
    for (double v : values) finite = finite && std::isfinite(v);
    report.ok = finite;
    if (!finite) {
        report.failed_invariant = "sweep.finite";
        report.failure_detail = "non-finite log10 variance in the sweep matrix";
    }
    json manifest = base_manifest(config);
    manifest["sweep"] = {{"rows", "alpha_grid"},
                         {"columns", "k_grid"},
                         {"value", "log10 Var_theta(t = tau)"},
                         {"theta", s.theta},
                         {"n_alpha", s.alpha_grid.size()},
                         {"n_k", s.k_grid.size()},
                         {"files", {"sweep_matrix.csv", "sweep_reference_points.csv"}}};
    manifest["invariants"] = json::array({{{"name", "sweep.finite"}, {"passed", finite}, {"fatal", true}}});
    manifest["invariants_ok"] = report.ok;
    manifest["total_runtime_s"] = seconds_since(t0);
    write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    report.files.push_back("manifest.json");
    report.manifest = std::move(manifest);
    return report;
}

json validate_suite() {
    json checks = json::array();
    bool all = true;
    auto check = [&](const std::string& name, auto&& body) {
        bool passed = false;
        std::string detail;
        try {
            detail = body(passed);
        } catch (const std::exception& e) {
            passed = false;
            detail = e.what();
        }
        all = all && passed;
        checks.push_back({{"name", name}, {"passed", passed}, {"detail", detail}});
    };

    PhysicalParams big;  // alpha = 20, k = 0.01
    PhysicalParams small;
    small.alpha = 2.0;
    small.k = 0.1;

    check("quantum.initial_coherent", [&](bool& ok) {
        const double v = analytic::quantum_variance(0.7, 0.0, big);
        ok = std::abs(v - 1.0) < 1e-12;
        return "Var(0) = " + format_double(v);
    });
    check("quantum.thermal_recombination", [&](bool& ok) {
        double worst = 0.0;
        for (int m = 1; m <= 3; ++m) {
            PhysicalParams p = big;
            const double ref = analytic::quantum_variance(0.0, m * p.period(), p);
            for (double nbar : {1.0, 10.0, 100.0}) {
                p.nbar_q = nbar;
                worst = std::max(worst, std::abs(analytic::quantum_variance(0.0, m * p.period(), p) - ref) / ref);
            }
        }
        ok = worst < 1e-9;
        return "max relative spread " + format_double(worst);
    });
    check("meanfield.no_squeezing", [&](bool& ok) {
        double lowest = 1e300;
        for (auto mode : {analytic::MeanFieldMode::Constant, analytic::MeanFieldMode::Poisson,
                          analytic::MeanFieldMode::Gaussian}) {
            for (int i = 0; i <= 80; ++i) {
                const double t = 0.25 * i * big.period();
                for (int j = 0; j < 32; ++j) lowest = std::min(lowest, analytic::meanfield_variance(j * 0.09817477, t, big, mode));
            }
        }
        ok = lowest >= 1.0 - 1e-9;
        return "min Var " + format_double(lowest);
    });
    check("hilbert.oracle_agreement", [&](bool& ok) {
        const hilbert::ClosedPropagator prop(small, hilbert::default_truncation(small));
        double worst = 0.0;
        for (double tt : {0.3, 1.3, 2.6}) {
            const double t = tt * small.period();
            const auto state = prop.evolve_pure(t);
            state.check_invariants();
            const double q = analytic::quantum_variance(0.4, t, small);
            worst = std::max(worst, std::abs(state.field_moments().variance(0.4) - q) / q);
        }
        ok = worst < 1e-6;
        return "max relative error " + format_double(worst);
    });
    check("lindblad.trace", [&](bool& ok) {
        PhysicalParams p = small;
        p.gamma_m = 0.01;
        p.kappa = 0.3;
        const auto trunc = hilbert::default_truncation(p);
        const auto rho0 = hilbert::initial_block_density(p, trunc, 2);
        const std::vector<double> times = {0.5 * p.period()};
        const auto tr = hilbert::evolve_lindblad_trace(rho0, p, {true, true}, times, hilbert::default_lindblad_dt(p, trunc));
        ok = tr.max_trace_drift < 1e-6 && tr.truncation_ok;
        return "trace drift " + format_double(tr.max_trace_drift);
    });
    check("hybrid.step_invariants", [&](bool& ok) {
        PhysicalParams p = small;
        p.Gamma = 0.01;
        auto st = hybrid::initial_hybrid_state(p, hybrid::default_photon_cutoff(p), 0.0, 0.0, RandomSource(1, 0));
        for (int i = 0; i < 200; ++i) hybrid::sde_step(st, 1e-3 * p.period(), p, false);
        const auto& rho = st.rho_field;
        ok = std::abs(rho.trace().real() - 1.0) < 1e-8 && rho.hermiticity_error() < 1e-10;
        return "trace " + format_double(rho.trace().real());
    });
    check("random.reproducible", [&](bool& ok) {
        RandomSource a(42, 7);
        RandomSource b(42, 7);
        ok = true;
        for (int i = 0; i < 1000; ++i) ok = ok && a.normal() == b.normal();
        return std::string(ok ? "streams identical" : "streams differ");
    });
    return json{{"passed", all}, {"checks", checks}, {"version", kVersion}};
}

}  // namespace optosqueeze::cli
