#include "optosqueeze/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace optosqueeze::cli {

using nlohmann::json;

namespace {

const std::vector<std::pair<Description, std::string>>& description_names() {
    static const std::vector<std::pair<Description, std::string>> names = {
        {Description::Quantum, "quantum"},
        {Description::Classical, "classical"},
        {Description::SC1, "sc1"},
        {Description::SC2, "sc2"},
        {Description::SC3, "sc3"},
        {Description::ClassicalMC, "classical_mc"},
        {Description::HilbertClosed, "hilbert_closed"},
        {Description::Lindblad, "lindblad"},
        {Description::Hybrid, "hybrid"},
        {Description::KerrReference, "kerr_reference"},
        {Description::RevivalFirst, "revival_first"},
        {Description::RevivalSecond, "revival_second"},
    };
    return names;
}

// Reference (alpha, k) points shared by the thermal preset and the sweep companion file.
const std::vector<std::pair<double, double>> kReferencePoints = {{20.0, 0.01}, {10.0, 0.02}, {40.0, 0.005}, {2.0, 0.1}};

std::string compact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

template <typename T>
T get_as(const json& j, const char* what) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("wrong type for '") + what + "'");
    }
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

PhysicalParams params_from_json(const json& j, PhysicalParams p) {
    check_keys(j, {"alpha", "k", "omega", "nbar_q", "sigma2_cl", "Gamma", "kappa", "gamma_m", "nbar_bath"}, "params");
    auto set = [&](const char* key, double& field) {
        if (j.contains(key)) field = get_as<double>(j.at(key), key);
    };
    set("alpha", p.alpha);
    set("k", p.k);
    set("omega", p.omega);
    set("nbar_q", p.nbar_q);
    set("sigma2_cl", p.sigma2_cl);
    set("Gamma", p.Gamma);
    set("kappa", p.kappa);
    set("gamma_m", p.gamma_m);
    set("nbar_bath", p.nbar_bath);
    return p;
}

TimeGrid time_from_json(const json& j) {
    check_keys(j, {"windows", "points"}, "time");
    TimeGrid g;
    if (j.contains("windows")) {
        for (const auto& w : j.at("windows")) {
            const auto v = get_as<std::vector<double>>(w, "time.windows");
            if (v.size() != 3) throw ConfigError("time window must be [start, stop, step]");
            g.windows.push_back({v[0], v[1], v[2]});
        }
    }
    if (j.contains("points")) g.points = get_as<std::vector<double>>(j.at("points"), "time.points");
    return g;
}

CurveSpec curve_from_json(const json& j, const PhysicalParams& base) {
    check_keys(j,
               {"label", "description", "params", "times", "n_samples", "n_traj", "init_mode", "dt_over_tau",
                "lindblad_dt_over_tau", "note"},
               "curve");
    CurveSpec c;
    if (!j.contains("label") || !j.contains("description") || !j.contains("times")) {
        throw ConfigError("curve needs 'label', 'description' and 'times'");
    }
    c.label = get_as<std::string>(j.at("label"), "label");
    c.description = description_from_string(get_as<std::string>(j.at("description"), "description"));
    c.params = j.contains("params") ? params_from_json(j.at("params"), base) : base;
    c.times = get_as<std::vector<double>>(j.at("times"), "times");
    if (j.contains("n_samples")) c.n_samples = get_as<std::size_t>(j.at("n_samples"), "n_samples");
    if (j.contains("n_traj")) c.n_traj = get_as<std::size_t>(j.at("n_traj"), "n_traj");
    if (j.contains("init_mode")) c.init_mode = get_as<std::string>(j.at("init_mode"), "init_mode");
    if (j.contains("dt_over_tau")) c.dt_over_tau = get_as<double>(j.at("dt_over_tau"), "dt_over_tau");
    if (j.contains("lindblad_dt_over_tau")) {
        c.lindblad_dt_over_tau = get_as<double>(j.at("lindblad_dt_over_tau"), "lindblad_dt_over_tau");
    }
    if (j.contains("note")) c.note = get_as<std::string>(j.at("note"), "note");
    return c;
}

std::vector<double> linspace_steps(double start, double step, int count) {
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = start + step * i;
    return v;
}

// --- preset curve generators --------------------------------------------------

CurveSpec make_curve(const ExperimentConfig& cfg, std::string label, Description d, const PhysicalParams& p,
                     std::vector<double> times, std::string note = {}) {
    CurveSpec c;
    c.label = std::move(label);
    c.description = d;
    c.params = p;
    c.times = std::move(times);
    c.n_samples = cfg.n_samples;
    c.n_traj = cfg.n_traj;
    c.init_mode = cfg.init_mode;
    c.dt_over_tau = cfg.dt_over_tau;
    c.lindblad_dt_over_tau = cfg.lindblad_dt_over_tau;
    c.note = std::move(note);
    return c;
}

std::vector<double> integer_times(const std::vector<double>& times) {
    std::vector<double> out;
    if (times.empty()) return out;
    for (double m = std::ceil(times.front()); m <= times.back() + 1e-12; m += 1.0) out.push_back(m);
    return out;
}

std::vector<CurveSpec> generate_curves(const ExperimentConfig& cfg) {
    std::vector<CurveSpec> curves;
    const std::string& p = cfg.preset;
    if (p == "sweep") return curves;
    const std::vector<double> times = cfg.time.expand();
    const PhysicalParams& base = cfg.params;

    if (p == "fig1b") {
        curves.push_back(make_curve(cfg, "Q", Description::Quantum, base, times, "quantum description"));
        curves.push_back(make_curve(cfg, "C", Description::Classical, base, times, "fully classical description"));
        curves.push_back(make_curve(cfg, "SC1", Description::SC1, base, times, "mean-field hybrid, constant I"));
        curves.push_back(make_curve(cfg, "SC2", Description::SC2, base, times, "mean-field hybrid, Poisson I"));
        curves.push_back(make_curve(cfg, "SC3", Description::SC3, base, times, "mean-field hybrid, Gaussian I"));
    } else if (p == "fig1c") {
        PhysicalParams k0 = base;
        k0.k = 0.0;
        curves.push_back(make_curve(cfg, "hybrid_k0", Description::Hybrid, k0, times, "hybrid measurement, k = 0"));
        curves.push_back(make_curve(cfg, "hybrid_zero_init", Description::Hybrid, base, times,
                                    "hybrid measurement, x(0) = p(0) = 0"));
        auto thermal = make_curve(cfg, "hybrid_thermal_init", Description::Hybrid, base, times,
                                  "hybrid measurement, x(0), p(0) ~ N(0, 1/2)");
        thermal.init_mode = "thermal";
        curves.push_back(thermal);
        PhysicalParams lossy = base;
        lossy.kappa = base.omega;
        curves.push_back(make_curve(cfg, "hybrid_kappa1", Description::Hybrid, lossy, times,
                                    "hybrid measurement with photon loss kappa = omega, zero init"));
        PhysicalParams quantum = base;
        quantum.kappa = 0.3 * base.omega;
        curves.push_back(make_curve(cfg, "quantum_kappa0.3", Description::Lindblad, quantum, times,
                                    "quantum master equation with photon loss kappa = 0.3 omega"));
    } else if (p == "thermal") {
        for (const auto& [alpha, k] : kReferencePoints) {
            PhysicalParams q = base;
            q.alpha = alpha;
            q.k = k;
            const std::string tag = "a" + compact(alpha) + "_k" + compact(k);
            for (double nbar : {0.0, 1.0, 10.0, 100.0}) {
                q.nbar_q = nbar;
                curves.push_back(make_curve(cfg, "thermal_" + tag + "_n" + compact(nbar), Description::Quantum, q, times,
                                            "quantum, thermal oscillator; plot var_theta0"));
            }
            q.nbar_q = 0.0;
            curves.push_back(make_curve(cfg, "kerr_" + tag, Description::KerrReference, q, integer_times(times),
                                        "Kerr-medium equivalent at t = m tau"));
        }
    } else if (p == "damping") {
        for (const auto& [gamma, nbar] : std::vector<std::pair<double, double>>{{0.0, 0.0}, {0.01, 0.0}, {0.01, 0.5}}) {
            PhysicalParams q = base;
            q.gamma_m = gamma * base.omega;
            q.nbar_bath = nbar;
            curves.push_back(make_curve(cfg, "damping_g" + compact(gamma) + "_n" + compact(nbar), Description::Lindblad, q,
                                        times, "mechanically damped quantum model; plot var_theta0"));
        }
    } else if (p == "theta_trace") {
        curves.push_back(make_curve(cfg, "theta_quantum", Description::Quantum, base, times, "quantum theta*"));
        PhysicalParams h = base;
        h.alpha = 2.0;
        h.k = 0.1;
        const std::vector<double> early = TimeGrid{{{0.0, 10.0, 0.1}}, {}}.expand();
        curves.push_back(make_curve(cfg, "theta_hybrid_k0.1", Description::Hybrid, h, early, "hybrid theta*, k = 0.1"));
        h.k = 0.0;
        curves.push_back(make_curve(cfg, "theta_hybrid_k0", Description::Hybrid, h, early, "hybrid theta*, k = 0"));
    } else if (p == "custom") {
        if (cfg.descriptions.empty()) throw ConfigError("custom preset needs 'descriptions' or 'curves'");
        for (const auto& name : cfg.descriptions) {
            curves.push_back(make_curve(cfg, name, description_from_string(name), base, times));
        }
    } else {
        throw ConfigError("unknown preset '" + p + "'");
    }
    return curves;
}

void validate_curve(const CurveSpec& c, std::set<std::string>& labels) {
    if (c.label.empty()) throw ConfigError("curve label must be non-empty");
    for (char ch : c.label) {
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) {
            throw ConfigError("curve label '" + c.label + "' may only contain letters, digits, '_', '-', '.'");
        }
    }
    if (!labels.insert(c.label).second) throw ConfigError("duplicate curve label '" + c.label + "'");
    if (c.times.empty()) throw ConfigError("empty time grid");
    for (std::size_t i = 0; i < c.times.size(); ++i) {
        if (!std::isfinite(c.times[i]) || c.times[i] < 0.0) throw ConfigError("times must be finite and >= 0");
        if (i > 0 && !(c.times[i] > c.times[i - 1])) throw ConfigError("times must be strictly increasing in '" + c.label + "'");
    }
    try {
        c.params.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("curve '") + c.label + "': " + e.what());
    }
    switch (c.description) {
        case Description::ClassicalMC:
            if (c.n_samples < 1000) throw ConfigError("classical_mc needs n_samples >= 1000");
            break;
        case Description::Hybrid:
            if (c.n_traj < 2) throw ConfigError("hybrid needs n_traj >= 2");
            if (c.init_mode != "zero" && c.init_mode != "thermal") {
                throw ConfigError("init_mode must be 'zero' or 'thermal'");
            }
            if (!(c.dt_over_tau > 0.0)) throw ConfigError("dt_over_tau must be > 0");
            if (c.params.Gamma <= 0.0 && c.params.k != 0.0) {
                throw ConfigError("hybrid with k != 0 needs Gamma > 0 (oscillator noise g0/(2 sqrt(2 Gamma)))");
            }
            break;
        case Description::KerrReference:
            for (double t : c.times) {
                if (std::abs(t - std::round(t)) > 1e-9) throw ConfigError("kerr_reference times must be whole periods");
            }
            break;
        case Description::Lindblad:
            if (c.lindblad_dt_over_tau < 0.0) throw ConfigError("lindblad_dt_over_tau must be >= 0");
            break;
        default: break;
    }
}

}  // namespace

std::string to_string(Description d) {
    for (const auto& [k, v] : description_names()) {
        if (k == d) return v;
    }
    return "unknown";
}

Description description_from_string(const std::string& name) {
    for (const auto& [k, v] : description_names()) {
        if (v == name) return k;
    }
    throw ConfigError("unknown description '" + name + "'");
}

std::vector<double> TimeGrid::expand() const {
    std::vector<double> out;
    for (const auto& [start, stop, step] : windows) {
        if (!(step > 0.0) || !(stop >= start) || !std::isfinite(stop)) {
            throw ConfigError("time window needs start <= stop and step > 0");
        }
        const long count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
        if (count > 50'000'000) throw ConfigError("time window has too many points");
        for (long i = 0; i < count; ++i) out.push_back(start + step * static_cast<double>(i));
    }
    out.insert(out.end(), points.begin(), points.end());
    if (out.empty()) throw ConfigError("empty time grid");
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (!(out[i] > out[i - 1])) throw ConfigError("time grid must be strictly increasing (windows disjoint and ordered)");
    }
    return out;
}

json to_json(const PhysicalParams& p) {
    return json{{"alpha", p.alpha},       {"k", p.k},         {"omega", p.omega},
                {"nbar_q", p.nbar_q},     {"sigma2_cl", p.sigma2_cl}, {"Gamma", p.Gamma},
                {"kappa", p.kappa},       {"gamma_m", p.gamma_m},     {"nbar_bath", p.nbar_bath}};
}

json to_json(const CurveSpec& c) {
    json j{{"label", c.label}, {"description", to_string(c.description)}, {"params", to_json(c.params)},
           {"times", c.times}};
    switch (c.description) {
        case Description::ClassicalMC: j["n_samples"] = c.n_samples; break;
        case Description::Hybrid:
            j["n_traj"] = c.n_traj;
            j["init_mode"] = c.init_mode;
            j["dt_over_tau"] = c.dt_over_tau;
            break;
        case Description::Lindblad: j["lindblad_dt_over_tau"] = c.lindblad_dt_over_tau; break;
        default: break;
    }
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

json to_json(const ExperimentConfig& c) {
    json j{{"preset", c.preset},
           {"params", to_json(c.params)},
           {"n_samples", c.n_samples},
           {"n_traj", c.n_traj},
           {"init_mode", c.init_mode},
           {"dt_over_tau", c.dt_over_tau},
           {"lindblad_dt_over_tau", c.lindblad_dt_over_tau},
           {"theta_grid_n", c.theta_grid_n},
           {"master_seed", c.master_seed},
           {"workers", c.workers},
           {"output_dir", c.output_dir}};
    json windows = json::array();
    for (const auto& w : c.time.windows) windows.push_back({w[0], w[1], w[2]});
    j["time"] = {{"windows", windows}, {"points", c.time.points}};
    if (!c.descriptions.empty()) j["descriptions"] = c.descriptions;
    if (c.preset == "sweep") {
        json refs = json::array();
        for (const auto& [a, k] : c.sweep.reference_points) refs.push_back({a, k});
        j["sweep"] = {{"alpha_grid", c.sweep.alpha_grid},
                      {"k_grid", c.sweep.k_grid},
                      {"theta", c.sweep.theta},
                      {"reference_points", refs}};
    }
    json curves = json::array();
    for (const auto& cv : c.curves) curves.push_back(to_json(cv));
    j["curves"] = curves;
    return j;
}

std::vector<std::pair<std::string, std::string>> preset_catalog() {
    return {
        {"fig1b", "Q, C, SC1, SC2, SC3 at alpha = 20, k = 0.01 over the early, first- and second-revival windows"},
        {"fig1c", "hybrid measurement model (k = 0, zero/thermal init, kappa = omega) and quantum kappa = 0.3 omega, alpha = 2"},
        {"thermal", "quantum theta = 0 variance for thermal occupations 0, 1, 10, 100 plus the Kerr reference"},
        {"damping", "quantum model with mechanical damping, (gamma, nbar) in {(0,0), (0.01,0), (0.01,0.5)}"},
        {"sweep", "log10 Var_{theta=0}(tau) over an (alpha, k) grid plus reference points"},
        {"theta_trace", "minimizing angle theta* for the quantum and hybrid models"},
        {"custom", "user-defined descriptions, parameters and time grid"},
    };
}

json preset_defaults(const std::string& preset) {
    if (preset == "fig1b") {
        return {{"params", {{"alpha", 20.0}, {"k", 0.01}, {"sigma2_cl", 0.5}}},
                {"time", {{"windows", {{0.0, 10.0, 0.05}, {2450.0, 2550.0, 0.05}, {4950.0, 5050.0, 0.05}}}}}};
    }
    if (preset == "fig1c") {
        return {{"params", {{"alpha", 2.0}, {"k", 0.1}, {"Gamma", 0.01}}},
                {"time", {{"windows", {{0.0, 10.0, 0.1}}}}},
                {"n_traj", 500},
                {"dt_over_tau", 1e-3}};
    }
    if (preset == "thermal") {
        return {{"params", {{"alpha", 20.0}, {"k", 0.01}}}, {"time", {{"windows", {{0.0, 3.0, 0.01}}}}}};
    }
    if (preset == "damping") {
        return {{"params", {{"alpha", 2.0}, {"k", 0.1}}}, {"time", {{"windows", {{0.0, 35.0, 0.1}}}}}};
    }
    if (preset == "sweep") {
        json refs = json::array();
        for (const auto& [a, k] : kReferencePoints) refs.push_back({a, k});
        return {{"params", json::object()},
                {"sweep",
                 {{"alpha_grid", linspace_steps(1.0, 1.0, 50)},
                  {"k_grid", linspace_steps(0.0, 0.001, 201)},
                  {"theta", 0.0},
                  {"reference_points", refs}}}};
    }
    if (preset == "theta_trace") {
        return {{"params", {{"alpha", 20.0}, {"k", 0.01}, {"Gamma", 0.01}}},
                {"time", {{"windows", {{0.0, 10.0, 0.01}, {4990.0, 5010.0, 0.01}}}}},
                {"n_traj", 500}};
    }
    if (preset == "custom") return json::object();
    throw ConfigError("unknown preset '" + preset + "'");
}

void apply_override(json& doc, const std::string& dotted_path, const std::string& text) {
    if (dotted_path.empty()) throw ConfigError("empty override path");
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted_path.find('.', start);
        const std::string key = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("malformed override path '" + dotted_path + "'");
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

ExperimentConfig load_config(const json& user_doc, const std::vector<std::pair<std::string, std::string>>& overrides) {
    if (!user_doc.is_object()) throw ConfigError("config must be a JSON object");
    json patched = user_doc;
    for (const auto& [path, text] : overrides) apply_override(patched, path, text);

    std::string preset = "custom";
    if (patched.contains("preset")) preset = get_as<std::string>(patched.at("preset"), "preset");
    json doc = preset_defaults(preset);
    doc.merge_patch(patched);
    doc["preset"] = preset;

    check_keys(doc,
               {"preset", "params", "time", "descriptions", "n_samples", "n_traj", "init_mode", "dt_over_tau",
                "lindblad_dt_over_tau", "theta_grid_n", "master_seed", "workers", "output_dir", "sweep", "curves"},
               "config");

    ExperimentConfig cfg;
    cfg.preset = preset;
    if (doc.contains("params")) cfg.params = params_from_json(doc.at("params"), cfg.params);
    if (doc.contains("time")) cfg.time = time_from_json(doc.at("time"));
    if (doc.contains("descriptions")) cfg.descriptions = get_as<std::vector<std::string>>(doc.at("descriptions"), "descriptions");
    if (doc.contains("n_samples")) cfg.n_samples = get_as<std::size_t>(doc.at("n_samples"), "n_samples");
    if (doc.contains("n_traj")) cfg.n_traj = get_as<std::size_t>(doc.at("n_traj"), "n_traj");
    if (doc.contains("init_mode")) cfg.init_mode = get_as<std::string>(doc.at("init_mode"), "init_mode");
    if (doc.contains("dt_over_tau")) cfg.dt_over_tau = get_as<double>(doc.at("dt_over_tau"), "dt_over_tau");
    if (doc.contains("lindblad_dt_over_tau")) {
        cfg.lindblad_dt_over_tau = get_as<double>(doc.at("lindblad_dt_over_tau"), "lindblad_dt_over_tau");
    }
    if (doc.contains("theta_grid_n")) cfg.theta_grid_n = get_as<int>(doc.at("theta_grid_n"), "theta_grid_n");
    if (doc.contains("master_seed")) cfg.master_seed = get_as<std::uint64_t>(doc.at("master_seed"), "master_seed");
    if (doc.contains("workers")) cfg.workers = get_as<unsigned>(doc.at("workers"), "workers");
    if (doc.contains("output_dir")) cfg.output_dir = get_as<std::string>(doc.at("output_dir"), "output_dir");
    if (cfg.theta_grid_n < 16) throw ConfigError("theta_grid_n must be >= 16");

    if (preset == "sweep") {
        const json& s = doc.at("sweep");
        check_keys(s, {"alpha_grid", "k_grid", "theta", "reference_points"}, "sweep");
        if (s.contains("alpha_grid")) cfg.sweep.alpha_grid = get_as<std::vector<double>>(s.at("alpha_grid"), "alpha_grid");
        if (s.contains("k_grid")) cfg.sweep.k_grid = get_as<std::vector<double>>(s.at("k_grid"), "k_grid");
        if (s.contains("theta")) cfg.sweep.theta = get_as<double>(s.at("theta"), "theta");
        if (s.contains("reference_points")) {
            for (const auto& r : s.at("reference_points")) {
                const auto v = get_as<std::vector<double>>(r, "reference_points");
                if (v.size() != 2) throw ConfigError("reference point must be [alpha, k]");
                cfg.sweep.reference_points.emplace_back(v[0], v[1]);
            }
        }
        if (cfg.sweep.alpha_grid.empty() || cfg.sweep.k_grid.empty()) throw ConfigError("sweep grids must be non-empty");
        for (double a : cfg.sweep.alpha_grid) {
            if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alpha_grid values must be finite and >= 0");
        }
        for (double k : cfg.sweep.k_grid) {
            if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError("k_grid values must be finite and >= 0");
        }
        return cfg;
    }

    if (doc.contains("curves") && !doc.at("curves").empty()) {
        for (const auto& c : doc.at("curves")) cfg.curves.push_back(curve_from_json(c, cfg.params));
    } else {
        cfg.curves = generate_curves(cfg);
    }
    std::set<std::string> labels;
    for (const auto& c : cfg.curves) validate_curve(c, labels);
    return cfg;
}

std::string resolve_output_dir(const ExperimentConfig& config) {
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv("OPTOSQUEEZE_OUT"); env != nullptr && *env != '\0') return env;
    return "out";
}

}  // namespace optosqueeze::cli
