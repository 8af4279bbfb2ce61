#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "optosqueeze/config.hpp"
#include "optosqueeze/runner.hpp"
#include "optosqueeze/version.hpp"

namespace {

using nlohmann::json;
using optosqueeze::cli::ConfigError;

constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

int fail(int code, json body) {
    std::cerr << body.dump() << '\n';
    return code;
}

// "--params.alpha 20" and "--params.alpha=20" pairs left over by the parser.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& rest) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        const std::string& arg = rest[i];
        if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
        const std::string body = arg.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= rest.size()) throw ConfigError("override '" + arg + "' needs a value");
            out.emplace_back(body, rest[++i]);
        }
    }
    return out;
}

json read_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
}

struct CommonArgs {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::string seed;
    std::string workers;
};

void add_common(CLI::App* sub, CommonArgs& args, bool with_preset) {
    sub->add_option("-c,--config", args.config_path, "JSON config file");
    if (with_preset) sub->add_option("-p,--preset", args.preset, "preset name (see 'presets')");
    sub->add_option("-o,--out", args.out_dir, "output directory (default $OPTOSQUEEZE_OUT or ./out)");
    sub->add_option("--seed", args.seed, "master seed");
    sub->add_option("--workers", args.workers, "worker threads (0 = all cores)");
    sub->allow_extras();
    sub->footer("Any config field can be overridden with --<dotted.path> <value>, e.g. --params.alpha 20");
}

int execute(const CommonArgs& args, const std::vector<std::string>& rest, const char* forced_preset) {
    json doc = read_config_file(args.config_path);
    auto overrides = parse_overrides(rest);
    if (forced_preset != nullptr) overrides.insert(overrides.begin(), {"preset", std::string("\"") + forced_preset + "\""});
    if (!args.preset.empty()) overrides.insert(overrides.begin(), {"preset", json(args.preset).dump()});
    if (!args.out_dir.empty()) overrides.emplace_back("output_dir", json(args.out_dir).dump());
    if (!args.seed.empty()) overrides.emplace_back("master_seed", args.seed);
    if (!args.workers.empty()) overrides.emplace_back("workers", args.workers);

    const auto config = optosqueeze::cli::load_config(doc, overrides);
    const auto report = optosqueeze::cli::run(config);
    if (!report.ok) {
        return fail(kExitInvariant, {{"error", "invariant"},
                                     {"invariant", report.failed_invariant},
                                     {"message", report.failure_detail},
                                     {"output_dir", report.output_dir}});
    }
    std::cout << json{{"status", "ok"}, {"output_dir", report.output_dir}, {"files", report.files}}.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optomechanical field squeezing: closed forms, ensembles, Fock-space and hybrid-measurement models"};
    app.set_version_flag("--version", optosqueeze::kVersion);
    app.require_subcommand(1);

    CommonArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "compute the curves of a preset or config");
    add_common(run_cmd, run_args, true);

    CommonArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "log10 Var_{theta=0}(tau) over an (alpha, k) grid");
    add_common(sweep_cmd, sweep_args, false);

    auto* validate_cmd = app.add_subcommand("validate", "run the fast invariant suite");
    auto* presets_cmd = app.add_subcommand("presets", "list presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail(kExitConfig, {{"error", "config"}, {"message", e.what()}});
    }

    try {
        if (*presets_cmd) {
            json list = json::array();
            for (const auto& [name, text] : optosqueeze::cli::preset_catalog()) list.push_back({{"name", name}, {"summary", text}});
            std::cout << list.dump(2) << '\n';
            return 0;
        }
        if (*validate_cmd) {
            const json result = optosqueeze::cli::validate_suite();
            std::cout << result.dump(2) << '\n';
            return result.at("passed").get<bool>() ? 0 : kExitInvariant;
        }
        if (*sweep_cmd) return execute(sweep_args, sweep_cmd->remaining(), "sweep");
        return execute(run_args, run_cmd->remaining(), nullptr);
    } catch (const ConfigError& e) {
        return fail(kExitConfig, {{"error", "config"}, {"message", e.what()}});
    } catch (const optosqueeze::DomainError& e) {
        return fail(kExitConfig, {{"error", "config"}, {"message", e.what()}});
    } catch (const optosqueeze::InvariantViolation& e) {
        return fail(kExitInvariant, {{"error", "invariant"}, {"invariant", e.invariant()}, {"message", e.what()}});
    } catch (const std::exception& e) {
        return fail(1, {{"error", "internal"}, {"message", e.what()}});
    }
}
