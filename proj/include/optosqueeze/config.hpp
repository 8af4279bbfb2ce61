#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "optosqueeze/params.hpp"

namespace optosqueeze::cli {

/// Invalid configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Which model produces a curve.
enum class Description {
    Quantum,
    Classical,
    SC1,
    SC2,
    SC3,
    ClassicalMC,
    HilbertClosed,
    Lindblad,
    Hybrid,
    KerrReference,
    RevivalFirst,
    RevivalSecond,
};

std::string to_string(Description d);
Description description_from_string(const std::string& name);

/// Disjoint windows [start, stop] sampled every step, and/or explicit points (all in t / tau).
struct TimeGrid {
    std::vector<std::array<double, 3>> windows;
    std::vector<double> points;

    /// Window points are start + i * step; the result must be strictly increasing and non-empty.
    std::vector<double> expand() const;
};

/// One fully explicit curve.
struct CurveSpec {
    std::string label;
    Description description = Description::Quantum;
    PhysicalParams params;
    std::vector<double> times;  ///< t / tau
    std::size_t n_samples = 100000;  ///< classical Monte Carlo
    std::size_t n_traj = 500;        ///< hybrid trajectories
    std::string init_mode = "zero";  ///< hybrid: zero | thermal
    double dt_over_tau = 1e-3;       ///< hybrid step
    double lindblad_dt_over_tau = 0.0;  ///< 0 selects the stability-derived default
    /// Short note on what the curve reproduces (echoed into the manifest).
    std::string note;
};

struct SweepSpec {
    std::vector<double> alpha_grid;
    std::vector<double> k_grid;
    double theta = 0.0;
    std::vector<std::pair<double, double>> reference_points;
};

struct ExperimentConfig {
    std::string preset = "custom";
    PhysicalParams params;
    TimeGrid time;
    std::vector<std::string> descriptions;
    std::size_t n_samples = 100000;
    std::size_t n_traj = 500;
    std::string init_mode = "zero";
    double dt_over_tau = 1e-3;
    double lindblad_dt_over_tau = 0.0;
    int theta_grid_n = 256;
    std::uint64_t master_seed = 1;
    unsigned workers = 0;
    std::string output_dir;
    SweepSpec sweep;
    std::vector<CurveSpec> curves;
};

nlohmann::json to_json(const PhysicalParams& p);
nlohmann::json to_json(const CurveSpec& c);
nlohmann::json to_json(const ExperimentConfig& c);

/// Names and one-line summaries of the presets.
std::vector<std::pair<std::string, std::string>> preset_catalog();

/// Default JSON document of a preset (before user overrides).
nlohmann::json preset_defaults(const std::string& preset);

/**
 * Sets the value at a dotted path ("params.alpha"). The text is parsed as
 * JSON when possible (numbers, arrays, booleans) and kept as a string otherwise.
 */
void apply_override(nlohmann::json& doc, const std::string& dotted_path, const std::string& text);

/**
 * Builds a validated, fully expanded config: preset defaults, then the user
 * document (merge patch), then the overrides in order. An explicit "curves"
 * array is taken verbatim; otherwise the preset generates the curves.
 * Throws ConfigError on any problem.
 */
ExperimentConfig load_config(const nlohmann::json& user_doc,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Output directory: config value, else $OPTOSQUEEZE_OUT, else "out".
std::string resolve_output_dir(const ExperimentConfig& config);

}  // namespace optosqueeze::cli
