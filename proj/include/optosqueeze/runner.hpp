#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "optosqueeze/config.hpp"
#include "optosqueeze/quadrature.hpp"

namespace optosqueeze::cli {

struct InvariantOutcome {
    std::string name;
    bool passed = true;
    bool fatal = true;  ///< a failed non-fatal check is reported but does not fail the run
    std::string detail;
};

struct CurveResult {
    CurveSpec spec;
    QuadratureSeries series;
    /// Extra files written next to the main curve: (suffix, csv text).
    std::vector<std::pair<std::string, std::string>> companions;
    std::vector<InvariantOutcome> invariants;
    nlohmann::json summary = nlohmann::json::object();
    double runtime_s = 0.0;
};

/**
 * Computes one curve. Numerical invariant failures raised by the models
 * propagate as InvariantViolation; bad combinations of inputs raise ConfigError.
 */
CurveResult run_curve(const CurveSpec& spec, int theta_grid_n, std::uint64_t master_seed, unsigned workers);

struct RunReport {
    std::string output_dir;
    std::vector<std::string> files;
    nlohmann::json manifest;
    bool ok = true;
    std::string failed_invariant;
    std::string failure_detail;
};

/**
 * Runs every curve (or the sweep for the sweep preset), writing one CSV per
 * curve, the expanded config, and manifest.json into the output directory.
 * Curves whose invariants fail are not written; the report records the first
 * failure and ok = false.
 */
RunReport run(const ExperimentConfig& config);

/// log10 Var matrix plus the reference-point companion file.
RunReport run_sweep(const ExperimentConfig& config);

/// Fast invariant suite; returns {"passed": bool, "checks": [...]}.
nlohmann::json validate_suite();

}  // namespace optosqueeze::cli
