#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "optosqueeze/quadrature.hpp"

namespace optosqueeze::cli {

/// Column header shared by every curve file.
inline constexpr const char* kSeriesHeader = "t_over_tau,var_min,theta_star,var_theta0,stderr";

/// Shortest-round-trip-safe decimal form: 17 significant digits, '.' separator.
std::string format_double(double v);

/// One row per time; the stderr field is empty when the series has none.
std::string series_to_csv(const QuadratureSeries& series);

/// log10 Var matrix: first row "alpha\k,k_1,...", then "alpha_i,v_i1,...".
std::string matrix_to_csv(std::span<const double> alpha_grid, std::span<const double> k_grid,
                          std::span<const double> row_major);

/// Writes to a sibling temporary file and renames it over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace optosqueeze::cli
