#include "optosqueeze/output.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace optosqueeze::cli {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string series_to_csv(const QuadratureSeries& s) {
    std::string out = kSeriesHeader;
    out += '\n';
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += format_double(s.times[i]);
        out += ',';
        out += format_double(s.var_min[i]);
        out += ',';
        out += format_double(s.theta_star[i]);
        out += ',';
        out += format_double(s.var_fixed_theta[i]);
        out += ',';
        if (s.stderr_) out += format_double((*s.stderr_)[i]);
        out += '\n';
    }
    return out;
}

std::string matrix_to_csv(std::span<const double> alpha_grid, std::span<const double> k_grid,
                          std::span<const double> row_major) {
    if (row_major.size() != alpha_grid.size() * k_grid.size()) throw std::invalid_argument("matrix_to_csv: size mismatch");
    std::string out = "alpha\\k";
    for (double k : k_grid) out += ',' + format_double(k);
    out += '\n';
    for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
        out += format_double(alpha_grid[i]);
        for (std::size_t j = 0; j < k_grid.size(); ++j) out += ',' + format_double(row_major[i * k_grid.size() + j]);
        out += '\n';
    }
    return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace optosqueeze::cli
