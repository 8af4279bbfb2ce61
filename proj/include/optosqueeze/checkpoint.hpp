#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>

namespace optosqueeze {

/**
 * Binary snapshot of a complex matrix (density operator).
 *
 * Layout, all little-endian:
 *   bytes 0-3   magic "RHOC"
 *   uint32      format version (kCheckpointVersion)
 *   uint64      rows
 *   uint64      cols
 *   rows * cols pairs of float64 (re, im), row-major
 */
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const Eigen::MatrixXcd& matrix);

/// Throws std::runtime_error on a bad magic, unknown version, or truncated file.
Eigen::MatrixXcd read_checkpoint(const std::filesystem::path& path);

}  // namespace optosqueeze
