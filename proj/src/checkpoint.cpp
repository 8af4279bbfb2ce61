#include "optosqueeze/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace optosqueeze {

namespace {

constexpr std::array<char, 4> kMagic{'R', 'H', 'O', 'C'};

template <typename U>
void put_le(std::vector<char>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Eigen::MatrixXcd& matrix) {
    std::vector<char> buf(kMagic.begin(), kMagic.end());
    put_le<std::uint32_t>(buf, kCheckpointVersion);
    put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(matrix.rows()));
    put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(matrix.cols()));
    buf.reserve(buf.size() + static_cast<std::size_t>(matrix.size()) * 16);
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            put_le(buf, std::bit_cast<std::uint64_t>(matrix(i, j).real()));
            put_le(buf, std::bit_cast<std::uint64_t>(matrix(i, j).imag()));
        }
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Eigen::MatrixXcd read_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    constexpr std::size_t header = 4 + 4 + 8 + 8;
    if (buf.size() < header || !std::equal(kMagic.begin(), kMagic.end(), buf.begin())) {
        throw std::runtime_error(path.string() + " is not a density checkpoint");
    }
    const auto version = get_le<std::uint32_t>(buf.data() + 4);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto rows = get_le<std::uint64_t>(buf.data() + 8);
    const auto cols = get_le<std::uint64_t>(buf.data() + 16);
    if (rows > (1u << 20) || cols > (1u << 20) || buf.size() != header + rows * cols * 16) {
        throw std::runtime_error("checkpoint " + path.string() + " has inconsistent size");
    }
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const char* p = buf.data() + header;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j, p += 16) {
            m(i, j) = {std::bit_cast<double>(get_le<std::uint64_t>(p)), std::bit_cast<double>(get_le<std::uint64_t>(p + 8))};
        }
    }
    return m;
}

}  // namespace optosqueeze
