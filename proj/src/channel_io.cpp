#include "langevin/channel_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace langevin {

namespace {

constexpr std::array<char, 8> kMagic = {'L', 'G', 'V', 'C', 'H', 'A', 'N', '1'};

static_assert(std::endian::native == std::endian::little, "channel binary format assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("channel file truncated");
    return value;
}

void check_shapes(const std::vector<ComplexMatrix>& channels) {
    for (const auto& h : channels)
        if (h.rows() != channels.front().rows() || h.cols() != channels.front().cols())
            throw DimensionError("channel ensemble mixes matrix shapes");
}

}  // namespace

void write_channels_binary(const std::string& path, const std::vector<ComplexMatrix>& channels) {
    check_shapes(channels);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kMagic.data(), kMagic.size());
    const auto n_r = channels.empty() ? 0U : static_cast<std::uint32_t>(channels.front().rows());
    const auto n_u = channels.empty() ? 0U : static_cast<std::uint32_t>(channels.front().cols());
    put(out, n_r);
    put(out, n_u);
    put(out, static_cast<std::uint64_t>(channels.size()));
    for (const auto& h : channels)
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            for (Eigen::Index j = 0; j < h.cols(); ++j) {
                put(out, h(i, j).real());
                put(out, h(i, j).imag());
            }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<ComplexMatrix> read_channels_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw std::runtime_error("'" + path + "' is not a channel ensemble file");
    const auto n_r = get<std::uint32_t>(in);
    const auto n_u = get<std::uint32_t>(in);
    const auto count = get<std::uint64_t>(in);
    std::vector<ComplexMatrix> channels;
    channels.reserve(count);
    for (std::uint64_t c = 0; c < count; ++c) {
        ComplexMatrix h(n_r, n_u);
        for (std::uint32_t i = 0; i < n_r; ++i)
            for (std::uint32_t j = 0; j < n_u; ++j) {
                const double re = get<double>(in);
                const double im = get<double>(in);
                h(i, j) = {re, im};
            }
        channels.push_back(std::move(h));
    }
    return channels;
}

void write_channels_csv(const std::string& path, const std::vector<ComplexMatrix>& channels) {
    check_shapes(channels);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "n_r,n_u\n";
    out << (channels.empty() ? 0 : channels.front().rows()) << ',' << (channels.empty() ? 0 : channels.front().cols())
        << '\n';
    out << std::setprecision(17);
    for (const auto& h : channels) {
        bool first = true;
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            for (Eigen::Index j = 0; j < h.cols(); ++j) {
                out << (first ? "" : ",") << h(i, j).real() << ',' << h(i, j).imag();
                first = false;
            }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<ComplexMatrix> read_channels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "n_r,n_u") throw std::runtime_error("'" + path + "': missing header");
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "': missing sizes");
    long n_r = 0, n_u = 0;
    char comma = 0;
    std::istringstream sizes(line);
    if (!(sizes >> n_r >> comma >> n_u) || comma != ',') throw std::runtime_error("'" + path + "': bad sizes line");
    std::vector<ComplexMatrix> channels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> values;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
        if (static_cast<long>(values.size()) != 2 * n_r * n_u)
            throw std::runtime_error("'" + path + "': channel row has wrong number of values");
        ComplexMatrix h(n_r, n_u);
        std::size_t k = 0;
        for (long i = 0; i < n_r; ++i)
            for (long j = 0; j < n_u; ++j, k += 2) h(i, j) = {values[k], values[k + 1]};
        channels.push_back(std::move(h));
    }
    return channels;
}

}  // namespace langevin
