#pragma once

// Batch persistence.
//
// CSV: header "chain,x_1,...,x_d", one row per chain.
// Binary: "ULAB1", u32 n_chains, u32 d, then n_chains * d f64, all
// little-endian, row-major.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ulakit/error.hpp"
#include "ulakit/format.hpp"
#include "ulakit/sim.hpp"

namespace ulakit {

inline constexpr std::array<char, 5> kBinaryMagic = {'U', 'L', 'A', 'B', '1'};

inline void write_batch_csv(std::ostream& os, const SampleBatch& b) {
    os << "chain";
    for (std::size_t j = 1; j <= b.dim; ++j) os << ",x_" << j;
    os << '\n';
    for (std::size_t i = 0; i < b.rows(); ++i) {
        os << (i < b.chain_ids.size() ? b.chain_ids[i] : i);
        for (double v : b.row(i)) os << ',' << format_double(v);
        os << '\n';
    }
}

inline SampleBatch read_batch_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("batch csv: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t dim = 0;
    {
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        if (field != "chain") throw ConfigError("batch csv: header must start with 'chain'");
        while (std::getline(ss, field, ',')) {
            if (field != "x_" + std::to_string(dim + 1)) throw ConfigError("batch csv: bad column '" + field + "'");
            ++dim;
        }
    }
    if (dim == 0) throw ConfigError("batch csv: no value columns");
    SampleBatch b;
    b.dim = dim;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        std::uint64_t id = 0;
        auto r = std::from_chars(p, end, id);
        if (r.ec != std::errc{}) throw ConfigError("batch csv: bad chain id on line " + std::to_string(line_no));
        p = r.ptr;
        for (std::size_t j = 0; j < dim; ++j) {
            if (p == end || *p != ',') throw ConfigError("batch csv: too few fields on line " + std::to_string(line_no));
            double v = 0.0;
            auto rv = std::from_chars(p + 1, end, v);
            if (rv.ec != std::errc{}) throw ConfigError("batch csv: bad number on line " + std::to_string(line_no));
            b.values.push_back(v);
            p = rv.ptr;
        }
        if (p != end) throw ConfigError("batch csv: too many fields on line " + std::to_string(line_no));
        b.chain_ids.push_back(id);
    }
    b.provenance.n_chains = b.rows();
    return b;
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    os.write(buf.data(), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<char, sizeof(T)> buf;
    if (!is.read(buf.data(), sizeof(T))) throw ConfigError("binary batch: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    return v;
}

}  // namespace detail

inline void write_batch_binary(std::ostream& os, const SampleBatch& b) {
    if (b.rows() > std::numeric_limits<std::uint32_t>::max() || b.dim > std::numeric_limits<std::uint32_t>::max()) {
        throw DomainError("binary batch: shape exceeds u32");
    }
    os.write(kBinaryMagic.data(), kBinaryMagic.size());
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.rows()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.dim));
    for (double v : b.values) detail::put_le<double>(os, v);
}

inline SampleBatch read_batch_binary(std::istream& is) {
    std::array<char, 5> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kBinaryMagic) throw ConfigError("binary batch: bad magic");
    const auto n = detail::get_le<std::uint32_t>(is);
    const auto d = detail::get_le<std::uint32_t>(is);
    if (d == 0) throw ConfigError("binary batch: zero dimension");
    SampleBatch b;
    b.dim = d;
    b.values.resize(static_cast<std::size_t>(n) * d);
    for (auto& v : b.values) v = detail::get_le<double>(is);
    if (is.peek() != std::char_traits<char>::eof()) throw ConfigError("binary batch: trailing bytes");
    b.chain_ids = iota_ids(n);
    b.provenance.n_chains = n;
    return b;
}

inline void save_batch(const std::filesystem::path& path, const SampleBatch& b) {
    const bool binary = path.extension() == ".ulab";
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw ConfigError("cannot write " + path.string());
    if (binary) {
        write_batch_binary(os, b);
    } else {
        write_batch_csv(os, b);
    }
    if (!os) throw ConfigError("write failed for " + path.string());
}

/// Format chosen by extension: ".ulab" is binary, anything else CSV.
inline SampleBatch load_batch(const std::filesystem::path& path) {
    const bool binary = path.extension() == ".ulab";
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw ConfigError("cannot read " + path.string());
    return binary ? read_batch_binary(is) : read_batch_csv(is);
}

}  // namespace ulakit
