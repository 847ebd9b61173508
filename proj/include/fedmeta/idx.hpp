#pragma once

// IDX container used by the MNIST distribution: two zero bytes, a type byte
// (0x08 = unsigned byte), a dimension count, then one big-endian u32 per
// dimension followed by the payload. Only 1-d (labels) and 3-d (images)
// unsigned-byte tensors are accepted.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "fedmeta/error.hpp"

namespace fedmeta {

struct IdxTensor {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

inline constexpr std::uint8_t idx_ubyte_type = 0x08;

inline IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 4, errc::truncated_file, "IDX header shorter than 4 bytes");
    const std::uint8_t rank = bytes[3];
    require(bytes[0] == 0 && bytes[1] == 0 && bytes[2] == idx_ubyte_type && (rank == 1 || rank == 3),
            errc::bad_magic,
            "unsupported IDX magic " + std::to_string(bytes[0]) + "," + std::to_string(bytes[1]) + "," +
                std::to_string(bytes[2]) + "," + std::to_string(rank));
    const std::size_t header = 4 + 4 * std::size_t{rank};
    require(bytes.size() >= header, errc::truncated_file, "IDX dimension table is truncated");

    IdxTensor t;
    for (std::size_t k = 0; k < rank; ++k) {
        const auto* p = bytes.data() + 4 + 4 * k;
        t.dims.push_back(std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 |
                         std::uint32_t{p[3]});
    }
    const std::size_t payload = t.element_count();
    require(bytes.size() - header >= payload, errc::truncated_file,
            "IDX payload has " + std::to_string(bytes.size() - header) + " bytes, header declares " +
                std::to_string(payload));
    require(bytes.size() - header == payload, errc::dimension_mismatch,
            "IDX file carries " + std::to_string(bytes.size() - header - payload) + " bytes beyond its declared shape");
    t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return t;
}

inline std::vector<std::uint8_t> serialize_idx(const IdxTensor& t) {
    require(t.dims.size() == 1 || t.dims.size() == 3, errc::invalid_argument, "IDX rank must be 1 or 3");
    require(t.data.size() == t.element_count(), errc::dimension_mismatch, "IDX payload does not match dims");
    std::vector<std::uint8_t> out = {0, 0, idx_ubyte_type, static_cast<std::uint8_t>(t.dims.size())};
    for (auto d : t.dims) {
        out.push_back(static_cast<std::uint8_t>(d >> 24));
        out.push_back(static_cast<std::uint8_t>(d >> 16));
        out.push_back(static_cast<std::uint8_t>(d >> 8));
        out.push_back(static_cast<std::uint8_t>(d));
    }
    out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), errc::missing_data, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline IdxTensor read_idx_file(const std::filesystem::path& path) { return parse_idx(read_file_bytes(path)); }

inline void write_idx_file(const std::filesystem::path& path, const IdxTensor& t) {
    const auto bytes = serialize_idx(t);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), errc::io_error, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace fedmeta
