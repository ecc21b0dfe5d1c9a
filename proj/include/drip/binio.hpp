#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "drip/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialized formats are little-endian; big-endian hosts unsupported");

namespace drip::binio {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_u8(std::ostream& os, std::uint8_t v) {
    os.write(reinterpret_cast<const char*>(&v), 1);
}
inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw IoError("unexpected end of file");
    return v;
}
inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 8)) throw IoError("unexpected end of file");
    return v;
}
inline std::uint8_t get_u8(std::istream& is) {
    std::uint8_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 1)) throw IoError("unexpected end of file");
    return v;
}
inline void get_bytes(std::istream& is, void* p, std::size_t n) {
    if (!is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n)))
        throw IoError("unexpected end of file");
}

// Standard CRC-32 (IEEE, reflected 0xEDB88320).
std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed = 0);

}  // namespace drip::binio
