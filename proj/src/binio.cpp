#include "drip/binio.hpp"

#include <zlib.h>

namespace drip::binio {

std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed) {
    return static_cast<std::uint32_t>(
        ::crc32(seed, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace drip::binio
