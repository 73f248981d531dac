#pragma once
#include <cstddef>
#include <cstdint>
#include <string>

namespace gyre {

// FNV-1a 64-bit, used for checkpoint ids and manifest content hashes.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(uint64_t v);

}  // namespace gyre
