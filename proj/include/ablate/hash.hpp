#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ablate {

// 64-bit FNV-1a. Used for content addressing (candidate ids, file digests,
// snapshot ids); portable and stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t hash = seed;
    for (unsigned char c : data) {
        hash ^= static_cast<std::uint64_t>(c);
        hash *= 0x00000100000001b3ull;
    }
    return hash;
}

inline std::string to_hex16(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

inline std::string content_hash(std::string_view data) {
    return to_hex16(fnv1a64(data));
}

}  // namespace ablate
