#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace agp {

// FNV-1a over the canonical byte encoding. Not cryptographic; used for
// content identity of snapshots, where determinism across platforms is the
// requirement.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex_digest(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline std::string content_digest(std::string_view bytes) { return hex_digest(fnv1a64(bytes)); }

}  // namespace agp
