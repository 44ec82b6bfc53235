#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace agp {

// Semantic version "MAJOR.MINOR.PATCH". Total order is lexicographic on the
// numeric triple; parse(render(v)) == v.
struct Version {
    std::uint64_t major = 0;
    std::uint64_t minor = 1;
    std::uint64_t patch = 0;

    auto operator<=>(const Version&) const = default;

    std::string str() const {
        return std::to_string(major) + "." + std::to_string(minor) + "." + std::to_string(patch);
    }

    static std::optional<Version> parse(std::string_view text) {
        Version v;
        std::uint64_t* parts[3] = {&v.major, &v.minor, &v.patch};
        std::size_t pos = 0;
        for (int i = 0; i < 3; ++i) {
            if (i > 0) {
                if (pos >= text.size() || text[pos] != '.') return std::nullopt;
                ++pos;
            }
            const char* begin = text.data() + pos;
            const char* end = text.data() + text.size();
            auto [ptr, ec] = std::from_chars(begin, end, *parts[i]);
            if (ec != std::errc{} || ptr == begin) return std::nullopt;
            pos = static_cast<std::size_t>(ptr - text.data());
        }
        if (pos != text.size()) return std::nullopt;
        return v;
    }
};

// Auto-increment rule: no predecessor yields 0.1.0, otherwise bump PATCH.
inline Version next_version(const std::optional<Version>& current) {
    if (!current) return Version{0, 1, 0};
    Version v = *current;
    v.patch += 1;
    return v;
}

}  // namespace agp
