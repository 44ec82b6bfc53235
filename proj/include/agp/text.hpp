#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace agp {

inline std::string casefold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Case-folded whitespace split. This is the token basis of the similarity
// metric below, so its behavior is pinned by tests.
inline std::vector<std::string> whitespace_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Case-folded split on any non-alphanumeric character; used by the lexical
// retrieval scorer so names like "csv_parser" contribute useful tokens.
inline std::vector<std::string> word_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::size_t token_levenshtein(const std::vector<std::string>& a,
                                     const std::vector<std::string>& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// Normalized token-level edit similarity in [0,1]: 1 for identical token
// sequences, 0 when every position must change. Symmetric by construction.
inline double similarity(std::string_view a, std::string_view b) {
    const auto ta = whitespace_tokens(a);
    const auto tb = whitespace_tokens(b);
    const std::size_t denom = std::max({ta.size(), tb.size(), std::size_t{1}});
    const std::size_t dist = token_levenshtein(ta, tb);
    return 1.0 - static_cast<double>(dist) / static_cast<double>(denom);
}

// Token-set overlap |A∩B| / |A∪B| over word tokens; the default lexical
// retrieval scorer.
inline double token_set_overlap(std::string_view query, std::string_view doc) {
    const auto qa = word_tokens(query);
    const auto da = word_tokens(doc);
    const std::set<std::string> q(qa.begin(), qa.end());
    const std::set<std::string> d(da.begin(), da.end());
    if (q.empty() && d.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : q) inter += d.count(t);
    const std::size_t uni = q.size() + d.size() - inter;
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Binary task reward: exact match after trimming and case-folding.
inline double exact_match_reward(std::string_view produced, std::string_view reference) {
    return casefold(trim(produced)) == casefold(trim(reference)) ? 1.0 : 0.0;
}

}  // namespace agp
