#include "spamwall/util.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace spamwall {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            return parts;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> parts;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) parts.emplace_back(s.substr(start, i - start));
    }
    return parts;
}

bool icontains(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    if (needle.size() > haystack.size()) return false;
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                          [](char a, char b) {
                              return std::tolower(static_cast<unsigned char>(a)) ==
                                     std::tolower(static_cast<unsigned char>(b));
                          });
    return it != haystack.end();
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && icontains(a, b) && icontains(b, a);
}

std::optional<Ipv4> Ipv4::parse(std::string_view dotted) {
    uint32_t value = 0;
    int octets = 0;
    size_t i = 0;
    while (octets < 4) {
        if (i >= dotted.size() || !std::isdigit(static_cast<unsigned char>(dotted[i])))
            return std::nullopt;
        unsigned v = 0;
        size_t digits = 0;
        while (i < dotted.size() && std::isdigit(static_cast<unsigned char>(dotted[i]))) {
            v = v * 10 + static_cast<unsigned>(dotted[i] - '0');
            ++digits;
            ++i;
            if (digits > 3 || v > 255) return std::nullopt;
        }
        value = (value << 8) | v;
        ++octets;
        if (octets < 4) {
            if (i >= dotted.size() || dotted[i] != '.') return std::nullopt;
            ++i;
        }
    }
    if (i != dotted.size()) return std::nullopt;
    return Ipv4{value};
}

std::string Ipv4::to_string() const {
    std::string out;
    out.reserve(15);
    for (int i = 0; i < 4; ++i) {
        if (i) out.push_back('.');
        out += std::to_string(static_cast<unsigned>(octet(i)));
    }
    return out;
}

bool Ipv4::in_cidr(Ipv4 network, int prefix_len) const {
    if (prefix_len <= 0) return true;
    if (prefix_len >= 32) return value == network.value;
    uint32_t mask = ~((1u << (32 - prefix_len)) - 1u);
    return (value & mask) == (network.value & mask);
}

}  // namespace spamwall
