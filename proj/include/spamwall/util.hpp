#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spamwall {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::vector<std::string> split_ws(std::string_view s);

/// Case-insensitive substring search; returns true when needle occurs in haystack.
bool icontains(std::string_view haystack, std::string_view needle);
bool iequals(std::string_view a, std::string_view b);

/// IPv4 address held in host byte order.
struct Ipv4 {
    uint32_t value = 0;

    static std::optional<Ipv4> parse(std::string_view dotted);
    std::string to_string() const;
    uint8_t octet(int i) const { return static_cast<uint8_t>(value >> (24 - 8 * i)); }
    bool in_cidr(Ipv4 network, int prefix_len) const;

    auto operator<=>(const Ipv4&) const = default;
};

/// splitmix64: tiny deterministic PRNG, identical output on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound); bound must be > 0.
    uint64_t next_below(uint64_t bound) { return next() % bound; }

private:
    uint64_t state_;
};

}  // namespace spamwall
