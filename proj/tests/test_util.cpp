#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spamwall/util.hpp"

using namespace spamwall;

TEST_CASE("Ipv4 parses strict dotted quads only") {
    CHECK(Ipv4::parse("192.0.2.1")->to_string() == "192.0.2.1");
    CHECK(Ipv4::parse("0.0.0.0")->value == 0u);
    CHECK(Ipv4::parse("255.255.255.255")->value == 0xffffffffu);
    CHECK_FALSE(Ipv4::parse("256.0.0.1"));
    CHECK_FALSE(Ipv4::parse("1.2.3"));
    CHECK_FALSE(Ipv4::parse("1.2.3.4.5"));
    CHECK_FALSE(Ipv4::parse("1.2.3.x"));
    CHECK_FALSE(Ipv4::parse(""));
    CHECK_FALSE(Ipv4::parse("1.2.3.4 "));
    CHECK_FALSE(Ipv4::parse("1234.2.3.4"));
}

TEST_CASE("Ipv4 CIDR membership") {
    Ipv4 ip = *Ipv4::parse("192.0.2.55");
    CHECK(ip.in_cidr(*Ipv4::parse("192.0.2.0"), 24));
    CHECK_FALSE(ip.in_cidr(*Ipv4::parse("192.0.3.0"), 24));
    CHECK(ip.in_cidr(*Ipv4::parse("192.0.2.55"), 32));
    CHECK_FALSE(ip.in_cidr(*Ipv4::parse("192.0.2.54"), 32));
    CHECK(ip.in_cidr(*Ipv4::parse("10.0.0.0"), 0));
}

TEST_CASE("string helpers") {
    CHECK(to_lower("AbC") == "abc");
    CHECK(trim("  x \t") == "x");
    CHECK(trim("") == "");
    CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(split_ws("  a\tb  c ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(icontains("Hello World", "WORLD"));
    CHECK_FALSE(icontains("Hello", "world"));
    CHECK(icontains("abc", ""));
}

TEST_CASE("SplitMix64 is deterministic and platform independent") {
    SplitMix64 a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    // first value of the published sequence for seed 0 is fixed forever
    SplitMix64 zero(0);
    CHECK(zero.next() == 0xe220a8397b1dcdafULL);
    SplitMix64 c(7);
    for (int i = 0; i < 1000; ++i) {
        double d = c.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
}
