#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spamwall/util.hpp"

namespace spamwall {

enum class DnsType : uint16_t { A = 1, Ptr = 12, Mx = 15, Txt = 16 };
enum class DnsStatus { Found, NxDomain, Timeout, ServFail };

const char* dns_type_name(DnsType t);
std::optional<DnsType> dns_type_from_name(std::string_view name);

struct DnsQuestion {
    std::string name;  // dot-separated labels, lowercase
    DnsType rtype = DnsType::A;

    /// Labels 1-63 bytes each, total name at most 253 bytes.
    bool valid() const;
};

struct MxRecord {
    uint16_t preference = 0;
    std::string host;

    bool operator==(const MxRecord&) const = default;
};

struct DnsAnswer {
    DnsStatus status = DnsStatus::NxDomain;
    std::vector<Ipv4> a_records;
    std::vector<std::string> txt_records;
    std::vector<std::string> ptr_records;
    std::vector<MxRecord> mx_records;
};

/// PTR name for an IPv4 address: octets reversed, ".in-addr.arpa" appended.
std::string reverse_name(Ipv4 ip);
/// Just the reversed octets ("4.3.2.1" for 1.2.3.4), as prepended to blocklist zones.
std::string reversed_octets(Ipv4 ip);

class Resolver {
public:
    virtual ~Resolver() = default;
    virtual DnsAnswer resolve(const DnsQuestion& q, std::chrono::milliseconds timeout) = 0;

    DnsAnswer resolve(const DnsQuestion& q) { return resolve(q, default_timeout_); }
    void set_default_timeout(std::chrono::milliseconds t) { default_timeout_ = t; }

private:
    std::chrono::milliseconds default_timeout_{2000};
};

/// Deterministic in-memory zone; lookups of absent keys return NxDomain.
/// Immutable once handed to the pipeline, so shareable across workers.
class StaticZone : public Resolver {
public:
    using Resolver::resolve;

    void add_a(std::string_view name, Ipv4 ip);
    void add_txt(std::string_view name, std::string_view txt);
    void add_ptr(std::string_view name, std::string_view host);
    void add_mx(std::string_view name, uint16_t preference, std::string_view host);
    /// Forces a status (Timeout/ServFail) for one (name, rtype) key; test fixtures use this.
    void set_status(std::string_view name, DnsType rtype, DnsStatus status);

    DnsAnswer resolve(const DnsQuestion& q, std::chrono::milliseconds timeout) override;

    /// Zone file lines: "<name> <rtype> <value>", "#" comments.
    /// TXT values may contain spaces and optional surrounding quotes.
    static std::optional<StaticZone> load_file(const std::string& path, std::string* err = nullptr);
    static std::optional<StaticZone> parse(std::string_view text, std::string* err = nullptr);

    size_t entry_count() const { return entries_.size(); }

private:
    DnsAnswer& entry(std::string_view name, DnsType rtype);
    std::map<std::pair<std::string, DnsType>, DnsAnswer> entries_;
};

// Wire codec (RFC 1035 subset: query/response, A/TXT/PTR/MX, name compression
// on decode). Encoded queries always set RD.
std::vector<uint8_t> encode_query(uint16_t id, const DnsQuestion& q);
struct DecodedQuery {
    uint16_t id = 0;
    DnsQuestion question;
};
std::optional<DecodedQuery> decode_query(std::span<const uint8_t> packet);
std::vector<uint8_t> encode_response(uint16_t id, const DnsQuestion& q, const DnsAnswer& answer);
/// Truncated responses and unexpected rcodes map to ServFail; rcode 3 to NxDomain.
DnsAnswer decode_response(std::span<const uint8_t> packet, uint16_t expect_id, DnsType qtype);

/// Minimal UDP query client: one datagram, poll with deadline, configurable retries.
class UdpResolver : public Resolver {
public:
    using Resolver::resolve;

    UdpResolver(std::string server_ip, uint16_t port, int retries = 1);

    DnsAnswer resolve(const DnsQuestion& q, std::chrono::milliseconds timeout) override;

private:
    std::string server_ip_;
    uint16_t port_;
    int retries_;
};

}  // namespace spamwall
