#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spamwall/dns.hpp"
#include "spamwall/message.hpp"

namespace spamwall {

enum class BlocklistKind { IpList, DomainList };

struct BlocklistConfig {
    std::string name;
    std::string zone;  // DNS suffix queried under
    BlocklistKind kind = BlocklistKind::IpList;
    int weight = 1;
    bool enabled = true;
};

enum class ListStatus { Listed, NotListed, Unavailable };

/// Weighted vote across blocklists. Unavailable lists contribute nothing, so
/// an outage can never flip a message to blocked.
struct ListVerdict {
    bool listed = false;
    std::map<std::string, ListStatus> per_list;
    int score = 0;
};

ListVerdict dnsbl_check(Ipv4 ip, std::span<const BlocklistConfig> lists, Resolver& resolver,
                        int threshold);

/// URL-host lookups against domain blocklists. Hosts are reduced to their
/// registered domain; IP-literal hosts are queried with reversed octets.
/// At most max_domains distinct keys are queried per message.
ListVerdict surbl_check(const Message& msg, std::span<const BlocklistConfig> lists,
                        Resolver& resolver, int threshold, int max_domains = 10,
                        uint64_t* dropped_domains = nullptr);

enum class SpfQualifier { Pass, Fail, SoftFail, Neutral };
enum class SpfMechanismKind { Ip4, A, Mx, Include, All };

struct SpfMechanism {
    SpfQualifier qualifier = SpfQualifier::Pass;
    SpfMechanismKind kind = SpfMechanismKind::All;
    std::string argument;

    bool operator==(const SpfMechanism&) const = default;
};

struct SpfRecord {
    std::vector<SpfMechanism> mechanisms;
};

enum class SpfResult { Pass, Fail, SoftFail, Neutral, None, TempError, PermError };

const char* spf_result_name(SpfResult r);

/// Mechanism subset: ip4 (optional /prefix), a, mx, include:<domain>, all.
/// Anything outside the subset, a malformed CIDR, or a second "all" is a
/// permanent error (nullopt).
std::optional<SpfRecord> spf_parse(std::string_view txt);

SpfResult spf_evaluate(Ipv4 client_ip, const std::string& mail_from_domain, Resolver& resolver,
                       int max_dns = 10);

enum class RdnsResult { Ok, NoPtr, HeloMismatch, Unavailable };

RdnsResult rdns_check(Ipv4 client_ip, const std::string& helo_host, Resolver& resolver);

}  // namespace spamwall
