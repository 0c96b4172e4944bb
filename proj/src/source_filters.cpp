#include "spamwall/source_filters.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace spamwall {

namespace {

bool is_blocklist_hit(const DnsAnswer& answer) {
    if (answer.status != DnsStatus::Found) return false;
    // Listing convention: any A record inside 127.0.0.0/8.
    for (Ipv4 ip : answer.a_records)
        if (ip.octet(0) == 127) return true;
    return false;
}

ListVerdict finish_verdict(ListVerdict v, std::span<const BlocklistConfig> lists, int threshold) {
    v.score = 0;
    for (const auto& list : lists) {
        auto it = v.per_list.find(list.name);
        if (it != v.per_list.end() && it->second == ListStatus::Listed) v.score += list.weight;
    }
    v.listed = v.score >= threshold;
    return v;
}

}  // namespace

ListVerdict dnsbl_check(Ipv4 ip, std::span<const BlocklistConfig> lists, Resolver& resolver,
                        int threshold) {
    ListVerdict verdict;
    std::string rev = reversed_octets(ip);
    for (const auto& list : lists) {
        if (!list.enabled || list.kind != BlocklistKind::IpList) continue;
        DnsAnswer answer = resolver.resolve({rev + "." + list.zone, DnsType::A});
        if (is_blocklist_hit(answer))
            verdict.per_list[list.name] = ListStatus::Listed;
        else if (answer.status == DnsStatus::Timeout || answer.status == DnsStatus::ServFail)
            verdict.per_list[list.name] = ListStatus::Unavailable;
        else
            verdict.per_list[list.name] = ListStatus::NotListed;
    }
    return finish_verdict(std::move(verdict), lists, threshold);
}

ListVerdict surbl_check(const Message& msg, std::span<const BlocklistConfig> lists,
                        Resolver& resolver, int threshold, int max_domains,
                        uint64_t* dropped_domains) {
    ListVerdict verdict;
    auto hosts = extract_urls(msg.body_text);
    if (hosts.empty()) return verdict;  // no URLs: nothing to vote on

    std::vector<std::string> keys;
    std::set<std::string> seen;
    for (const auto& h : hosts) {
        std::string key = h.is_ip_literal ? reversed_octets(*Ipv4::parse(h.host))
                                          : registered_domain(h.host);
        if (!seen.insert(key).second) continue;
        if (static_cast<int>(keys.size()) >= max_domains) {
            if (dropped_domains) ++*dropped_domains;
            continue;
        }
        keys.push_back(std::move(key));
    }

    for (const auto& list : lists) {
        if (!list.enabled || list.kind != BlocklistKind::DomainList) continue;
        ListStatus status = ListStatus::NotListed;
        for (const auto& key : keys) {
            DnsAnswer answer = resolver.resolve({key + "." + list.zone, DnsType::A});
            if (is_blocklist_hit(answer)) {
                status = ListStatus::Listed;
                break;
            }
            if (answer.status == DnsStatus::Timeout || answer.status == DnsStatus::ServFail)
                status = ListStatus::Unavailable;
        }
        verdict.per_list[list.name] = status;
    }
    return finish_verdict(std::move(verdict), lists, threshold);
}

const char* spf_result_name(SpfResult r) {
    switch (r) {
        case SpfResult::Pass: return "pass";
        case SpfResult::Fail: return "fail";
        case SpfResult::SoftFail: return "softfail";
        case SpfResult::Neutral: return "neutral";
        case SpfResult::None: return "none";
        case SpfResult::TempError: return "temperror";
        case SpfResult::PermError: return "permerror";
    }
    return "?";
}

namespace {

bool valid_cidr(std::string_view arg) {
    size_t slash = arg.find('/');
    std::string_view net = arg.substr(0, slash == std::string_view::npos ? arg.size() : slash);
    if (!Ipv4::parse(net)) return false;
    if (slash == std::string_view::npos) return true;
    std::string_view prefix = arg.substr(slash + 1);
    int v = -1;
    auto [p, ec] = std::from_chars(prefix.data(), prefix.data() + prefix.size(), v);
    return ec == std::errc{} && p == prefix.data() + prefix.size() && v >= 0 && v <= 32;
}

bool cidr_match(Ipv4 ip, std::string_view arg) {
    size_t slash = arg.find('/');
    int prefix = 32;
    std::string_view net = arg;
    if (slash != std::string_view::npos) {
        net = arg.substr(0, slash);
        std::string_view p = arg.substr(slash + 1);
        std::from_chars(p.data(), p.data() + p.size(), prefix);
    }
    auto network = Ipv4::parse(net);
    return network && ip.in_cidr(*network, prefix);
}

}  // namespace

std::optional<SpfRecord> spf_parse(std::string_view txt) {
    auto tokens = split_ws(txt);
    if (tokens.empty() || to_lower(tokens[0]) != "v=spf1") return std::nullopt;

    SpfRecord record;
    bool saw_all = false;
    for (size_t i = 1; i < tokens.size(); ++i) {
        std::string token = to_lower(tokens[i]);
        SpfMechanism mech;
        mech.qualifier = SpfQualifier::Pass;
        if (!token.empty()) {
            switch (token[0]) {
                case '+': mech.qualifier = SpfQualifier::Pass; token.erase(0, 1); break;
                case '-': mech.qualifier = SpfQualifier::Fail; token.erase(0, 1); break;
                case '~': mech.qualifier = SpfQualifier::SoftFail; token.erase(0, 1); break;
                case '?': mech.qualifier = SpfQualifier::Neutral; token.erase(0, 1); break;
                default: break;
            }
        }
        if (token == "all") {
            if (saw_all) return std::nullopt;  // at most one all
            saw_all = true;
            mech.kind = SpfMechanismKind::All;
        } else if (token.rfind("ip4:", 0) == 0) {
            mech.kind = SpfMechanismKind::Ip4;
            mech.argument = token.substr(4);
            if (!valid_cidr(mech.argument)) return std::nullopt;
        } else if (token.rfind("include:", 0) == 0) {
            mech.kind = SpfMechanismKind::Include;
            mech.argument = token.substr(8);
            if (mech.argument.empty()) return std::nullopt;
        } else if (token == "a") {
            mech.kind = SpfMechanismKind::A;
        } else if (token == "mx") {
            mech.kind = SpfMechanismKind::Mx;
        } else {
            return std::nullopt;  // outside the supported subset
        }
        record.mechanisms.push_back(std::move(mech));
    }
    return record;
}

namespace {

SpfResult qualifier_result(SpfQualifier q) {
    switch (q) {
        case SpfQualifier::Pass: return SpfResult::Pass;
        case SpfQualifier::Fail: return SpfResult::Fail;
        case SpfQualifier::SoftFail: return SpfResult::SoftFail;
        case SpfQualifier::Neutral: return SpfResult::Neutral;
    }
    return SpfResult::Neutral;
}

struct SpfEval {
    Resolver& resolver;
    int max_dns;
    int lookups = 0;

    // Counts one mechanism-triggered lookup; false once the budget is spent.
    bool charge() { return ++lookups <= max_dns; }

    std::optional<SpfResult> error = std::nullopt;  // sticky TempError/PermError
    void set_error(SpfResult r) { if (!error) error = r; }

    DnsAnswer query(const std::string& name, DnsType type) {
        DnsAnswer a = resolver.resolve({name, type});
        if (a.status == DnsStatus::Timeout || a.status == DnsStatus::ServFail)
            set_error(SpfResult::TempError);
        return a;
    }

    bool ip_matches_a(Ipv4 ip, const std::string& domain) {
        if (!charge()) {
            set_error(SpfResult::PermError);
            return false;
        }
        DnsAnswer a = query(domain, DnsType::A);
        if (error) return false;
        return std::find(a.a_records.begin(), a.a_records.end(), ip) != a.a_records.end();
    }

    bool ip_matches_mx(Ipv4 ip, const std::string& domain) {
        if (!charge()) {
            set_error(SpfResult::PermError);
            return false;
        }
        DnsAnswer mx = query(domain, DnsType::Mx);
        if (error) return false;
        for (const auto& record : mx.mx_records) {
            if (ip_matches_a(ip, record.host)) return true;
            if (error) return false;
        }
        return false;
    }

    SpfResult evaluate(Ipv4 ip, const std::string& domain) {
        if (!charge()) return SpfResult::PermError;
        DnsAnswer txt = query(domain, DnsType::Txt);
        if (error) return *error;
        const std::string* spf_txt = nullptr;
        for (const auto& record : txt.txt_records) {
            if (to_lower(record).rfind("v=spf1", 0) == 0) {
                spf_txt = &record;
                break;
            }
        }
        if (!spf_txt) return SpfResult::None;
        auto record = spf_parse(*spf_txt);
        if (!record) return SpfResult::PermError;
        return evaluate_record(*record, ip, domain);
    }

    SpfResult evaluate_record(const SpfRecord& record, Ipv4 ip, const std::string& domain) {
        for (const auto& mech : record.mechanisms) {
            bool matched = false;
            switch (mech.kind) {
                case SpfMechanismKind::Ip4:
                    matched = cidr_match(ip, mech.argument);
                    break;
                case SpfMechanismKind::A:
                    matched = ip_matches_a(ip, domain);
                    break;
                case SpfMechanismKind::Mx:
                    matched = ip_matches_mx(ip, domain);
                    break;
                case SpfMechanismKind::Include: {
                    SpfResult inner = evaluate(ip, mech.argument);
                    if (inner == SpfResult::TempError || inner == SpfResult::PermError)
                        return inner;
                    matched = inner == SpfResult::Pass;
                    break;
                }
                case SpfMechanismKind::All:
                    matched = true;
                    break;
            }
            if (error) return *error;
            if (matched) return qualifier_result(mech.qualifier);
        }
        return SpfResult::Neutral;
    }
};

}  // namespace

SpfResult spf_evaluate(Ipv4 client_ip, const std::string& mail_from_domain, Resolver& resolver,
                       int max_dns) {
    if (mail_from_domain.empty()) return SpfResult::None;
    SpfEval eval{.resolver = resolver, .max_dns = max_dns};
    // The initial TXT fetch is free; only mechanism-triggered lookups count.
    eval.lookups = -1;
    SpfResult result = eval.evaluate(client_ip, to_lower(mail_from_domain));
    if (eval.error) return *eval.error;
    return result;
}

RdnsResult rdns_check(Ipv4 client_ip, const std::string& helo_host, Resolver& resolver) {
    DnsAnswer answer = resolver.resolve({reverse_name(client_ip), DnsType::Ptr});
    if (answer.status == DnsStatus::Timeout || answer.status == DnsStatus::ServFail)
        return RdnsResult::Unavailable;
    if (answer.status != DnsStatus::Found || answer.ptr_records.empty()) return RdnsResult::NoPtr;
    std::string helo = to_lower(helo_host);
    std::string helo_domain = registered_domain(helo);
    for (const auto& ptr : answer.ptr_records) {
        std::string name = to_lower(ptr);
        if (name == helo || registered_domain(name) == helo_domain) return RdnsResult::Ok;
    }
    return RdnsResult::HeloMismatch;
}

}  // namespace spamwall
