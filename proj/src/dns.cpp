#include "spamwall/dns.hpp"

#include <arpa/inet.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spamwall {

const char* dns_type_name(DnsType t) {
    switch (t) {
        case DnsType::A: return "A";
        case DnsType::Ptr: return "PTR";
        case DnsType::Mx: return "MX";
        case DnsType::Txt: return "TXT";
    }
    return "?";
}

std::optional<DnsType> dns_type_from_name(std::string_view name) {
    std::string upper;
    for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (upper == "A") return DnsType::A;
    if (upper == "PTR") return DnsType::Ptr;
    if (upper == "MX") return DnsType::Mx;
    if (upper == "TXT") return DnsType::Txt;
    return std::nullopt;
}

bool DnsQuestion::valid() const {
    if (name.empty() || name.size() > 253) return false;
    for (const auto& label : split(name, '.'))
        if (label.empty() || label.size() > 63) return false;
    return true;
}

std::string reversed_octets(Ipv4 ip) {
    std::string out;
    for (int i = 3; i >= 0; --i) {
        if (!out.empty()) out.push_back('.');
        out += std::to_string(static_cast<unsigned>(ip.octet(i)));
    }
    return out;
}

std::string reverse_name(Ipv4 ip) { return reversed_octets(ip) + ".in-addr.arpa"; }

DnsAnswer& StaticZone::entry(std::string_view name, DnsType rtype) {
    auto key = std::make_pair(to_lower(name), rtype);
    auto& ans = entries_[key];
    ans.status = DnsStatus::Found;
    return ans;
}

void StaticZone::add_a(std::string_view name, Ipv4 ip) { entry(name, DnsType::A).a_records.push_back(ip); }

void StaticZone::add_txt(std::string_view name, std::string_view txt) {
    entry(name, DnsType::Txt).txt_records.emplace_back(txt);
}

void StaticZone::add_ptr(std::string_view name, std::string_view host) {
    entry(name, DnsType::Ptr).ptr_records.push_back(to_lower(host));
}

void StaticZone::add_mx(std::string_view name, uint16_t preference, std::string_view host) {
    entry(name, DnsType::Mx).mx_records.push_back(MxRecord{preference, to_lower(host)});
}

void StaticZone::set_status(std::string_view name, DnsType rtype, DnsStatus status) {
    entries_[std::make_pair(to_lower(name), rtype)].status = status;
}

DnsAnswer StaticZone::resolve(const DnsQuestion& q, std::chrono::milliseconds) {
    auto it = entries_.find(std::make_pair(to_lower(q.name), q.rtype));
    if (it == entries_.end()) return DnsAnswer{};  // NxDomain
    return it->second;
}

std::optional<StaticZone> StaticZone::load_file(const std::string& path, std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open zone file " + path;
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), err);
}

std::optional<StaticZone> StaticZone::parse(std::string_view text, std::string* err) {
    StaticZone zone;
    size_t lineno = 0;
    for (const auto& raw_line : split(text, '\n')) {
        ++lineno;
        std::string line = trim(raw_line);
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_ws(line);
        if (fields.size() < 3) {
            if (err) *err = "zone line " + std::to_string(lineno) + ": expected <name> <rtype> <value>";
            return std::nullopt;
        }
        auto rtype = dns_type_from_name(fields[1]);
        if (!rtype) {
            if (err) *err = "zone line " + std::to_string(lineno) + ": unknown rtype " + fields[1];
            return std::nullopt;
        }
        std::string name = to_lower(fields[0]);
        switch (*rtype) {
            case DnsType::A: {
                auto ip = Ipv4::parse(fields[2]);
                if (!ip) {
                    if (err) *err = "zone line " + std::to_string(lineno) + ": bad A value " + fields[2];
                    return std::nullopt;
                }
                zone.add_a(name, *ip);
                break;
            }
            case DnsType::Ptr:
                zone.add_ptr(name, fields[2]);
                break;
            case DnsType::Mx: {
                if (fields.size() < 4) {
                    if (err) *err = "zone line " + std::to_string(lineno) + ": MX needs <pref> <host>";
                    return std::nullopt;
                }
                int pref = 0;
                auto [p, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), pref);
                if (ec != std::errc{} || p != fields[2].data() + fields[2].size() || pref < 0) {
                    if (err) *err = "zone line " + std::to_string(lineno) + ": bad MX preference";
                    return std::nullopt;
                }
                zone.add_mx(name, static_cast<uint16_t>(pref), fields[3]);
                break;
            }
            case DnsType::Txt: {
                // TXT payload is the remainder of the line, quotes optional.
                size_t pos = line.find(fields[1]);
                pos = line.find_first_not_of(" \t", pos + fields[1].size());
                std::string value = pos == std::string::npos ? "" : line.substr(pos);
                if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                    value = value.substr(1, value.size() - 2);
                zone.add_txt(name, value);
                break;
            }
        }
    }
    return zone;
}

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v & 0xff));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    put_u16(out, static_cast<uint16_t>(v >> 16));
    put_u16(out, static_cast<uint16_t>(v & 0xffff));
}

bool put_name(std::vector<uint8_t>& out, const std::string& name) {
    for (const auto& label : split(name, '.')) {
        if (label.empty() || label.size() > 63) return false;
        out.push_back(static_cast<uint8_t>(label.size()));
        out.insert(out.end(), label.begin(), label.end());
    }
    out.push_back(0);
    return true;
}

std::optional<uint16_t> get_u16(std::span<const uint8_t> p, size_t& off) {
    if (off + 2 > p.size()) return std::nullopt;
    uint16_t v = static_cast<uint16_t>((p[off] << 8) | p[off + 1]);
    off += 2;
    return v;
}

// Decodes a possibly compressed name starting at off; advances off past it.
std::optional<std::string> get_name(std::span<const uint8_t> p, size_t& off) {
    std::string name;
    size_t pos = off;
    bool jumped = false;
    int hops = 0;
    while (true) {
        if (pos >= p.size() || ++hops > 128) return std::nullopt;
        uint8_t len = p[pos];
        if ((len & 0xc0) == 0xc0) {
            if (pos + 1 >= p.size()) return std::nullopt;
            size_t target = static_cast<size_t>((len & 0x3f) << 8 | p[pos + 1]);
            if (!jumped) off = pos + 2;
            jumped = true;
            if (target >= p.size()) return std::nullopt;
            pos = target;
            continue;
        }
        if (len > 63) return std::nullopt;
        if (len == 0) {
            if (!jumped) off = pos + 1;
            return name;
        }
        if (pos + 1 + len > p.size()) return std::nullopt;
        if (!name.empty()) name.push_back('.');
        name.append(reinterpret_cast<const char*>(p.data() + pos + 1), len);
        pos += 1 + len;
    }
}

constexpr uint16_t kClassIn = 1;
constexpr uint16_t kFlagQr = 0x8000;
constexpr uint16_t kFlagTc = 0x0200;
constexpr uint16_t kFlagRd = 0x0100;

}  // namespace

std::vector<uint8_t> encode_query(uint16_t id, const DnsQuestion& q) {
    std::vector<uint8_t> out;
    put_u16(out, id);
    put_u16(out, kFlagRd);
    put_u16(out, 1);  // QDCOUNT
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, 0);
    if (!put_name(out, q.name)) return {};
    put_u16(out, static_cast<uint16_t>(q.rtype));
    put_u16(out, kClassIn);
    return out;
}

std::optional<DecodedQuery> decode_query(std::span<const uint8_t> p) {
    size_t off = 0;
    auto id = get_u16(p, off);
    auto flags = get_u16(p, off);
    auto qd = get_u16(p, off);
    off += 6;  // an/ns/ar counts
    if (!id || !flags || !qd || *qd != 1 || off > p.size()) return std::nullopt;
    auto name = get_name(p, off);
    auto qtype = get_u16(p, off);
    auto qclass = get_u16(p, off);
    if (!name || !qtype || !qclass || *qclass != kClassIn) return std::nullopt;
    DecodedQuery out;
    out.id = *id;
    out.question.name = to_lower(*name);
    out.question.rtype = static_cast<DnsType>(*qtype);
    return out;
}

std::vector<uint8_t> encode_response(uint16_t id, const DnsQuestion& q, const DnsAnswer& answer) {
    std::vector<uint8_t> out;
    uint16_t rcode = 0;
    if (answer.status == DnsStatus::NxDomain) rcode = 3;
    if (answer.status == DnsStatus::ServFail) rcode = 2;
    uint16_t ancount = 0;
    if (answer.status == DnsStatus::Found) {
        switch (q.rtype) {
            case DnsType::A: ancount = static_cast<uint16_t>(answer.a_records.size()); break;
            case DnsType::Txt: ancount = static_cast<uint16_t>(answer.txt_records.size()); break;
            case DnsType::Ptr: ancount = static_cast<uint16_t>(answer.ptr_records.size()); break;
            case DnsType::Mx: ancount = static_cast<uint16_t>(answer.mx_records.size()); break;
        }
    }
    put_u16(out, id);
    put_u16(out, static_cast<uint16_t>(kFlagQr | kFlagRd | rcode));
    put_u16(out, 1);
    put_u16(out, ancount);
    put_u16(out, 0);
    put_u16(out, 0);
    put_name(out, q.name);
    put_u16(out, static_cast<uint16_t>(q.rtype));
    put_u16(out, kClassIn);

    auto rr_header = [&] {
        put_name(out, q.name);
        put_u16(out, static_cast<uint16_t>(q.rtype));
        put_u16(out, kClassIn);
        put_u32(out, 300);  // TTL
    };
    if (answer.status != DnsStatus::Found) return out;
    switch (q.rtype) {
        case DnsType::A:
            for (Ipv4 ip : answer.a_records) {
                rr_header();
                put_u16(out, 4);
                for (int i = 0; i < 4; ++i) out.push_back(ip.octet(i));
            }
            break;
        case DnsType::Txt:
            for (const auto& txt : answer.txt_records) {
                rr_header();
                std::vector<uint8_t> rdata;
                size_t i = 0;
                do {
                    size_t n = std::min<size_t>(255, txt.size() - i);
                    rdata.push_back(static_cast<uint8_t>(n));
                    rdata.insert(rdata.end(), txt.begin() + static_cast<long>(i),
                                 txt.begin() + static_cast<long>(i + n));
                    i += n;
                } while (i < txt.size());
                put_u16(out, static_cast<uint16_t>(rdata.size()));
                out.insert(out.end(), rdata.begin(), rdata.end());
            }
            break;
        case DnsType::Ptr:
            for (const auto& host : answer.ptr_records) {
                rr_header();
                std::vector<uint8_t> name_bytes;
                put_name(name_bytes, host);
                put_u16(out, static_cast<uint16_t>(name_bytes.size()));
                out.insert(out.end(), name_bytes.begin(), name_bytes.end());
            }
            break;
        case DnsType::Mx:
            for (const auto& mx : answer.mx_records) {
                rr_header();
                std::vector<uint8_t> name_bytes;
                put_name(name_bytes, mx.host);
                put_u16(out, static_cast<uint16_t>(name_bytes.size() + 2));
                put_u16(out, mx.preference);
                out.insert(out.end(), name_bytes.begin(), name_bytes.end());
            }
            break;
    }
    return out;
}

DnsAnswer decode_response(std::span<const uint8_t> p, uint16_t expect_id, DnsType qtype) {
    DnsAnswer servfail;
    servfail.status = DnsStatus::ServFail;

    size_t off = 0;
    auto id = get_u16(p, off);
    auto flags = get_u16(p, off);
    auto qd = get_u16(p, off);
    auto an = get_u16(p, off);
    off += 4;  // ns/ar counts
    if (!id || !flags || !qd || !an || off > p.size()) return servfail;
    if (*id != expect_id || !(*flags & kFlagQr)) return servfail;
    if (*flags & kFlagTc) return servfail;  // no TCP fallback, treat truncation as failure
    uint16_t rcode = *flags & 0x000f;
    if (rcode == 3) return DnsAnswer{};  // NxDomain
    if (rcode != 0) return servfail;

    for (uint16_t i = 0; i < *qd; ++i) {
        if (!get_name(p, off)) return servfail;
        off += 4;
        if (off > p.size()) return servfail;
    }

    DnsAnswer answer;
    for (uint16_t i = 0; i < *an; ++i) {
        if (!get_name(p, off)) return servfail;
        auto type = get_u16(p, off);
        auto klass = get_u16(p, off);
        off += 4;  // TTL
        auto rdlen = get_u16(p, off);
        if (!type || !klass || !rdlen || off + *rdlen > p.size()) return servfail;
        size_t rdata_end = off + *rdlen;
        if (*klass == kClassIn && *type == static_cast<uint16_t>(qtype)) {
            switch (qtype) {
                case DnsType::A: {
                    if (*rdlen != 4) return servfail;
                    uint32_t v = 0;
                    for (int b = 0; b < 4; ++b) v = (v << 8) | p[off + b];
                    answer.a_records.push_back(Ipv4{v});
                    break;
                }
                case DnsType::Txt: {
                    std::string txt;
                    size_t pos = off;
                    while (pos < rdata_end) {
                        uint8_t n = p[pos++];
                        if (pos + n > rdata_end) return servfail;
                        txt.append(reinterpret_cast<const char*>(p.data() + pos), n);
                        pos += n;
                    }
                    answer.txt_records.push_back(std::move(txt));
                    break;
                }
                case DnsType::Ptr: {
                    size_t pos = off;
                    auto host = get_name(p, pos);
                    if (!host) return servfail;
                    answer.ptr_records.push_back(to_lower(*host));
                    break;
                }
                case DnsType::Mx: {
                    size_t pos = off;
                    auto pref = get_u16(p, pos);
                    auto host = get_name(p, pos);
                    if (!pref || !host) return servfail;
                    answer.mx_records.push_back(MxRecord{*pref, to_lower(*host)});
                    break;
                }
            }
        }
        off = rdata_end;
    }
    bool have = !answer.a_records.empty() || !answer.txt_records.empty() ||
                !answer.ptr_records.empty() || !answer.mx_records.empty();
    answer.status = have ? DnsStatus::Found : DnsStatus::NxDomain;
    return answer;
}

UdpResolver::UdpResolver(std::string server_ip, uint16_t port, int retries)
    : server_ip_(std::move(server_ip)), port_(port), retries_(retries) {}

DnsAnswer UdpResolver::resolve(const DnsQuestion& q, std::chrono::milliseconds timeout) {
    DnsAnswer timed_out;
    timed_out.status = DnsStatus::Timeout;
    DnsAnswer servfail;
    servfail.status = DnsStatus::ServFail;

    if (!q.valid()) return servfail;

    static std::atomic<uint16_t> next_id{0x5350};
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        uint16_t id = next_id.fetch_add(1);
        auto packet = encode_query(id, q);
        if (packet.empty()) return servfail;

        int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd < 0) return servfail;

        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port_);
        if (inet_pton(AF_INET, server_ip_.c_str(), &addr.sin_addr) != 1) {
            ::close(fd);
            return servfail;
        }
        if (::sendto(fd, packet.data(), packet.size(), 0,
                     reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
            ::close(fd);
            continue;
        }

        pollfd pfd{fd, POLLIN, 0};
        int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        if (rc <= 0) {
            ::close(fd);
            continue;  // timeout or poll error: retry
        }
        uint8_t buf[2048];
        ssize_t n = ::recvfrom(fd, buf, sizeof(buf), 0, nullptr, nullptr);
        ::close(fd);
        if (n <= 0) continue;
        return decode_response(std::span<const uint8_t>(buf, static_cast<size_t>(n)), id, q.rtype);
    }
    return timed_out;
}

}  // namespace spamwall
