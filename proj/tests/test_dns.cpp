#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "spamwall/dns.hpp"
#include "spamwall/util.hpp"
#include "testutil.hpp"

using namespace spamwall;
using namespace spamwall::testutil;

TEST_CASE("reverse_name encodes reversed octets") {
    CHECK(reverse_name(*Ipv4::parse("192.0.2.1")) == "1.2.0.192.in-addr.arpa");
    CHECK(reverse_name(*Ipv4::parse("1.2.3.4")) == "4.3.2.1.in-addr.arpa");
    CHECK(reverse_name(*Ipv4::parse("127.0.0.1")) == "1.0.0.127.in-addr.arpa");
    CHECK(reversed_octets(*Ipv4::parse("192.0.2.10")) == "10.2.0.192");
}

TEST_CASE("octet reversal is an involution") {
    SplitMix64 rng(11);
    for (int i = 0; i < 500; ++i) {
        Ipv4 ip{static_cast<uint32_t>(rng.next())};
        auto rev = Ipv4::parse(reversed_octets(ip));
        REQUIRE(rev);
        CHECK(*Ipv4::parse(reversed_octets(*rev)) == ip);
    }
}

TEST_CASE("StaticZone lookups are pure and default to NxDomain") {
    StaticZone zone;
    zone.add_a("bad.example", *Ipv4::parse("127.0.0.2"));
    auto hit = zone.resolve({"bad.example", DnsType::A});
    CHECK(hit.status == DnsStatus::Found);
    REQUIRE(hit.a_records.size() == 1);
    CHECK(hit.a_records[0] == *Ipv4::parse("127.0.0.2"));

    CHECK(zone.resolve({"x.example", DnsType::A}).status == DnsStatus::NxDomain);
    CHECK(zone.resolve({"bad.example", DnsType::Txt}).status == DnsStatus::NxDomain);

    // identical queries, identical answers
    for (int i = 0; i < 10; ++i) {
        auto again = zone.resolve({"bad.example", DnsType::A});
        CHECK(again.status == hit.status);
        CHECK(again.a_records == hit.a_records);
    }
}

TEST_CASE("zone file parsing") {
    std::string err;
    auto zone = StaticZone::parse(
        "# comment\n"
        "2.10.2.0.192.bl.example A 127.0.0.2\n"
        "corp.example TXT \"v=spf1 ip4:192.0.2.0/24 -all\"\n"
        "corp.example MX 10 mx1.corp.example\n"
        "1.2.0.192.in-addr.arpa PTR mail.corp.example\n",
        &err);
    REQUIRE(zone);
    CHECK(zone->entry_count() == 4);
    CHECK(zone->resolve({"2.10.2.0.192.bl.example", DnsType::A}).status == DnsStatus::Found);
    CHECK(zone->resolve({"corp.example", DnsType::Txt}).txt_records[0] ==
          "v=spf1 ip4:192.0.2.0/24 -all");
    CHECK(zone->resolve({"corp.example", DnsType::Mx}).mx_records[0] ==
          MxRecord{10, "mx1.corp.example"});
    CHECK(zone->resolve({"1.2.0.192.in-addr.arpa", DnsType::Ptr}).ptr_records[0] ==
          "mail.corp.example");

    CHECK_FALSE(StaticZone::parse("name A", &err));
    CHECK_FALSE(StaticZone::parse("name BOGUS value", &err));
    CHECK_FALSE(StaticZone::parse("name A not-an-ip", &err));
    CHECK_FALSE(StaticZone::parse("name MX ten host", &err));
}

TEST_CASE("DnsQuestion validity bounds") {
    CHECK(DnsQuestion{"a.example", DnsType::A}.valid());
    CHECK_FALSE(DnsQuestion{"", DnsType::A}.valid());
    CHECK_FALSE(DnsQuestion{"a..example", DnsType::A}.valid());
    CHECK_FALSE(DnsQuestion{std::string(64, 'x') + ".example", DnsType::A}.valid());
    CHECK_FALSE(DnsQuestion{std::string(260, 'x'), DnsType::A}.valid());
}

TEST_CASE("wire codec: query round trip is bit exact") {
    SplitMix64 rng(23);
    const DnsType types[] = {DnsType::A, DnsType::Txt, DnsType::Ptr, DnsType::Mx};
    for (int i = 0; i < 250; ++i) {
        std::string name;
        int labels = 1 + static_cast<int>(rng.next_below(4));
        for (int l = 0; l < labels; ++l) {
            if (l) name += '.';
            int len = 1 + static_cast<int>(rng.next_below(12));
            for (int c = 0; c < len; ++c)
                name += static_cast<char>('a' + rng.next_below(26));
        }
        DnsQuestion q{name, types[rng.next_below(4)]};
        uint16_t id = static_cast<uint16_t>(rng.next_below(65536));
        auto packet = encode_query(id, q);
        REQUIRE_FALSE(packet.empty());
        auto decoded = decode_query(packet);
        REQUIRE(decoded);
        CHECK(decoded->id == id);
        CHECK(decoded->question.name == q.name);
        CHECK(decoded->question.rtype == q.rtype);
        // encoding the decoded question reproduces the packet bit-exactly
        CHECK(encode_query(decoded->id, decoded->question) == packet);
    }
}

TEST_CASE("wire codec: response encode/decode across record types") {
    DnsQuestion q{"mail.corp.example", DnsType::A};
    DnsAnswer answer;
    answer.status = DnsStatus::Found;
    answer.a_records = {*Ipv4::parse("192.0.2.1"), *Ipv4::parse("192.0.2.2")};
    auto decoded = decode_response(encode_response(77, q, answer), 77, DnsType::A);
    CHECK(decoded.status == DnsStatus::Found);
    CHECK(decoded.a_records == answer.a_records);

    DnsQuestion qt{"corp.example", DnsType::Txt};
    DnsAnswer txt;
    txt.status = DnsStatus::Found;
    txt.txt_records = {"v=spf1 -all", std::string(300, 'x')};  // forces 2-chunk encoding
    decoded = decode_response(encode_response(5, qt, txt), 5, DnsType::Txt);
    CHECK(decoded.txt_records == txt.txt_records);

    DnsQuestion qm{"corp.example", DnsType::Mx};
    DnsAnswer mx;
    mx.status = DnsStatus::Found;
    mx.mx_records = {{10, "mx1.corp.example"}, {20, "mx2.corp.example"}};
    decoded = decode_response(encode_response(6, qm, mx), 6, DnsType::Mx);
    CHECK(decoded.mx_records == mx.mx_records);

    DnsAnswer nx;
    nx.status = DnsStatus::NxDomain;
    CHECK(decode_response(encode_response(8, q, nx), 8, DnsType::A).status ==
          DnsStatus::NxDomain);

    // id mismatch and truncation both surface as ServFail
    CHECK(decode_response(encode_response(9, q, answer), 10, DnsType::A).status ==
          DnsStatus::ServFail);
    auto packet = encode_response(11, q, answer);
    packet[2] |= 0x02;  // set TC
    CHECK(decode_response(packet, 11, DnsType::A).status == DnsStatus::ServFail);
}

TEST_CASE("hand-built PTR response decodes to the fixture host") {
    // Manually assembled wire bytes for: answer to "2.0.192.in-addr.arpa PTR"
    // with one record "mail.corp.example", using a compression pointer for the
    // owner name. Kept as a frozen oracle for the decoder.
    std::vector<uint8_t> p = {
        0x12, 0x34,              // id
        0x81, 0x80,              // QR|RD|RA, rcode 0
        0x00, 0x01, 0x00, 0x01,  // qd=1 an=1
        0x00, 0x00, 0x00, 0x00,  // ns=0 ar=0
        // question: 2.0.192.in-addr.arpa PTR IN
        0x01, '2', 0x01, '0', 0x03, '1', '9', '2', 0x07, 'i', 'n', '-', 'a', 'd', 'd', 'r',
        0x04, 'a', 'r', 'p', 'a', 0x00, 0x00, 0x0c, 0x00, 0x01,
        // answer: name = pointer to offset 12, PTR IN ttl=300 rdlen=19
        0xc0, 0x0c, 0x00, 0x0c, 0x00, 0x01, 0x00, 0x00, 0x01, 0x2c, 0x00, 0x13,
        0x04, 'm', 'a', 'i', 'l', 0x04, 'c', 'o', 'r', 'p', 0x07, 'e', 'x', 'a', 'm', 'p',
        'l', 'e', 0x00};
    auto decoded = decode_response(p, 0x1234, DnsType::Ptr);
    REQUIRE(decoded.status == DnsStatus::Found);
    REQUIRE(decoded.ptr_records.size() == 1);
    CHECK(decoded.ptr_records[0] == "mail.corp.example");
}

namespace {

// One-shot UDP responder that serves a StaticZone on a loopback ephemeral port.
struct UdpFixtureServer {
    StaticZone& zone;
    int fd = -1;
    uint16_t port = 0;
    std::thread thread;
    std::atomic<bool> running{false};
    bool drop_queries = false;  // timeout path

    explicit UdpFixtureServer(StaticZone& z) : zone(z) {}

    bool start() {
        fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd < 0) return false;
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) return false;
        socklen_t len = sizeof(addr);
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
        port = ntohs(addr.sin_port);
        running = true;
        thread = std::thread([this] { loop(); });
        return true;
    }

    void loop() {
        while (running) {
            uint8_t buf[1024];
            sockaddr_in peer{};
            socklen_t len = sizeof(peer);
            ssize_t n = ::recvfrom(fd, buf, sizeof(buf), 0,
                                   reinterpret_cast<sockaddr*>(&peer), &len);
            if (n <= 0) break;
            if (drop_queries) continue;
            auto q = decode_query(std::span<const uint8_t>(buf, static_cast<size_t>(n)));
            if (!q) continue;
            auto answer = zone.resolve(q->question);
            auto packet = encode_response(q->id, q->question, answer);
            ::sendto(fd, packet.data(), packet.size(), 0,
                     reinterpret_cast<sockaddr*>(&peer), len);
        }
    }

    void stop() {
        running = false;
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
        if (thread.joinable()) thread.join();
    }
    ~UdpFixtureServer() { stop(); }
};

}  // namespace

TEST_CASE("UdpResolver against a loopback fixture server") {
    StaticZone zone;
    zone.add_ptr("2.0.192.in-addr.arpa", "mail.corp.example");
    zone.add_a("bad.example", *Ipv4::parse("127.0.0.2"));
    zone.set_status("down.example", DnsType::A, DnsStatus::ServFail);

    UdpFixtureServer server(zone);
    REQUIRE(server.start());
    UdpResolver resolver("127.0.0.1", server.port, 1);

    auto ptr = resolver.resolve({"2.0.192.in-addr.arpa", DnsType::Ptr},
                                std::chrono::milliseconds(2000));
    REQUIRE(ptr.status == DnsStatus::Found);
    CHECK(ptr.ptr_records == std::vector<std::string>{"mail.corp.example"});

    auto a = resolver.resolve({"bad.example", DnsType::A}, std::chrono::milliseconds(2000));
    CHECK(a.status == DnsStatus::Found);

    CHECK(resolver.resolve({"missing.example", DnsType::A}, std::chrono::milliseconds(2000))
              .status == DnsStatus::NxDomain);
    CHECK(resolver.resolve({"down.example", DnsType::A}, std::chrono::milliseconds(2000))
              .status == DnsStatus::ServFail);

    server.drop_queries = true;
    auto t = resolver.resolve({"bad.example", DnsType::A}, std::chrono::milliseconds(50));
    CHECK(t.status == DnsStatus::Timeout);
    server.stop();
}
