#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "spamwall/batch.hpp"
#include "testutil.hpp"

using namespace spamwall;
using namespace spamwall::testutil;

namespace {

StaticZone batch_zone() {
    StaticZone zone;
    zone.add_a("badshop.example.ws.test", *Ipv4::parse("127.0.0.2"));
    zone.add_a("66.2.0.192.bl.test", *Ipv4::parse("127.0.0.2"));
    return zone;
}

PipelineContext batch_context(StaticZone& zone, GreylistStore& store) {
    PipelineContext ctx;
    ctx.dnsbl_lists = {{"bl", "bl.test", BlocklistKind::IpList, 1, true}};
    ctx.surbl_lists = {{"ws", "ws.test", BlocklistKind::DomainList, 1, true}};
    ctx.content_rules = default_content_rules();
    ctx.attachment_rule = default_attachment_rule();
    ctx.resolver = &zone;
    ctx.greylist = &store;
    ctx.set_enabled(Stage::Rdns, false);
    ctx.set_enabled(Stage::Spf, false);
    return ctx;
}

// Corpus with deliberate greylist retries: a handful of triplets repeating at
// spaced timestamps so accept/reject sequencing matters.
std::vector<Message> retry_corpus(uint64_t seed, size_t n) {
    SplitMix64 rng(seed);
    std::vector<Message> corpus;
    for (size_t i = 0; i < n; ++i) {
        int sender = static_cast<int>(rng.next_below(6));
        int ip = static_cast<int>(rng.next_below(5));
        auto msg = make_message(
            rng.next_below(4) ? "notes" : "server report",
            rng.next_below(3) ? "plain body text" : "shop http://badshop.example/x",
            make_envelope("203.0.113." + std::to_string(ip + 1), "mx.sender.example",
                          "s" + std::to_string(sender) + "@sender.example",
                          "bob@corp.example"),
            static_cast<int64_t>(i * 7 + rng.next_below(5)));
        if (rng.next_below(6) == 0)
            msg.attachments.push_back(Attachment{"pack.BAK.exe", 150000, ""});
        corpus.push_back(std::move(msg));
    }
    std::stable_sort(corpus.begin(), corpus.end(),
                     [](const Message& a, const Message& b) {
                         return a.received_at < b.received_at;
                     });
    return corpus;
}

bool verdicts_equal(const Verdict& a, const Verdict& b) {
    if (a.final != b.final || a.smtp_code != b.smtp_code) return false;
    for (size_t i = 0; i < a.outcomes.size(); ++i) {
        if (a.outcomes[i].stage != b.outcomes[i].stage) return false;
        if (a.outcomes[i].decision != b.outcomes[i].decision) return false;
        if (a.outcomes[i].detail != b.outcomes[i].detail) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("parallel corpus filtering equals the serial reference exactly") {
    auto zone = batch_zone();
    for (uint64_t seed = 1; seed <= 40; ++seed) {
        auto corpus = retry_corpus(seed, 120);

        GreylistStore serial_store;
        auto serial_ctx = batch_context(zone, serial_store);
        auto serial = filter_corpus(corpus, serial_ctx, ExecMode::Serial);

        GreylistStore parallel_store;
        auto parallel_ctx = batch_context(zone, parallel_store);
        auto parallel = filter_corpus(corpus, parallel_ctx, ExecMode::Parallel);

        REQUIRE(serial.size() == parallel.size());
        for (size_t i = 0; i < serial.size(); ++i)
            CHECK(verdicts_equal(serial[i], parallel[i]));
        // the stores end in the same state too
        CHECK(serial_store.snapshot() == parallel_store.snapshot());
    }
}

TEST_CASE("parallel filtering is deterministic run to run") {
    auto zone = batch_zone();
    auto corpus = retry_corpus(99, 200);
    auto run = [&] {
        GreylistStore store;
        auto ctx = batch_context(zone, store);
        auto verdicts = filter_corpus(corpus, ctx, ExecMode::Parallel);
        std::vector<SessionEvent> events;
        for (size_t i = 0; i < corpus.size(); ++i)
            events.push_back(to_session_event(corpus[i], verdicts[i]));
        return sessions_to_csv(record_sessions(events, 600));
    };
    auto first = run();
    for (int i = 0; i < 5; ++i) CHECK(run() == first);
}

TEST_CASE("parallel training produces the identical dictionary") {
    SplitMix64 rng(7);
    std::vector<std::pair<Message, MailLabel>> corpus;
    for (int i = 0; i < 400; ++i) {
        std::string body;
        for (int w = 0; w < 12; ++w) body += "word" + std::to_string(rng.next_below(300)) + " ";
        corpus.push_back({make_message("subject " + std::to_string(i % 7), body),
                          rng.next_below(2) ? MailLabel::Spam : MailLabel::Ham});
    }
    auto serial = train_corpus(corpus, ExecMode::Serial);
    auto parallel = train_corpus(corpus, ExecMode::Parallel);
    CHECK(serial == parallel);
}

TEST_CASE("parallel classification matches serial") {
    SplitMix64 rng(8);
    std::vector<std::pair<Message, MailLabel>> training;
    for (int i = 0; i < 100; ++i) {
        std::string body = "tok" + std::to_string(rng.next_below(40)) + " tok" +
                           std::to_string(rng.next_below(40));
        training.push_back({make_message("", body), i % 2 ? MailLabel::Spam : MailLabel::Ham});
    }
    auto dict = train_corpus(training, ExecMode::Serial);

    std::vector<Message> corpus;
    for (int i = 0; i < 300; ++i)
        corpus.push_back(make_message("", "tok" + std::to_string(rng.next_below(60)) +
                                              " tok" + std::to_string(rng.next_below(60))));
    auto serial = classify_corpus(corpus, dict, 0.9, ExecMode::Serial);
    auto parallel = classify_corpus(corpus, dict, 0.9, ExecMode::Parallel);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == parallel[i]);

    // the compact batch result mirrors the full per-message classification
    for (size_t i = 0; i < 20; ++i) {
        auto full = classify(corpus[i], dict, 0.9);
        CHECK(serial[i].is_spam == full.is_spam);
        CHECK(serial[i].probability == full.score.probability);
    }
}
