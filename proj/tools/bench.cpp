// Compares the serial reference kernels against the OpenMP ones on a
// synthetic corpus: corpus filtering, dictionary training, batch classify.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "spamwall/batch.hpp"
#include "spamwall/sim.hpp"

using namespace spamwall;

namespace {

Message synth_message(uint64_t i, SplitMix64& rng) {
    Message m;
    m.received_at = static_cast<int64_t>(i);
    m.envelope.client_ip = Ipv4{static_cast<uint32_t>((198u << 24) | (51u << 16) | (i % 65536))};
    m.envelope.helo_host = "mx" + std::to_string(i % 500) + ".bulk.example";
    m.envelope.mail_from = *EmailAddress::parse("sender" + std::to_string(i % 700) +
                                                "@bulk" + std::to_string(i % 40) + ".example");
    m.envelope.rcpt_to.push_back(
        *EmailAddress::parse("user" + std::to_string(i % 200) + "@corp.example"));
    m.header_from = m.envelope.mail_from;
    m.subject = "newsletter issue " + std::to_string(i);

    std::string body = "greetings subscriber number " + std::to_string(i) + "\n";
    for (int w = 0; w < 60; ++w) body += "word" + std::to_string(rng.next_below(4000)) + " ";
    if (rng.next_double() < 0.3)
        body += "\nvisit http://www" + std::to_string(rng.next_below(9)) + ".catalog" +
                std::to_string(rng.next_below(50)) + ".example/offer";
    if (rng.next_double() < 0.1) body += "\nbuy viagra now";
    m.body_text = body;
    if (rng.next_double() < 0.15)
        m.attachments.push_back(
            Attachment{"invoice.PDF.exe", 140 * 1024 + rng.next_below(40 * 1024), ""});
    return m;
}

double ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace

int main(int argc, char** argv) {
    size_t n = argc > 1 ? static_cast<size_t>(std::stoull(argv[1])) : 20000;
    std::printf("corpus size: %zu messages, OpenMP threads: %d\n", n, parallel_thread_count());

    SplitMix64 rng(7);
    std::vector<Message> corpus;
    corpus.reserve(n);
    for (size_t i = 0; i < n; ++i) corpus.push_back(synth_message(i, rng));

    StaticZone zone = make_sim_zone();
    zone.add_a("catalog7.example.surbl.sim.test", Ipv4{0x7f000002});

    auto run_filter = [&](ExecMode mode) {
        PipelineContext ctx;
        ctx.surbl_lists = sim_surbl_lists();
        ctx.dnsbl_lists = sim_dnsbl_lists();
        ctx.resolver = &zone;
        GreylistStore store;
        ctx.greylist = &store;
        ctx.set_enabled(Stage::Greylist, false);  // one-shot corpus, keep the comparison pure
        ctx.set_enabled(Stage::Rdns, false);
        auto start = std::chrono::steady_clock::now();
        auto verdicts = filter_corpus(corpus, ctx, mode);
        double ms = ms_since(start);
        uint64_t trapped = 0;
        for (const auto& v : verdicts)
            if (v.final == FinalVerdict::Quarantined) ++trapped;
        return std::make_pair(ms, trapped);
    };

    auto [serial_ms, serial_trapped] = run_filter(ExecMode::Serial);
    auto [parallel_ms, parallel_trapped] = run_filter(ExecMode::Parallel);
    std::printf("filter_corpus   serial %8.1f ms   parallel %8.1f ms   speedup %.2fx%s\n",
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                serial_trapped == parallel_trapped ? "" : "   MISMATCH");

    std::vector<std::pair<Message, MailLabel>> labelled;
    labelled.reserve(n);
    for (size_t i = 0; i < n; ++i)
        labelled.emplace_back(corpus[i], i % 3 == 0 ? MailLabel::Spam : MailLabel::Ham);

    auto start = std::chrono::steady_clock::now();
    BayesDictionary dict_serial = train_corpus(labelled, ExecMode::Serial);
    double train_serial_ms = ms_since(start);
    start = std::chrono::steady_clock::now();
    BayesDictionary dict_parallel = train_corpus(labelled, ExecMode::Parallel);
    double train_parallel_ms = ms_since(start);
    std::printf("train_corpus    serial %8.1f ms   parallel %8.1f ms   speedup %.2fx%s\n",
                train_serial_ms, train_parallel_ms, train_serial_ms / train_parallel_ms,
                dict_serial == dict_parallel ? "" : "   MISMATCH");

    start = std::chrono::steady_clock::now();
    auto cls_serial = classify_corpus(corpus, dict_serial, 0.9, ExecMode::Serial);
    double cls_serial_ms = ms_since(start);
    start = std::chrono::steady_clock::now();
    auto cls_parallel = classify_corpus(corpus, dict_serial, 0.9, ExecMode::Parallel);
    double cls_parallel_ms = ms_since(start);
    bool same = true;
    for (size_t i = 0; i < n; ++i)
        if (cls_serial[i].is_spam != cls_parallel[i].is_spam) same = false;
    std::printf("classify_corpus serial %8.1f ms   parallel %8.1f ms   speedup %.2fx%s\n",
                cls_serial_ms, cls_parallel_ms, cls_serial_ms / cls_parallel_ms,
                same ? "" : "   MISMATCH");
    return 0;
}
